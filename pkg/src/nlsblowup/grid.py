"""Radial meshes, quadrature and finite-difference calculus on R^N.

Everything here works on functions of r = |y| sampled on a 1D mesh that
starts exactly at r = 0.  Integrals of radial functions over R^N are
reduced to weighted 1D sums, and the Laplacian is discretized in flux
(conservative) form so that it is exactly self-adjoint with respect to
the cell-volume inner product.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


def sphere_area(N: int) -> float:
    """Area of the unit sphere in R^N (2 for N=1)."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def _simpson_weights(r: np.ndarray, N: int) -> np.ndarray:
    """Quadrature weights w with sum(w*f(r)) ~ omega_N * int f(r) r^{N-1} dr.

    Weights integrate the piecewise-quadratic interpolant of f against the
    exact moments of r^{N-1}, so the measure is handled exactly near r=0.
    """
    n = len(r)
    w = np.zeros(n)

    def moments(a, b, kmax):
        # mom[k] = int_a^b r^{N-1+k} dr
        return [(b ** (N + k) - a ** (N + k)) / (N + k) for k in range(kmax)]

    i = 0
    while i + 2 < n or (i + 2 == n and (n - 1) % 2 == 0):
        if i + 2 >= n:
            break
        a, b, c = r[i], r[i + 1], r[i + 2]
        m0, m1, m2 = moments(a, c, 3)
        # integral of Lagrange basis (quadratic through a,b,c) against r^{N-1}
        w[i] += (m2 - (b + c) * m1 + b * c * m0) / ((a - b) * (a - c))
        w[i + 1] += (m2 - (a + c) * m1 + a * c * m0) / ((b - a) * (b - c))
        w[i + 2] += (m2 - (a + b) * m1 + a * b * m0) / ((c - a) * (c - b))
        i += 2
    if i + 1 < n:  # odd interval count: linear interpolant on the last cell
        a, b = r[-2], r[-1]
        m0, m1 = moments(a, b, 2)
        w[-2] += (b * m0 - m1) / (b - a)
        w[-1] += (m1 - a * m0) / (b - a)
    return w * sphere_area(N)


@dataclass(frozen=True)
class RadialGrid:
    """1D radial mesh carrying dimension N and quadrature for R^N integrals."""

    N: int
    r: np.ndarray
    kind: str = "uniform"
    w: np.ndarray = field(init=False, repr=False, compare=False)
    cellvol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= self.N <= 5:
            raise ValueError(f"dimension N={self.N} outside 1..5")
        r = np.asarray(self.r, dtype=float)
        if r[0] != 0.0:
            raise ValueError("grid must start at r = 0")
        if np.any(np.diff(r) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "w", _simpson_weights(r, self.N))
        # cell volumes: omega_N * int r^{N-1} over the dual cell of each node
        rm = np.concatenate(([0.0], 0.5 * (r[1:] + r[:-1]), [r[-1]]))
        vol = (rm[1:] ** self.N - rm[:-1] ** self.N) / self.N * sphere_area(self.N)
        object.__setattr__(self, "cellvol", vol)

    # -- constructors ---------------------------------------------------

    @classmethod
    def uniform(cls, N, r_max, n):
        return cls(N, np.linspace(0.0, r_max, n), kind="uniform")

    @classmethod
    def stretched(cls, N, r_max, n, stretch=4.0):
        """sinh-stretched mesh: fine near the origin, coarse at r_max."""
        t = np.linspace(0.0, 1.0, n)
        r = r_max * np.sinh(stretch * t) / np.sinh(stretch)
        r[0] = 0.0
        return cls(N, r, kind="geometric-stretch")

    # -- basic properties -----------------------------------------------

    @property
    def n(self):
        return len(self.r)

    @property
    def r_max(self):
        return float(self.r[-1])

    def same_as(self, other):
        return self.N == other.N and len(self.r) == len(other.r) and np.array_equal(self.r, other.r)

    # -- quadrature -----------------------------------------------------

    def integrate(self, f):
        """omega_N * int f(r) r^{N-1} dr by the quadrature weights."""
        return np.sum(self.w * f)

    def dot(self, f, g):
        """Real L^2(R^N) scalar product of two real fields."""
        return float(np.sum(self.w * f * g))

    def pairing(self, f, g):
        """(f,g) = Re int f conj(g) over R^N."""
        return float(np.real(np.sum(self.w * f * np.conj(g))))

    def mass(self, f):
        return float(np.sum(self.w * np.abs(f) ** 2))

    def weighted_mass(self, f):
        """int |f|^2 e^{-r}, the local norm used in the coercivity checks."""
        return float(np.sum(self.w * np.abs(f) ** 2 * np.exp(-self.r)))

    def grad_sq(self, f, even=True):
        """int |f'|^2 over R^N."""
        df = self.derivative(f, even=even)
        return float(np.sum(self.w * np.abs(df) ** 2))

    def energy(self, f, p, even=True):
        """E(f) = 1/2 int |grad f|^2 - 1/(p+1) int |f|^{p+1}."""
        return 0.5 * self.grad_sq(f, even=even) - self.integrate(np.abs(f) ** (p + 1)) / (p + 1)

    def virial_moment(self, f, even=True):
        """Im int y.grad(f) conj(f)."""
        df = self.derivative(f, even=even)
        return float(np.imag(np.sum(self.w * self.r * df * np.conj(f))))

    def momentum(self, f, even=True):
        """Im int f' conj(f): radial component of the momentum."""
        df = self.derivative(f, even=even)
        return float(np.imag(np.sum(self.w * df * np.conj(f))))

    # -- differential operators ------------------------------------------

    def derivative(self, f, even=True, order=2):
        """First derivative; even fields have f'(0)=0 by parity.

        order=4 uses a five-point stencil (uniform grids only), with even
        reflection across the origin and second-order closure at the two
        outermost nodes.
        """
        r = self.r
        n = len(r)
        if n < 5:
            raise ValueError("grid too coarse (< 5 nodes)")
        if order == 4:
            if self.kind != "uniform":
                raise ValueError("order=4 derivative needs a uniform grid")
            h = r[1] - r[0]
            f = np.asarray(f)
            df = np.empty_like(f, dtype=complex if np.iscomplexobj(f) else float)
            df[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
            s = 1.0 if even else -1.0
            df[0] = 0.0 if even else (-f[2] + 8 * f[1] - 8 * s * f[1] + s * f[2]) / (12 * h)
            df[1] = (-f[3] + 8 * f[2] - 8 * f[0] + s * f[1]) / (12 * h)
            df[-2] = (f[-1] - f[-3]) / (2 * h)
            df[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
            return df
        df = np.empty_like(np.asarray(f, dtype=complex if np.iscomplexobj(f) else float))
        hm = r[1:-1] - r[:-2]
        hp = r[2:] - r[1:-1]
        df[1:-1] = (hm / (hp * (hp + hm))) * f[2:] \
            + ((hp - hm) / (hp * hm)) * f[1:-1] \
            - (hp / (hm * (hp + hm))) * f[:-2]
        if even:
            df[0] = 0.0
        else:
            h0, h1 = r[1] - r[0], r[2] - r[1]
            df[0] = (-(2 * h0 + h1) / (h0 * (h0 + h1))) * f[0] \
                + ((h0 + h1) / (h0 * h1)) * f[1] - (h0 / (h1 * (h0 + h1))) * f[2]
        ha, hb = r[-2] - r[-3], r[-1] - r[-2]
        df[-1] = (hb / (ha * (ha + hb))) * f[-3] \
            - ((ha + hb) / (ha * hb)) * f[-2] \
            + ((ha + 2 * hb) / (hb * (ha + hb))) * f[-1]
        return df

    def laplacian_bands(self, outer="linear"):
        """Tridiagonal flux-form Laplacian f'' + (N-1)/r f'.

        Returns (lower, diag, upper) with the origin handled by even
        reflection (zero flux), giving the symmetric limit N f''(0).
        outer: 'linear' extrapolation ghost, 'dirichlet' (ghost value 0)
        or 'neumann' (zero flux) at r_max.
        """
        r = self.r
        n = len(r)
        if n < 5:
            raise ValueError("grid too coarse (< 5 nodes)")
        h = np.diff(r)
        rm = 0.5 * (r[1:] + r[:-1])
        a = rm ** (self.N - 1)  # face areas (up to omega_N)
        vol = self.cellvol / sphere_area(self.N)

        lo = np.zeros(n)
        di = np.zeros(n)
        up = np.zeros(n)
        # interior
        up[:-1] = a / h / vol[:-1]            # coupling i -> i+1 (rows 0..n-2)
        lo[1:] = a / h / vol[1:]              # coupling i -> i-1 (rows 1..n-1)
        di[:-1] -= a / h / vol[:-1]
        di[1:] -= a / h / vol[1:]
        # last row outer face
        if outer == "linear":
            # ghost with f'' = 0: outgoing flux equals incoming slope
            fa = r[-1] ** (self.N - 1)
            lo[-1] += -fa / h[-1] / vol[-1]
            di[-1] += fa / h[-1] / vol[-1]
        elif outer == "dirichlet":
            fa = r[-1] ** (self.N - 1)
            di[-1] += -fa / h[-1] / vol[-1]
        elif outer == "neumann":
            pass
        else:
            raise ValueError(f"unknown outer closure {outer!r}")
        return lo, di, up

    def laplacian(self, f, even=True):
        """Discrete f'' + (N-1)/r f' with origin limit N f''(0)."""
        if not even:
            raise ValueError("laplacian requires an even-regular field")
        lo, di, up = self.laplacian_bands()
        out = di * f
        out[:-1] += up[:-1] * f[1:]
        out[1:] += lo[1:] * f[:-1]
        return out

    def scale_generators(self, f, p, even=True):
        """(Lambda f, D f) with Lambda = 2/(p-1) + y.grad, D = N/2 + y.grad."""
        if p <= 1:
            raise ValueError(f"p={p} must exceed 1")
        rdf = self.r * self.derivative(f, even=even)
        return (2.0 / (p - 1.0)) * f + rdf, (self.N / 2.0) * f + rdf


def tridiag_matvec(bands, f):
    lo, di, up = bands
    out = di * f
    out[:-1] += up[:-1] * f[1:]
    out[1:] += lo[1:] * f[:-1]
    return out


def tridiag_solve(bands, rhs):
    """Solve the tridiagonal system given by (lower, diag, upper) bands."""
    from scipy.linalg import solve_banded

    lo, di, up = bands
    n = len(di)
    ab = np.zeros((3, n), dtype=np.result_type(di, rhs))
    ab[0, 1:] = up[:-1]
    ab[1] = di
    ab[2, :-1] = lo[1:]
    return solve_banded((1, 1), ab, rhs)


def tridiag_dense(bands):
    lo, di, up = bands
    n = len(di)
    m = np.diag(di.astype(complex) if np.iscomplexobj(di) else di)
    m[np.arange(n - 1), np.arange(1, n)] = up[:-1]
    m[np.arange(1, n), np.arange(n - 1)] = lo[1:]
    return m


@dataclass
class RadialField:
    """Complex radial function sampled on a RadialGrid."""

    grid: RadialGrid
    values: np.ndarray
    even: bool = True

    def __post_init__(self):
        v = np.asarray(self.values)
        if len(v) != self.grid.n:
            raise ValueError("field length does not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        self.values = v

    def to_csv(self, path):
        v = self.values.astype(complex)
        data = np.column_stack([self.grid.r, v.real, v.imag])
        np.savetxt(path, data, delimiter=",", header="r,re,im", comments="")

    def to_json_envelope(self):
        v = self.values.astype(complex)
        return {
            "grid": {"N": self.grid.N, "kind": self.grid.kind,
                     "r_max": self.grid.r_max, "nodes": self.grid.n},
            "r": self.grid.r.tolist(),
            "re": v.real.tolist(),
            "im": v.imag.tolist(),
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_envelope(), fh)

    @classmethod
    def from_csv(cls, path, N, kind="uniform"):
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        grid = RadialGrid(N, data[:, 0], kind=kind)
        return cls(grid, data[:, 1] + 1j * data[:, 2])
