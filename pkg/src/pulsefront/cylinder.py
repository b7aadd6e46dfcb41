"""Discretization of the profile equation on the cylinder [-L, L] x T^N.

Fields are arrays of shape ``(n_xi,) + (n_y,) * dim``: the first axis is the
moving-frame variable xi, the others are the periodic cell coordinates y.
xi-derivatives are second-order central differences. y-derivatives are
Fourier multipliers, spectral when ``n_y`` is a power of two and the symbols
of fourth-order central stencils otherwise.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import LinearOperator, gmres

from . import kernels
from .errors import GridError, NonConvergence
from .medium import ReactionModel

MAGIC = b"PFR1"
HASH_TAG = b"CFGH"


@dataclass(frozen=True)
class CylinderGrid:
    L: float
    n_xi: int
    n_y: int
    dim: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if self.n_xi < 64:
            raise GridError(f"n_xi={self.n_xi} < 64")
        if self.n_y != 1 and self.n_y < 16:
            raise GridError(f"n_y={self.n_y}: need n_y >= 16, or 1 for homogeneous media")
        if self.L <= 0:
            raise GridError("L must be positive")
        if self.h > 0.25:
            raise GridError(f"h_xi={self.h:.4g} > 0.25; raise n_xi or lower L")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n_xi - 1)

    @property
    def xi(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.n_xi)

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.n_y) / self.n_y

    @property
    def y_shape(self) -> tuple[int, ...]:
        return (self.n_y,) * self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_xi,) + self.y_shape

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spectral(self) -> bool:
        n = self.n_y
        return n & (n - 1) == 0

    def y_points(self) -> np.ndarray:
        """Cell nodes, shape ``y_shape + (dim,)``; plain 1-D array when dim == 1."""
        if self.dim == 1:
            return self.y
        g = np.meshgrid(self.y, self.y, indexing="ij")
        return np.stack(g, axis=-1)

    def with_resolution(self, n_xi: int | None = None, L: float | None = None, n_y: int | None = None):
        return CylinderGrid(
            self.L if L is None else L,
            self.n_xi if n_xi is None else n_xi,
            self.n_y if n_y is None else n_y,
            self.dim,
        )


@dataclass
class ProfileField:
    grid: CylinderGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)


def _axis_symbols(n: int, spectral: bool, last: bool):
    """First-derivative symbol (imaginary part) and -second-derivative symbol."""
    m = sfft.rfftfreq(n, 1.0 / n) if last else sfft.fftfreq(n, 1.0 / n)
    if spectral:
        w = 2.0 * np.pi * m
        d1 = w.copy()
        if n % 2 == 0:
            d1[np.abs(m) == n // 2] = 0.0
        return d1, w * w
    hy = 1.0 / n
    t = 2.0 * np.pi * m / n
    d1 = (8.0 * np.sin(t) - np.sin(2.0 * t)) / (6.0 * hy)
    lam = (30.0 - 32.0 * np.cos(t) + 2.0 * np.cos(2.0 * t)) / (12.0 * hy * hy)
    return d1, lam


class YOperators:
    """Fourier symbols of the y-derivatives on one grid."""

    def __init__(self, grid: CylinderGrid):
        self.grid = grid
        self.axes = tuple(range(1, grid.dim + 1))
        d1s, lams = [], []
        for a in range(grid.dim):
            d1, lam = _axis_symbols(grid.n_y, grid.spectral, a == grid.dim - 1)
            shp = [1] * grid.dim
            shp[a] = d1.size
            d1s.append(d1.reshape(shp))
            lams.append(lam.reshape(shp))
        self.d1 = d1s
        self.lam = sum(lams[1:], lams[0])
        self.mode_shape = tuple(int(s) for s in np.broadcast_shapes(*[d.shape for d in d1s]))

    def fwd(self, v):
        return sfft.rfftn(v, axes=self.axes)

    def inv(self, vh):
        return sfft.irfftn(vh, s=self.grid.y_shape, axes=self.axes)

    def transport(self, e) -> np.ndarray:
        """Symbol s with e . grad_y  <->  i s."""
        return sum(float(ei) * d for ei, d in zip(e, self.d1))

    def grad_dot(self, v, e):
        return self.inv(1j * self.transport(e) * self.fwd(v))

    def lap(self, v):
        return self.inv(-self.lam * self.fwd(v))


_ops_cache: dict[CylinderGrid, YOperators] = {}


def y_operators(grid: CylinderGrid) -> YOperators:
    ops = _ops_cache.get(grid)
    if ops is None:
        ops = _ops_cache[grid] = YOperators(grid)
    return ops


def _check(grid: CylinderGrid, model: ReactionModel | None, e) -> np.ndarray:
    e = np.atleast_1d(np.asarray(e, dtype=float))
    if e.size != grid.dim:
        raise GridError(f"direction has {e.size} components, grid has dim={grid.dim}")
    if abs(np.linalg.norm(e) - 1.0) > 1e-12:
        raise GridError(f"direction {e} is not a unit vector")
    if model is not None and model.dim != grid.dim:
        raise GridError(f"medium dim={model.dim} does not match grid dim={grid.dim}")
    return e


def theta_on_grid(grid: CylinderGrid, model: ReactionModel) -> np.ndarray:
    return model.theta(grid.y_points())


def d0(grid: CylinderGrid, U: np.ndarray) -> np.ndarray:
    """Central xi-difference, zero on the two boundary rows."""
    out = np.zeros_like(U)
    out[1:-1] = (U[2:] - U[:-2]) / (2.0 * grid.h)
    return out


def _values(U):
    return U.values if isinstance(U, ProfileField) else np.asarray(U, dtype=float)


def _linear_part(grid, ops, e, c, U, sign_c=1.0):
    """Interior rows of c D0 U + D2 U + 2 D0 (e.grad_y U) + lap_y U, zero-padded.

    Rows 0 and n-1 use zero ghost values, which is what the transpose needs;
    callers overwrite them for the forward operator.
    """
    h = grid.h
    Uh = ops.fwd(U)
    s = ops.transport(e)
    adv = sign_c * c + 2j * s
    P = np.pad(Uh, [(1, 1)] + [(0, 0)] * grid.dim)
    out = (P[2:] - 2.0 * P[1:-1] + P[:-2]) / (h * h) + adv * (P[2:] - P[:-2]) / (2.0 * h) - ops.lam * Uh
    return ops.inv(out)


def front_residual(grid: CylinderGrid, model: ReactionModel, e, c: float, U) -> np.ndarray:
    """Residual of the discrete profile equation with Dirichlet rows U(-L)=1, U(L)=0."""
    e = _check(grid, model, e)
    U = _values(U).reshape(grid.shape)
    ops = y_operators(grid)
    R = _linear_part(grid, ops, e, c, U) + model.f(theta_on_grid(grid, model), U)
    R[0] = U[0] - 1.0
    R[-1] = U[-1]
    return R


class Linearization:
    """Jacobian of :func:`front_residual` in U, applied matrix-free.

    ``dc`` is the derivative of the residual in c. ``psolve`` applies the
    inverse of the mode preconditioner, in which f_u is replaced by its
    y-average so that each y-Fourier mode decouples into a tridiagonal
    system in xi.
    """

    def __init__(self, grid: CylinderGrid, model: ReactionModel, e, c: float, U):
        self.grid = grid
        self.model = model
        self.e = _check(grid, model, e)
        self.c = float(c)
        self.U = _values(U).reshape(grid.shape)
        self.ops = y_operators(grid)
        _, fu = model.f_and_fu(theta_on_grid(grid, model), self.U)
        self.fu = np.asarray(fu)
        self.dc = d0(grid, self.U)
        self.n = grid.size

    def apply(self, V: np.ndarray) -> np.ndarray:
        V = V.reshape(self.grid.shape)
        out = _linear_part(self.grid, self.ops, self.e, self.c, V) + self.fu * V
        out[0] = V[0]
        out[-1] = V[-1]
        return out

    def apply_t(self, W: np.ndarray) -> np.ndarray:
        W = W.reshape(self.grid.shape)
        Wi = W.copy()
        Wi[0] = 0.0
        Wi[-1] = 0.0
        out = _linear_part(self.grid, self.ops, self.e, self.c, Wi, sign_c=-1.0) + self.fu * Wi
        out[0] += W[0]
        out[-1] += W[-1]
        return out

    def matvec(self, v):
        return self.apply(np.asarray(v)).ravel()

    def rmatvec(self, w):
        return self.apply_t(np.asarray(w)).ravel()

    def as_operator(self) -> LinearOperator:
        return LinearOperator((self.n, self.n), matvec=self.matvec, rmatvec=self.rmatvec, dtype=float)

    def to_dense(self) -> np.ndarray:
        """Explicit matrix, column by column. Small grids only."""
        if self.n > 20000:
            raise GridError("to_dense is meant for small test grids")
        eye = np.eye(self.n)
        return np.stack([self.matvec(eye[:, j]) for j in range(self.n)], axis=1)

    # mode preconditioner

    @cached_property
    def _bands(self):
        g = self.grid
        h = g.h
        fbar = self.fu.reshape(g.n_xi, -1).mean(axis=1)
        s = self.ops.transport(self.e).ravel()
        lam = np.broadcast_to(self.ops.lam, self.ops.mode_shape).ravel()
        adv = (self.c + 2j * s)[None, :] / (2.0 * h)
        nm = s.size
        sub = np.broadcast_to(1.0 / (h * h) - adv, (g.n_xi, nm)).astype(complex)
        sup = np.broadcast_to(1.0 / (h * h) + adv, (g.n_xi, nm)).astype(complex)
        diag = (-2.0 / (h * h) + fbar[:, None] - lam[None, :]).astype(complex)
        for row in (0, -1):
            sub[row] = 0.0
            sup[row] = 0.0
            diag[row] = 1.0
        return sub, diag, sup

    @cached_property
    def _factor(self):
        sub, diag, sup = self._bands
        return kernels.tridiag_factor(sub, diag, sup) + (np.ascontiguousarray(sup),)

    @cached_property
    def _factor_t(self):
        sub, diag, sup = self._bands
        # conjugate transpose of each mode block
        sub_t = np.zeros_like(sub)
        sup_t = np.zeros_like(sup)
        sub_t[1:] = np.conj(sup[:-1])
        sup_t[:-1] = np.conj(sub[1:])
        return kernels.tridiag_factor(sub_t, np.conj(diag), sup_t) + (np.ascontiguousarray(sup_t),)

    def _mode_solve(self, r, factor):
        g = self.grid
        rh = self.ops.fwd(r.reshape(g.shape))
        mult, piv, sup = factor
        x = kernels.tridiag_solve(mult, piv, sup, rh.reshape(g.n_xi, -1))
        return self.ops.inv(x.reshape(rh.shape)).ravel()

    def psolve(self, r):
        return self._mode_solve(np.asarray(r), self._factor)

    def psolve_t(self, r):
        return self._mode_solve(np.asarray(r), self._factor_t)


def bordered_solve(
    lin: Linearization,
    p: np.ndarray,
    rhs_u: np.ndarray,
    rhs_c: float,
    transpose: bool = False,
    rtol: float = 1e-8,
    restart: int = 60,
    maxiter: int = 40,
):
    """Solve [[J, b], [p^T, 0]] (x, s) = (rhs_u, rhs_c), or its transpose.

    In the transposed system the roles of b (the c-column) and p swap.
    GMRES with the block-eliminated mode preconditioner.
    """
    n = lin.n
    b = lin.dc.ravel()
    p = np.asarray(p, dtype=float).ravel()
    if transpose:
        col, row, A, Pinv = p, b, lin.rmatvec, lin.psolve_t
    else:
        col, row, A, Pinv = b, p, lin.matvec, lin.psolve

    def mv(z):
        out = np.empty(n + 1)
        out[:n] = A(z[:n]) + col * z[n]
        out[n] = row @ z[:n]
        return out

    z2 = Pinv(col)
    denom = row @ z2

    def prec(r):
        z1 = Pinv(r[:n])
        s = (row @ z1 - r[n]) / denom
        out = np.empty(n + 1)
        out[:n] = z1 - s * z2
        out[n] = s
        return out

    rhs = np.concatenate([np.asarray(rhs_u, dtype=float).ravel(), [rhs_c]])
    Aop = LinearOperator((n + 1, n + 1), matvec=mv, dtype=float)
    Mop = LinearOperator((n + 1, n + 1), matvec=prec, dtype=float)
    iters = [0]

    def count(_):
        iters[0] += 1

    sol, info = gmres(
        Aop, rhs, x0=prec(rhs), rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter,
        M=Mop, callback=count, callback_type="pr_norm",
    )
    if info < 0:
        raise NonConvergence(f"GMRES breakdown (info={info})")
    if info > 0:
        res = np.linalg.norm(mv(sol) - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if res > 1e3 * rtol:
            raise NonConvergence(f"GMRES stalled at relative residual {res:.3e}", residual=res)
    return sol[:n], float(sol[n]), iters[0]


def y_mean(grid: CylinderGrid, values) -> np.ndarray:
    v = _values(values).reshape(grid.shape)
    return v.reshape(grid.n_xi, -1).mean(axis=1)


def _gregory(g: np.ndarray, h: float) -> float:
    """Trapezoid rule with Gregory end corrections (exact for cubics)."""
    if g.size < 4:
        return float(h * (g.sum() - 0.5 * (g[0] + g[-1])))
    t = h * (g.sum() - 0.5 * (g[0] + g[-1]))
    d1a, d1b = g[1] - g[0], g[-1] - g[-2]
    d2a, d2b = g[2] - 2 * g[1] + g[0], g[-1] - 2 * g[-2] + g[-3]
    d3a, d3b = g[3] - 3 * g[2] + 3 * g[1] - g[0], g[-1] - 3 * g[-2] + 3 * g[-3] - g[-4]
    corr = -(d1b - d1a) / 12.0 - (d2b + d2a) / 24.0 - 19.0 * (d3b - d3a) / 720.0
    return float(t + h * corr)


def cylinder_quadrature(grid: CylinderGrid, values, a: float | None = None) -> float:
    """Integral over the cylinder, optionally restricted to xi > a.

    y is averaged over the cell nodes (exact for trigonometric fields), xi
    is integrated by the end-corrected trapezoid rule. For a between nodes
    the partial cell is integrated from the cubic spline of the y-mean.
    """
    g = y_mean(grid, values)
    xi = grid.xi
    if a is None or a <= xi[0]:
        return _gregory(g, grid.h)
    if a >= xi[-1]:
        return 0.0
    k = int(np.ceil((a - xi[0]) / grid.h - 1e-12))
    total = _gregory(g[k:], grid.h) if grid.n_xi - k >= 2 else 0.0
    if xi[k] - a > 1e-14 * grid.L:
        lo = max(k - 3, 0)
        hi = min(k + 3, grid.n_xi)
        total += float(CubicSpline(xi[lo:hi], g[lo:hi]).integrate(a, xi[k]))
    return total


# binary front files

def write_pfr(path, grid: CylinderGrid, c: float, e, values, config_hash: str | None = None) -> None:
    e = np.atleast_1d(np.asarray(e, dtype="<f8"))
    vals = np.ascontiguousarray(_values(values).reshape(grid.shape), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", grid.dim, grid.n_xi))
        fh.write(struct.pack("<" + "I" * grid.dim, *([grid.n_y] * grid.dim)))
        fh.write(struct.pack("<dd", grid.L, float(c)))
        fh.write(e.tobytes())
        fh.write(vals.tobytes())
        if config_hash:
            h = config_hash.encode("ascii")
            if len(h) != 64:
                raise ValueError("config hash must be 64 hex characters")
            fh.write(HASH_TAG + h)


def read_pfr(path):
    """Return ``(grid, c, e, values, config_hash_or_None)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise GridError(f"{path}: not a front file (bad magic)")
    dim, n_xi = struct.unpack_from("<II", data, 4)
    off = 12
    n_ys = struct.unpack_from("<" + "I" * dim, data, off)
    off += 4 * dim
    if len(set(n_ys)) != 1:
        raise GridError(f"{path}: unequal periodic resolutions {n_ys}")
    L, c = struct.unpack_from("<dd", data, off)
    off += 16
    e = np.frombuffer(data, "<f8", dim, off).copy()
    off += 8 * dim
    grid = CylinderGrid(L, n_xi, n_ys[0], dim)
    vals = np.frombuffer(data, "<f8", grid.size, off).reshape(grid.shape).copy()
    off += 8 * grid.size
    tag = None
    if len(data) >= off + 68 and data[off:off + 4] == HASH_TAG:
        tag = data[off + 4:off + 68].decode("ascii")
    return grid, c, e, vals, tag


def export_profile_csv(path, grid: CylinderGrid, values, y_index=None, config_hash: str | None = None) -> None:
    """xi-profiles at fixed y nodes; default is the cell origin."""
    v = _values(values).reshape(grid.n_xi, -1)
    cols = [0] if y_index is None else list(np.atleast_1d(y_index))
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("xi," + ",".join(f"U_y{j}" for j in cols) + "\n")
        for i, x in enumerate(grid.xi):
            fh.write("%.9g," % x + ",".join("%.9g" % v[i, j] for j in cols) + "\n")
