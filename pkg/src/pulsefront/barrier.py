"""Explicit barrier fields built from a family of pulsating fronts, and
numerical certificates for their parabolic inequalities.

The subsolution is

    v(t, x) = max{U_xhat(z, x) h(z) + (1 - delta)(1 - h(z)) - delta_eps, 0}
    z = |x| - (c_lo - eps/2)(t - T) - xi_eps - C - C_eps

and the supersolution

    w(t, x) = min{U_xtil(z, x) h(z) + delta (1 - h(z)) + delta_eps, 1}
    z = -|x| - (c_hi + eps/2)(t - tau) + R - B - C'_eps

with xhat = x/|x| and xtil = -x/|x|. The operator Lv = v_t - Lap v - f(x, v)
is evaluated by centered differences on a lattice of sample points.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.special import gammaincc

from .errors import ConstantsInfeasible, GridError, OutsideDomain, RegionTouchesClamp
from .front import SpeedSweep
from .medium import ReactionModel

log = logging.getLogger(__name__)

SLOPE_MAX = 15.0 / 8.0              # max of the quintic smoothstep derivative on [0, 1]
CURV_MAX = 10.0 * np.sqrt(3.0) / 3.0  # max |s''| on [0, 1]


# glue function

@dataclass(frozen=True)
class Glue:
    """Quintic smoothstep rescaled onto a window of width ``xi_eps``.

    Plain orientation: 0 for z <= -xi_eps - C, 1 for z >= -C.
    Mirrored: 1 for z <= C, 0 for z >= C + xi_eps.
    """

    xi_eps: float
    C: float
    mirrored: bool = False

    def _t(self, z):
        z = np.asarray(z, dtype=float)
        if self.mirrored:
            t = (self.C + self.xi_eps - z) / self.xi_eps
        else:
            t = (z + self.xi_eps + self.C) / self.xi_eps
        return np.clip(t, 0.0, 1.0)

    def __call__(self, z):
        t = self._t(z)
        return t * t * t * (t * (6.0 * t - 15.0) + 10.0)

    def d1(self, z):
        t = self._t(z)
        s = 30.0 * t * t * (1.0 - t) ** 2 / self.xi_eps
        return -s if self.mirrored else s

    def d2(self, z):
        t = self._t(z)
        return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / self.xi_eps ** 2

    @property
    def max_slope(self) -> float:
        return SLOPE_MAX / self.xi_eps

    @property
    def max_curvature(self) -> float:
        return CURV_MAX / self.xi_eps ** 2


def build_glue(xi_eps: float, C: float, mirrored: bool = False) -> Glue:
    if not xi_eps >= 2.0:
        raise ValueError(f"glue width xi_eps={xi_eps:g} must be at least 2")
    return Glue(float(xi_eps), float(C), mirrored)


# directional interpolation of the sweep

def _periodic_weights(angles: np.ndarray):
    """Cubic spline in the angle, as a linear map from node values."""
    n = angles.size
    eye = np.eye(n)
    return CubicSpline(np.append(angles, angles[0] + 2.0 * np.pi), np.vstack([eye, eye[:1]]), bc_type="periodic")


class FrontFamily:
    """U_e(xi, y) for any direction of the plane, interpolated from a sweep.

    The angle uses a periodic cubic spline through the normalized sweep
    profiles, xi a cubic spline with exponential tails past the grid, and
    y the trigonometric interpolant of the grid values.
    """

    def __init__(self, sweep: SpeedSweep, min_angles: int = 32):
        g = sweep.grid
        if g.dim != 2:
            raise GridError("front families are built from N = 2 sweeps")
        if len(sweep) < min_angles:
            raise ValueError(f"sweep has {len(sweep)} angles, need at least {min_angles}")
        ang = sweep.angles
        if np.any(np.diff(ang) <= 0) or ang[-1] - ang[0] >= 2.0 * np.pi:
            raise ValueError("sweep angles must increase within one turn")
        self.grid = g
        self.angles = ang
        self.speeds = sweep.speeds
        self._w = _periodic_weights(ang)
        self._profiles = [fr.U for fr in sweep.fronts]
        self._splines: dict[int, CubicSpline] = {}
        self._tails: dict[int, tuple] = {}
        self.k = sfft.fftfreq(g.n_y, 1.0 / g.n_y)

    def weights(self, phi) -> np.ndarray:
        phi = np.mod(np.asarray(phi, dtype=float) - self.angles[0], 2.0 * np.pi) + self.angles[0]
        return self._w(phi)

    def speed(self, phi) -> np.ndarray:
        return self.weights(phi) @ self.speeds

    def _spline(self, j: int) -> CubicSpline:
        sp = self._splines.get(j)
        if sp is None:
            g, U = self.grid, self._profiles[j]
            sp = self._splines[j] = CubicSpline(g.xi[1:-1], U[1:-1].reshape(g.n_xi - 2, -1), axis=0)
            h = g.h
            with np.errstate(divide="ignore", invalid="ignore"):
                a_lo, b_lo = 1.0 - U[1], 1.0 - U[2]
                a_hi, b_hi = U[-2], U[-3]
                r_lo = np.where((a_lo > 0) & (b_lo > a_lo), np.log(b_lo / a_lo) / h, 1.0)
                r_hi = np.where((a_hi > 0) & (b_hi > a_hi), np.log(b_hi / a_hi) / h, 1.0)
            self._tails[j] = (np.maximum(a_lo, 0).ravel(), r_lo.ravel(), np.maximum(a_hi, 0).ravel(), r_hi.ravel())
        return sp

    def _columns(self, j: int, xi: np.ndarray) -> np.ndarray:
        """Profile j at abscissae ``xi`` on the whole y grid, shape (P, M)."""
        g = self.grid
        sp = self._spline(j)
        a_lo, r_lo, a_hi, r_hi = self._tails[j]
        lo, hi = g.xi[1], g.xi[-2]
        out = sp(np.clip(xi, lo, hi))
        left, right = xi < lo, xi > hi
        if left.any():
            out[left] = 1.0 - a_lo * np.exp(-r_lo * (lo - xi[left])[:, None])
        if right.any():
            out[right] = a_hi * np.exp(-r_hi * (xi[right] - hi)[:, None])
        return out

    def __call__(self, xi, x, phi, chunk: int = 4096) -> np.ndarray:
        """U at abscissa ``xi``, periodic variable ``x`` (shape (..., 2)), direction angle ``phi``."""
        xi = np.asarray(xi, dtype=float)
        shape = xi.shape
        xi = xi.ravel()
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        phi = np.broadcast_to(np.asarray(phi, dtype=float), shape).ravel()
        out = np.empty(xi.size)
        for s in range(0, xi.size, chunk):
            sl = slice(s, s + chunk)
            out[sl] = self._eval(xi[sl], x[sl], phi[sl])
        return out.reshape(shape)

    def _eval(self, xi, x, phi):
        g = self.grid
        W = self.weights(phi)
        active = np.nonzero(np.abs(W).max(axis=0) > 1e-13)[0]
        cols = np.zeros((xi.size, g.n_y * g.n_y))
        for j in active:
            cols += W[:, j, None] * self._columns(int(j), xi)
        coef = sfft.fft2(cols.reshape(-1, g.n_y, g.n_y), axes=(1, 2)) / (g.n_y * g.n_y)
        e1 = np.exp(2j * np.pi * x[:, 0, None] * self.k[None, :])
        e2 = np.exp(2j * np.pi * x[:, 1, None] * self.k[None, :])
        return np.einsum("pab,pa,pb->p", coef, e1, e2).real


# constants

@dataclass(frozen=True)
class BarrierSpec:
    kind: str                 # "sub" or "super"
    dim: int
    eps: float
    delta: float
    delta_eps: float
    C: float
    C_eps: float
    C_eps_prime: float
    xi_eps: float
    k: float
    L: float
    gamma: float
    c_lo: float
    c_hi: float
    T: float                  # start time: T for sub, tau_eps for super
    B: float
    R: float
    T_eps: float = float("nan")
    level: float = float("nan")   # beta (sub) or alpha (super)
    norms: dict = field(default_factory=dict, compare=False)

    @property
    def t_end(self) -> float:
        """Right end of the time strip; infinite for the subsolution."""
        if self.kind == "super":
            return self.R / (self.c_hi + self.eps)
        return float("inf")

    def text(self) -> str:
        keys = ("kind", "dim", "eps", "delta", "delta_eps", "C", "C_eps", "C_eps_prime", "xi_eps", "k", "L",
                "gamma", "c_lo", "c_hi", "T", "B", "R", "T_eps", "level")
        lines = []
        for k in keys:
            v = getattr(self, k)
            lines.append(f"{k} = {v}" if isinstance(v, str) else f"{k} = {v:.9g}")
        for k, v in sorted(self.norms.items()):
            lines.append(f"norm_{k} = {v:.9g}")
        return "\n".join(lines) + "\n"


def _crossing_constant(sweep: SpeedSweep, level: float) -> float:
    """Smallest grid abscissa C with U >= 1-level left of -C and U <= level right of C."""
    g = sweep.grid
    out = 0.0
    for U in (fr.U for fr in sweep.fronts):
        col = U.reshape(g.n_xi, -1)
        above = np.nonzero((col > level).any(axis=1))[0]
        below = np.nonzero((col < 1.0 - level).any(axis=1))[0]
        hi = g.xi[min(above[-1] + 1, g.n_xi - 1)]
        lo = g.xi[max(below[0] - 1, 0)]
        out = max(out, hi, -lo)
    if out >= g.L - g.h:
        raise ConstantsInfeasible(f"level {level:g} is not crossed inside the cylinder; increase L")
    return float(out)


def _y_grad_norm(g, U) -> np.ndarray:
    k = 2j * np.pi * sfft.fftfreq(g.n_y, 1.0 / g.n_y)
    if g.n_y % 2 == 0:
        k[g.n_y // 2] = 0.0
    Uh = sfft.fftn(U, axes=(1, 2))
    gy1 = sfft.ifftn(Uh * k[None, :, None], axes=(1, 2)).real
    gy2 = sfft.ifftn(Uh * k[None, None, :], axes=(1, 2)).real
    return np.sqrt(gy1 ** 2 + gy2 ** 2), np.abs(gy1), np.abs(gy2)


def _family_norms(sweep: SpeedSweep, safety: float) -> dict:
    """Finite-difference surrogates for the derivative norms in the angle."""
    g = sweep.grid
    F = [fr.U for fr in sweep.fronts]
    n = len(F)
    d = 2.0 * np.pi / n
    best = dict(U1=0.0, dxiU1=0.0, dyU1=0.0, U2=0.0)
    for j in range(n):
        D = (F[(j + 1) % n] - F[j]) / d
        D2 = (F[(j + 1) % n] - 2.0 * F[j] + F[j - 1]) / d ** 2
        _, a1, a2 = _y_grad_norm(g, D)
        best["U1"] = max(best["U1"], np.abs(D).max())
        best["dxiU1"] = max(best["dxiU1"], np.abs(np.gradient(D, g.h, axis=0)).max())
        best["dyU1"] = max(best["dyU1"], a1.max() + a2.max())
        best["U2"] = max(best["U2"], np.abs(D2).max())
    return {k: safety * float(v) for k, v in best.items()}


def _cell_flow_time(model: ReactionModel, u0: float, done, n: int = 16, dt: float = 0.01, t_max: float = 5e3) -> float:
    """First time the x-periodic solution from the constant ``u0`` satisfies ``done(u)``."""
    k = 2.0 * np.pi * sfft.fftfreq(n, 1.0 / n)
    grids = np.meshgrid(*([np.arange(n) / n] * model.dim), indexing="ij")
    X = np.stack(grids, axis=-1)
    th = model.theta(X if model.dim > 1 else X[..., 0])
    lam = sum(np.meshgrid(*([k ** 2] * model.dim), indexing="ij"))
    u = np.full(th.shape, float(u0))
    t = 0.0
    while t < t_max:
        if done(u):
            return t
        u = sfft.ifftn(sfft.fftn(u + dt * model.f(th, u)) / (1.0 + dt * lam)).real
        t += dt
    raise ConstantsInfeasible(f"uniform flow from {u0:g} did not settle by t={t_max:g}")


def gaussian_collar(L: float, T: float, dim: int, target: float) -> float:
    """Smallest B with e^{LT} (4 pi T)^{-N/2} int_{|z|>=B} e^{-|z|^2/4T} dz <= target."""
    def tail(B):
        return np.exp(L * T) * gammaincc(dim / 2.0, B * B / (4.0 * T)) - target
    if tail(0.0) <= 0:
        return 0.0
    hi = 1.0
    while tail(hi) > 0:
        hi *= 2.0
    return float(brentq(tail, 0.0, hi, xtol=1e-12))


def solve_C_eps(dim: int, A: float, U2: float, bound: float) -> float:
    """Smallest C with (N sqrt N / C) (A + sqrt(N) U2 / C) <= bound."""
    if A <= 0 and U2 <= 0:
        return 0.0
    if bound <= 0:
        raise ConstantsInfeasible("right-hand side of the C_eps bound is not positive")
    a = dim * dim * U2          # coefficient of s^2, s = 1/C
    b = dim * np.sqrt(dim) * A
    s = bound / b if a == 0 else (-b + np.sqrt(b * b + 4 * a * bound)) / (2 * a)
    return float(1.0 / s)


def derive_constants(sweep: SpeedSweep, model: ReactionModel, eps: float, kind: str = "sub",
                     alpha: float | None = None, beta: float | None = None, safety: float = 2.0) -> BarrierSpec:
    """All constants of the barrier construction, measured on the sweep."""
    if kind not in ("sub", "super"):
        raise ValueError("kind must be 'sub' or 'super'")
    g = sweep.grid
    N = g.dim
    c = sweep.speeds
    c_lo, c_hi = float(c.min()), float(c.max())
    if eps <= 0:
        raise ValueError("eps must be positive")
    delta = model.sigma / 2.0
    L = model.lipschitz_L
    gam = model.gamma
    C = _crossing_constant(sweep, delta)
    k = np.inf
    near = np.abs(g.xi) <= C
    s_lo = s_hi = 0.0
    for U in (fr.U for fr in sweep.fronts):
        dU = np.gradient(U, g.h, axis=0)
        k = min(k, float((-dU[near]).min()))
        gy, _, _ = _y_grad_norm(g, U)
        tot = np.abs(dU) + gy
        s_lo = max(s_lo, float(tot[g.xi <= -C].max()))
        s_hi = max(s_hi, float(tot[g.xi >= C].max()))
    if k < 1e-6:
        raise ConstantsInfeasible(f"measured k={k:.3g} is below 1e-6; the profile is too flat on [-C, C]")
    delta_eps = min(delta, eps * k / (8.0 * L))
    norms = _family_norms(sweep, safety)
    A = 3 * norms["U1"] + 2 * norms["dxiU1"] + (2.0 / N) * norms["dyU1"]
    bound = min(gam * delta_eps / 3.0, eps * k / 8.0)
    C_eps = max(3.0, 4.0 * (N - 1) / eps, solve_C_eps(N, A, norms["U2"], bound))
    C_eps_prime = _crossing_constant(sweep, delta_eps)
    # glue width from the slope and curvature bounds
    s_glue = s_lo if kind == "sub" else s_hi
    target = gam * delta_eps / 3.0
    xi_eps = max(2.0, 2.0 * s_glue * SLOPE_MAX / target, np.sqrt(delta * CURV_MAX / target))
    norms.update(sup_glue_gradient=s_glue, bound_C1=bound)
    if kind == "sub":
        beta = (model.theta_max + 1.0) / 2.0 if beta is None else beta
        T = _cell_flow_time(model, beta, lambda u: u.min() >= 1.0 - delta_eps / 2.0)
        T = max(T, 1e-3)
        B = gaussian_collar(L, T, N, delta_eps / 2.0)
        R = xi_eps + C + C_eps + C_eps_prime + B
        return BarrierSpec("sub", N, eps, delta, delta_eps, C, C_eps, C_eps_prime, xi_eps, k, L, gam,
                           c_lo, c_hi, T, B, R, level=beta, norms=norms)
    alpha = model.theta_min / 2.0 if alpha is None else alpha
    tau = _cell_flow_time(model, alpha, lambda u: u.max() <= delta_eps / 2.0)
    tau = max(tau, 1e-3)
    B = gaussian_collar(L, tau, N, delta_eps / 2.0)
    T_eps = max(tau, 2.0 * (C + xi_eps + B + C_eps_prime) / eps)
    R = max(B, (c_hi + eps) * T_eps, 2.0 * (c_hi + eps) * (B + C + xi_eps + C_eps_prime + C_eps) / eps)
    return BarrierSpec("super", N, eps, delta, delta_eps, C, C_eps, C_eps_prime, xi_eps, k, L, gam,
                       c_lo, c_hi, tau, B, R, T_eps=T_eps, level=alpha, norms=norms)


# barrier fields

class BarrierField:
    """Evaluator (t, x) -> barrier value, x of shape (..., 2)."""

    def __init__(self, family: FrontFamily, spec: BarrierSpec, flip: bool = False):
        self.family, self.spec = family, spec
        self.kind = spec.kind
        self.glue = build_glue(spec.xi_eps, spec.C, mirrored=spec.kind == "super")
        self.offset = -spec.delta_eps if flip else spec.delta_eps
        self.flip = flip
        if self.kind == "sub":
            self.speed = spec.c_lo - spec.eps / 2.0
            self.shift = spec.xi_eps + spec.C + spec.C_eps
        else:
            self.speed = spec.c_hi + spec.eps / 2.0
            self.shift = spec.R - spec.B - spec.C_eps_prime

    def flipped(self) -> "BarrierField":
        return BarrierField(self.family, self.spec, flip=not self.flip)

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "super" and (np.any(t < self.spec.T - 1e-12) or np.any(t > self.spec.t_end + 1e-12)):
            raise OutsideDomain(f"supersolution lives on [{self.spec.T:g}, {self.spec.t_end:g}]")
        return t

    def zeta(self, t, x) -> np.ndarray:
        t = self._check_t(t)
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        if self.kind == "sub":
            return r - self.speed * (t - self.spec.T) - self.shift
        return -r - self.speed * (t - self.spec.T) + self.shift

    def raw(self, t, x) -> np.ndarray:
        """Barrier value before the clamp at 0 (sub) or 1 (super)."""
        x = np.asarray(x, dtype=float)
        z = self.zeta(t, x)
        z, xb = np.broadcast_arrays(z, x[..., 0])
        xfull = np.broadcast_to(x, z.shape + (2,))
        hz = self.glue(z)
        U = np.zeros(z.shape)
        on = hz > 0
        if on.any():
            phi = np.arctan2(xfull[..., 1][on], xfull[..., 0][on])
            if self.kind == "super":
                phi = phi + np.pi
            U[on] = self.family(z[on], xfull[on], phi)
        d = self.spec.delta
        if self.kind == "sub":
            return U * hz + (1.0 - d) * (1.0 - hz) - self.offset
        return U * hz + d * (1.0 - hz) + self.offset

    def __call__(self, t, x) -> np.ndarray:
        v = self.raw(t, x)
        return np.maximum(v, 0.0) if self.kind == "sub" else np.minimum(v, 1.0)

    def active(self, raw) -> np.ndarray:
        return raw > 0.0 if self.kind == "sub" else raw < 1.0


def assemble_subsolution(sweep: SpeedSweep, spec: BarrierSpec, family: FrontFamily | None = None) -> BarrierField:
    if spec.kind != "sub":
        raise ValueError("BarrierSpec was derived for a supersolution")
    return BarrierField(family or FrontFamily(sweep), spec)


def assemble_supersolution(sweep: SpeedSweep, spec: BarrierSpec, family: FrontFamily | None = None) -> BarrierField:
    if spec.kind != "super":
        raise ValueError("BarrierSpec was derived for a subsolution")
    return BarrierField(family or FrontFamily(sweep), spec)


# inequality checks

@dataclass(frozen=True)
class CheckRegion:
    """Time window times annulus r0 <= |x| <= r1, sampled on a (t, r, phi) lattice."""

    t0: float
    t1: float
    r0: float
    r1: float
    n_t: int = 5
    n_r: int = 40
    n_phi: int = 16

    def points(self):
        t = np.linspace(self.t0, self.t1, self.n_t)
        r = np.linspace(self.r0, self.r1, self.n_r)
        # irrational angular offset so the samples spread over the unit cell
        phi = 2.0 * np.pi * (np.arange(self.n_phi) + (np.sqrt(5.0) - 1.0) / 2.0) / self.n_phi
        T, Rr, P = np.meshgrid(t, r, phi, indexing="ij")
        x = np.stack([Rr * np.cos(P), Rr * np.sin(P)], axis=-1)
        return T.ravel(), x.reshape(-1, 2)


def band_region(field: BarrierField, z0: float, z1: float, t0: float, t1: float, **kw) -> CheckRegion:
    """Annulus whose points stay in the band z0 <= zeta <= z1 for all t in [t0, t1]."""
    s, sh, T = field.speed, field.shift, field.spec.T
    if field.kind == "sub":
        r0 = z0 + s * (t1 - T) + sh
        r1 = z1 + s * (t0 - T) + sh
    else:
        r0 = -z1 - s * (t0 - T) + sh
        r1 = -z0 - s * (t1 - T) + sh
    if r1 <= r0 or r0 <= 0:
        raise ValueError(f"band [{z0:g}, {z1:g}] is too thin for the time window")
    return CheckRegion(t0, t1, r0, r1, **kw)


def parabolic_operator(fn, model: ReactionModel, t, x, dx: float, dt: float, v0=None):
    """v_t - Lap v - f(x, v) by centered differences."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    v = fn(t, x) if v0 is None else v0
    vt = (fn(t + dt, x) - fn(t - dt, x)) / (2.0 * dt)
    lap = np.zeros_like(v)
    for i in range(x.shape[-1]):
        ei = np.zeros(x.shape[-1])
        ei[i] = dx
        lap += (fn(t, x + ei) - 2.0 * v + fn(t, x - ei)) / dx ** 2
    return vt - lap - model.f(model.theta(np.mod(x, 1.0)), v)


@dataclass
class Certificate:
    kind: str
    region: CheckRegion
    n_samples: int
    n_active: int
    max_violation: float
    tol_disc: float
    flipped: bool = False

    @property
    def passed(self) -> bool:
        return self.n_active > 0 and self.max_violation <= self.tol_disc

    def text(self) -> str:
        r = self.region
        return (
            f"kind = {self.kind}{' (sign-flip control)' if self.flipped else ''}\n"
            f"region = t in [{r.t0:.9g}, {r.t1:.9g}], |x| in [{r.r0:.9g}, {r.r1:.9g}]\n"
            f"samples = {self.n_samples}\n"
            f"active = {self.n_active}\n"
            f"max_violation = {self.max_violation:.9g}\n"
            f"tol_disc = {self.tol_disc:.9g}\n"
            f"result = {'PASS' if self.passed else 'FAIL'}\n"
        )


def check_parabolic_inequality(field: BarrierField, model: ReactionModel, region: CheckRegion,
                               orientation: int | None = None, dx: float | None = None, dt: float = 1e-3,
                               tol_disc: float = 0.0, buffer_cells: float = 2.0) -> Certificate:
    """Max of orientation * Lv over the samples where the unclamped branch is active.

    orientation is +1 for a subsolution (Lv <= 0 wanted) and -1 for a
    supersolution. Samples whose buffer neighbourhood straddles the clamp
    raise RegionTouchesClamp.
    """
    if orientation is None:
        orientation = 1 if field.kind == "sub" else -1
    dx = field.family.grid.h if dx is None else dx
    t, x = region.points()
    field._check_t(np.array([region.t0 - dt, region.t1 + dt]))
    raw = field.raw(t, x)
    on = field.active(raw)
    near = on.copy()
    far = on.copy()
    b = buffer_cells * dx
    probes = [(t + dt, x), (t - dt, x)]
    for i in range(x.shape[1]):
        ei = np.zeros(x.shape[1])
        ei[i] = b
        probes += [(t, x + ei), (t, x - ei)]
    for tp, xp in probes:
        a = field.active(field.raw(tp, xp))
        near |= a
        far &= a
    if np.any(near & ~far):
        raise RegionTouchesClamp(
            f"{int((near & ~far).sum())} samples lie within {buffer_cells:g} cells of the clamp locus"
        )
    n_act = int(on.sum())
    viol = -np.inf
    if n_act:
        Lv = parabolic_operator(field.raw, model, t[on], x[on], dx, dt, v0=raw[on])
        viol = float((orientation * Lv).max())
    return Certificate(field.kind, region, t.size, n_act, viol, tol_disc, field.flip)


# exponential tail barrier

@dataclass(frozen=True)
class ExpTailBarrier:
    """omega = sigma exp(-mu1 (x.e - c t - A1)) with mu1 = sqrt(gamma)."""

    sigma: float
    gamma: float
    c: float
    e: tuple
    A1: float = 0.0

    @property
    def mu1(self) -> float:
        return float(np.sqrt(self.gamma))

    def __call__(self, t, x):
        s = np.asarray(x, dtype=float) @ np.asarray(self.e, dtype=float)
        return self.sigma * np.exp(-self.mu1 * (s - self.c * np.asarray(t, dtype=float) - self.A1))

    def closed_form(self, t, x):
        """omega_t - Lap omega + gamma omega = mu1 c omega."""
        return self.mu1 * self.c * self(t, x)

    def fd_functional(self, t, x, dx: float, dt: float):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        w = self(t, x)
        wt = (self(t + dt, x) - self(t - dt, x)) / (2.0 * dt)
        lap = np.zeros_like(w)
        for i in range(x.shape[-1]):
            ei = np.zeros(x.shape[-1])
            ei[i] = dx
            lap += (self(t, x + ei) - 2.0 * w + self(t, x - ei)) / dx ** 2
        return wt - lap + self.gamma * w


def exp_tail_check(barrier: ExpTailBarrier, dx: float, dt: float = 1e-3, n: int = 400, seed: int = 0):
    """Max |FD functional - closed form| on points where the exponent lies in [0, 20]."""
    rng = np.random.default_rng(seed)
    e = np.asarray(barrier.e, dtype=float)
    perp = np.array([-e[1], e[0]]) if e.size == 2 else np.zeros_like(e)
    t = rng.uniform(0.0, 10.0, n)
    s = barrier.c * t + barrier.A1 + rng.uniform(0.0, 20.0, n)
    x = s[:, None] * e[None, :] + rng.uniform(-5, 5, n)[:, None] * perp[None, :]
    fd = barrier.fd_functional(t, x, dx, dt)
    exact = barrier.closed_form(t, x)
    return float(np.abs(fd - exact).max()), float(exact.min())


def calibrate_tolerance(model: ReactionModel, c: float, dx: float, dt: float = 1e-3, safety: float = 10.0,
                        floor: float = 1e-10) -> tuple[float, float]:
    """K_tol from the exp-tail case, and tol_disc = K_tol (dx^2 + dt).

    The floor keeps the tolerance above the round-off of second differences.
    """
    bar = ExpTailBarrier(model.sigma, model.gamma, c, (1.0, 0.0) if model.dim == 2 else (1.0,))
    err, _ = exp_tail_check(bar, dx, dt)
    scale = dx * dx + dt
    K = max(safety * err, floor) / scale
    return K, K * scale


def default_bands(field: BarrierField, t0: float, t1: float, n_r: int = 40, n_phi: int = 16, n_t: int = 5):
    """Regions covering the glue, front and tail zones, stopping short of the clamp.

    The bands depend only on the BarrierSpec and the family, so a sign-flipped
    field is checked on exactly the same samples.
    """
    sp = field.spec
    dx = field.family.grid.h
    pad = field.speed * (t1 - t0) + 2.0 * dx
    zc = _clamp_abscissa(field)
    if field.kind == "sub":
        tail_hi = zc - 3.0 * dx
        bands = [("glue", -sp.xi_eps - sp.C, -sp.C), ("front", -sp.C, sp.C),
                 ("tail", min(sp.C, tail_hi - pad), tail_hi)]
    else:
        tail_lo = zc + 3.0 * dx
        bands = [("glue", sp.C, sp.C + sp.xi_eps), ("front", -sp.C, sp.C),
                 ("tail", tail_lo, max(-sp.C, tail_lo + pad))]
    out = []
    # plateau near the origin where the glue is off and the barrier is constant
    r_core = (sp.C_eps, sp.C_eps + 60.0) if field.kind == "sub" else (1.0, 60.0)
    out.append(("core", CheckRegion(t0, t1, *r_core, n_t=n_t, n_r=n_r, n_phi=n_phi)))
    for name, a, b in bands:
        if b - a <= pad:
            mid = 0.5 * (a + b)
            a, b = mid - pad, mid + pad
        out.append((name, band_region(field, a, b, t0, t1, n_r=n_r, n_phi=n_phi, n_t=n_t)))
    return out


def _clamp_abscissa(field: BarrierField) -> float:
    """Innermost abscissa of the clamp locus over the family, from the grid profiles."""
    fam = field.family
    g = fam.grid
    d = field.spec.delta_eps
    if field.kind == "sub":
        # U - delta_eps = 0 happens first (smallest xi) where U drops below delta_eps
        z = np.inf
        for U in fam._profiles:
            col = U.reshape(g.n_xi, -1)
            idx = np.nonzero((col <= d).any(axis=1))[0]
            z = min(z, g.xi[idx[0]])
        return float(z)
    z = -np.inf
    for U in fam._profiles:
        col = U.reshape(g.n_xi, -1)
        idx = np.nonzero((col >= 1.0 - d).any(axis=1))[0]
        z = max(z, g.xi[idx[-1]])
    return float(z)


def certify(field: BarrierField, model: ReactionModel, t_window=None, tol_disc: float = 0.0, dt: float = 1e-3, **kw):
    """Run the inequality check on every default band; returns a list of (name, Certificate).

    The default window is [T + 2 dt, T + 20].
    """
    if t_window is None:
        t_window = (field.spec.T + 2 * dt, field.spec.T + 20.0)
    t0, t1 = t_window
    return [(name, check_parabolic_inequality(field, model, reg, dt=dt, tol_disc=tol_disc))
            for name, reg in default_bands(field, t0, t1, **kw)]
