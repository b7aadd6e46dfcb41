"""Pulsating fronts: Newton solves, normalization, sweeps and per-front identities."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.signal import resample

from .cylinder import (
    CylinderGrid,
    Linearization,
    ProfileField,
    _check,
    bordered_solve,
    cylinder_quadrature,
    d0,
    front_residual,
    theta_on_grid,
    write_pfr,
    y_operators,
)
from .errors import (
    AdjointDegenerate,
    NearStationaryWarning,
    NonConvergence,
    NonMonotoneProfile,
    TargetUnreachable,
    WindowTooShort,
)
from .medium import ReactionModel, mass_integral

log = logging.getLogger(__name__)

SQ2 = np.sqrt(2.0)
NEWTON_TOL = 1e-10
MAX_NEWTON = 50
MIN_STEP = 2.0 ** -20


@dataclass(frozen=True)
class PulsatingFront:
    e: np.ndarray
    c: float
    profile: ProfileField
    model_hash: str
    residual_norm: float
    newton_iters: int = 0
    tau: float = 0.0

    @property
    def grid(self) -> CylinderGrid:
        return self.profile.grid

    @property
    def U(self) -> np.ndarray:
        return self.profile.values

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.U, axis=0) < 0.0))

    def save(self, path, config_hash: str | None = None) -> None:
        write_pfr(path, self.grid, self.c, self.e, self.U, config_hash)


def unit(angle: float) -> np.ndarray:
    return np.array([np.cos(angle), np.sin(angle)])


def logistic_guess(grid: CylinderGrid) -> np.ndarray:
    xi = grid.xi.reshape((-1,) + (1,) * grid.dim)
    U = 1.0 / (1.0 + np.exp(xi / SQ2))
    return np.array(np.broadcast_to(U, grid.shape))


def resample_profile(values: np.ndarray, src: CylinderGrid, dst: CylinderGrid, shift: float = 0.0) -> np.ndarray:
    """Evaluate ``U(xi + shift, y)`` on ``dst``: cubic spline in xi, Fourier in y.

    Points beyond the source cylinder take the limit values 1 and 0.
    """
    if src.dim != dst.dim:
        raise ValueError("grids of different dimension")
    V = np.asarray(values, dtype=float).reshape(src.shape)
    if src.n_y != dst.n_y:
        for ax in range(1, src.dim + 1):
            V = np.repeat(V, dst.n_y, axis=ax) if src.n_y == 1 else resample(V, dst.n_y, axis=ax)
    x = dst.xi + shift
    if src == dst.with_resolution(n_y=src.n_y) and shift == 0.0:
        out = V.copy()
    else:
        out = CubicSpline(src.xi, V, axis=0)(np.clip(x, src.xi[0], src.xi[-1]))
        lo, hi = x < src.xi[0], x > src.xi[-1]
        if lo.any():
            out[lo] = 1.0 - _exp_tail(1.0 - V[1], 1.0 - V[2], src.xi[1] - x[lo], src.h)
        if hi.any():
            out[hi] = _exp_tail(V[-2], V[-3], x[hi] - src.xi[-2], src.h)
    out[0] = 1.0
    out[-1] = 0.0
    return out


def _exp_tail(a, b, dist, h):
    """Continue a tail that is ``a`` at the last interior node and ``b`` one node in."""
    a = np.maximum(a, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where((a > 0) & (b > a), np.log(b / a) / h, 1.0)
    d = np.asarray(dist).reshape((-1,) + (1,) * (a.ndim))
    return a * np.exp(-rate * d)


def _phase_vector(grid: CylinderGrid, Uref: np.ndarray) -> np.ndarray:
    M = int(np.prod(grid.y_shape))
    return (d0(grid, Uref) * (grid.h / M)).ravel()


def solve_front(
    model: ReactionModel,
    e,
    grid: CylinderGrid,
    init=None,
    c0: float | None = None,
    tol: float = NEWTON_TOL,
    max_iter: int = MAX_NEWTON,
    check_monotone: bool = True,
    gmres_rtol: float = 1e-8,
) -> PulsatingFront:
    """Damped Newton on the residual bordered by an integral phase condition.

    ``init`` may be a PulsatingFront, a ProfileField or an array on ``grid``;
    by default the logistic profile with c0 = (1 - 2 mean(theta)) / sqrt(2).
    """
    e = _check(grid, model, e)
    mass = mass_integral(model)
    if abs(mass) < 1e-4:
        warnings.warn(
            f"mass integral {mass:.3g} is nearly zero; a moving front may not exist",
            NearStationaryWarning,
            stacklevel=2,
        )
    if isinstance(init, PulsatingFront):
        c = init.c if c0 is None else c0
        U = resample_profile(init.U, init.grid, grid)
    elif isinstance(init, ProfileField):
        U = resample_profile(init.values, init.grid, grid)
        c = c0
    elif init is not None:
        U = np.array(init, dtype=float).reshape(grid.shape)
        c = c0
    else:
        U = logistic_guess(grid)
        c = c0
    if c is None:
        c = (1.0 - 2.0 * float(theta_on_grid(grid, model).mean())) / SQ2

    Uref = U.copy()
    p = _phase_vector(grid, Uref)

    def evaluate(U, c):
        R = front_residual(grid, model, e, c, U)
        ph = float(p @ (U - Uref).ravel())
        return R, ph, max(float(np.abs(R).max()), abs(ph))

    R, ph, norm = evaluate(U, c)
    it = 0
    polished = False  # one extra step after convergence cleans the far tails
    while not (norm <= tol and polished):
        converged = norm <= tol
        if it >= max_iter:
            raise NonConvergence(f"no convergence after {it} Newton steps (residual {norm:.3e})", norm, _angle(e))
        lin = Linearization(grid, model, e, c, U)
        dU, dc, _ = bordered_solve(lin, p, -R.ravel(), -ph, rtol=gmres_rtol)
        dU = dU.reshape(grid.shape)
        it += 1
        lam = 1.0
        while True:
            Rn, phn, nn = evaluate(U + lam * dU, c + lam * dc)
            if nn < norm or (converged and nn <= tol):
                U, c, R, ph, norm = U + lam * dU, c + lam * dc, Rn, phn, nn
                break
            if converged:
                break
            lam *= 0.5
            if lam < MIN_STEP:
                raise NonConvergence(f"line search stalled at residual {norm:.3e}", norm, _angle(e))
        polished = converged
        log.debug("newton %d: residual %.3e step %.3g c=%.10f", it, norm, lam, c)

    front = PulsatingFront(e, float(c), ProfileField(grid, U), model.model_hash, norm, it)
    if check_monotone and not front.is_monotone():
        bad = int(np.sum(np.diff(U, axis=0) >= 0.0))
        raise NonMonotoneProfile(f"converged profile is not decreasing in xi at {bad} points")
    return front


def _angle(e) -> float | None:
    e = np.atleast_1d(e)
    return float(np.arctan2(e[1], e[0])) if e.size == 2 else None


def normalization_integral(grid: CylinderGrid, U: np.ndarray, a: float = 0.0) -> float:
    return cylinder_quadrature(grid, np.asarray(U) ** 2, a)


def shift_to_normalization(front: PulsatingFront, target: float = 1.0, tol: float = 1e-12) -> PulsatingFront:
    """Translate the profile so that the integral of U^2 over xi > 0 equals ``target``.

    The shift tau is located on the truncated grid, then refined on the
    resampled profile itself so the returned field meets the target to
    quadrature round-off.
    """
    g = front.grid
    U = front.U
    # I(tau) = integral of U^2 over xi > tau, decreasing in tau
    if normalization_integral(g, U, g.xi[0]) < target:
        raise TargetUnreachable(
            f"integral of U^2 over the whole cylinder is below {target}; increase L"
        )
    tau0 = brentq(lambda t: normalization_integral(g, U, t) - target, g.xi[0], g.xi[-1], xtol=1e-13)

    def mismatch(t):
        return normalization_integral(g, resample_profile(U, g, g, t)) - target

    a, b = tau0 - 2 * g.h, tau0 + 2 * g.h
    fa, fb = mismatch(a), mismatch(b)
    if fa * fb > 0:
        tau = tau0
    else:
        tau = brentq(mismatch, a, b, xtol=tol)
    V = resample_profile(U, g, g, tau)
    return replace(front, profile=ProfileField(g, V), tau=front.tau + tau)


def d_xi4(grid: CylinderGrid, U: np.ndarray) -> np.ndarray:
    """Fourth-order central xi-derivative; second order next to the ends."""
    h = grid.h
    D = d0(grid, U)
    D[2:-2] = (U[:-4] - 8.0 * U[1:-3] + 8.0 * U[3:-1] - U[4:]) / (12.0 * h)
    return D


def speed_identity_sides(front: PulsatingFront, model: ReactionModel) -> tuple[float, float]:
    D = d_xi4(front.grid, front.U)
    return front.c * cylinder_quadrature(front.grid, D * D), mass_integral(model)


def speed_identity_residual(front: PulsatingFront, model: ReactionModel) -> float:
    """|c int |dU/dxi|^2 - int f| relative to the mass integral (floored at 1e-12)."""
    lhs, rhs = speed_identity_sides(front, model)
    return abs(lhs - rhs) / max(abs(rhs), 1e-12)


@dataclass(frozen=True)
class DecayFit:
    mu_plus: float
    mu_minus: float
    window_plus: tuple[float, float]
    window_minus: tuple[float, float]
    r2_plus: float
    r2_minus: float

    def satisfies_bound(self, gamma: float, slack: float = 0.02) -> bool:
        b = np.sqrt(gamma) - slack
        return self.mu_plus >= b and self.mu_minus >= b


def _fit_tail(xi, g, lo, hi, side):
    mask = (g >= lo) & (g <= hi) & (xi > 0 if side > 0 else xi < 0)
    n = int(mask.sum())
    if n < 20:
        raise WindowTooShort(f"only {n} nodes with tail in [{lo:g}, {hi:g}] on the {'+' if side > 0 else '-'} side")
    x, y = xi[mask], np.log(g[mask])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ np.array([slope, icpt])
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss if ss > 0 else 1.0
    return -side * float(slope), (float(x.min()), float(x.max())), r2


def fit_decay(front: PulsatingFront, model: ReactionModel | None = None, lo: float = 1e-8, hi: float = 1e-3) -> DecayFit:
    """Exponential rates of U ahead (xi -> +inf) and of 1 - U behind."""
    g = front.grid
    V = front.U.reshape(g.n_xi, -1)
    xi = g.xi
    mp, wp, rp = _fit_tail(xi, V.max(axis=1), lo, hi, +1)
    mm, wm, rm = _fit_tail(xi, (1.0 - V).max(axis=1), lo, hi, -1)
    fit = DecayFit(mp, mm, wp, wm, rp, rm)
    if model is not None and not fit.satisfies_bound(model.gamma):
        log.warning("decay rates %.4f/%.4f below sqrt(gamma)-0.02=%.4f", mp, mm, np.sqrt(model.gamma) - 0.02)
    return fit


@dataclass
class SweepEntry:
    angle: float
    front: PulsatingFront
    identity_residual: float
    decay: DecayFit | None

    @property
    def c(self) -> float:
        return self.front.c


@dataclass
class SpeedSweep:
    entries: list[SweepEntry]
    medium_hash: str
    grid: CylinderGrid
    extra_solves: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def angles(self) -> np.ndarray:
        return np.array([en.angle for en in self.entries])

    @property
    def speeds(self) -> np.ndarray:
        return np.array([en.c for en in self.entries])

    @property
    def fronts(self) -> list[PulsatingFront]:
        return [en.front for en in self.entries]

    def __len__(self):
        return len(self.entries)

    def max_adjacent_dc(self) -> float:
        c = self.speeds
        return float(np.abs(np.diff(np.append(c, c[0]))).max())

    def max_adjacent_profile_distance(self) -> float:
        F = [en.front.U for en in self.entries]
        F.append(F[0])
        return float(max(np.abs(a - b).max() for a, b in zip(F[:-1], F[1:])))

    def fd_derivative(self, j: int) -> float:
        """Central difference of c in the angle, on the periodic sweep."""
        n = len(self)
        d = 2.0 * np.pi / n
        c = self.speeds
        return float((c[(j + 1) % n] - c[(j - 1) % n]) / (2.0 * d))

    def subsample(self, stride: int) -> "SpeedSweep":
        return SpeedSweep(self.entries[::stride], self.medium_hash, self.grid, 0, dict(self.meta))

    def rows(self):
        for en in self.entries:
            d = en.decay
            yield (
                en.angle,
                en.c,
                en.front.residual_norm,
                en.identity_residual,
                d.mu_plus if d else float("nan"),
                d.mu_minus if d else float("nan"),
                en.front.newton_iters,
            )

    def write_csv(self, path, config_hash: str | None = None) -> None:
        with open(path, "w") as fh:
            if config_hash:
                fh.write(f"# config_hash={config_hash}\n")
            fh.write("angle,c,residual,identity_residual,mu_plus,mu_minus,newton_iters\n")
            for r in self.rows():
                fh.write(",".join("%.9g" % v for v in r[:6]) + ",%d\n" % r[6])


def _diagnose(front, model):
    try:
        dec = fit_decay(front, model)
    except WindowTooShort as exc:
        log.warning("decay fit skipped: %s", exc)
        dec = None
    return dec


def sweep_directions(
    model: ReactionModel,
    grid: CylinderGrid,
    n_angles: int,
    init: PulsatingFront | None = None,
    max_bisect: int = 4,
    progress=None,
    **solve_kw,
) -> SpeedSweep:
    """Continuation in the angle of e over phi_j = 2 pi j / n_angles.

    Each solve starts from the previous normalized front. On failure the
    interval is bisected (up to ``max_bisect`` levels) and the midpoint is
    solved first.
    """
    if grid.dim != 2:
        raise ValueError("direction sweeps need N = 2")
    angles = 2.0 * np.pi * np.arange(n_angles) / n_angles
    entries: list[SweepEntry] = []
    prev = init
    extra = 0

    def reach(prev, a0, a1, depth):
        nonlocal extra
        try:
            return shift_to_normalization(solve_front(model, unit(a1), grid, init=prev, **solve_kw))
        except NonConvergence as exc:
            if prev is None or depth >= max_bisect:
                exc.angle = a1
                raise
            mid = 0.5 * (a0 + a1)
            log.info("continuation failed at %.6f, inserting %.6f", a1, mid)
            extra += 1
            half = reach(prev, a0, mid, depth + 1)
            return reach(half, mid, a1, depth + 1)

    last = angles[0]
    for j, a in enumerate(angles):
        fr = reach(prev, last, a, 0)
        entries.append(SweepEntry(float(a), fr, speed_identity_residual(fr, model), _diagnose(fr, model)))
        prev, last = fr, a
        if progress:
            progress(j, fr)
    return SpeedSweep(entries, model.model_hash, grid, extra)


def directional_speed_derivative(
    front: PulsatingFront,
    model: ReactionModel,
    h,
    grid: CylinderGrid | None = None,
    sweep: SpeedSweep | None = None,
    index: int | None = None,
    rtol: float = 1e-10,
):
    """First variation of c_e along the tangent vector h, by the adjoint route.

    Solves the transposed bordered system for (psi, s) with right-hand side
    (0, 1), so that psi annihilates the range of the linearization up to the
    phase row and psi . dU/dxi = 1. Then c'(h) = -psi . (2 D0 (h_perp . grad_y U)).
    Returns ``(value, fd)`` where ``fd`` is the sweep central difference at
    ``index`` when a sweep is given, else None.
    """
    grid = grid or front.grid
    if grid.dim != 2:
        raise ValueError("directional derivatives need N = 2")
    e = front.e
    h = np.asarray(h, dtype=float)
    hp = h - (e @ h) * e
    fd = sweep.fd_derivative(index) if sweep is not None and index is not None else None
    if np.linalg.norm(hp) == 0.0:
        return 0.0, fd
    U = front.U
    lin = Linearization(grid, model, e, front.c, U)
    p = _phase_vector(grid, U)
    psi, _, _ = bordered_solve(lin, p, np.zeros(grid.size), 1.0, transpose=True, rtol=rtol)
    b = lin.dc.ravel()
    scale = np.abs(psi).max()
    if scale == 0.0 or abs(psi @ b) / (scale * np.abs(b).sum()) < 1e-10:
        raise AdjointDegenerate("adjoint kernel is orthogonal to dU/dxi")
    ops = y_operators(grid)
    Je = 2.0 * d0(grid, ops.grad_dot(U, hp))
    Je[0] = 0.0
    Je[-1] = 0.0
    val = -float(psi @ Je.ravel()) / float(psi @ b)
    return val, fd
