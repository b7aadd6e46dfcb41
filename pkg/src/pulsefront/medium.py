"""Spatially periodic bistable reaction terms.

The reaction is the cubic ``f(x, u) = u (1 - u) (u - theta(x))`` where
``theta`` is a finite trigonometric sum on the unit torus.  Outside
``[-u0, 1 + u0]`` the cubic is continued linearly in ``u`` (slope ``f_u(x, 0)``
below, ``f_u(x, 1)`` above) through a C^1 Hermite blend of width 0.05.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import InvalidMedium

U0 = 0.1
BLEND = 0.05
THETA_MARGIN = 0.05
SIGMA_FRACTION = 0.45


@dataclass(frozen=True)
class Mode:
    k: tuple[int, ...]
    amp: float
    phase: float = 0.0


@dataclass(frozen=True)
class ReactionModel:
    """Immutable periodic cubic medium with its stability constants."""

    dim: int
    theta0: float
    modes: tuple[Mode, ...]
    gamma: float
    sigma: float
    lipschitz_L: float
    theta_min: float
    theta_max: float
    u0: float = U0
    blend: float = BLEND
    _hash: str = field(default="", repr=False, compare=False)

    @property
    def homogeneous(self) -> bool:
        return all(m.amp == 0.0 for m in self.modes)

    @property
    def model_hash(self) -> str:
        return self._hash

    def theta(self, x) -> np.ndarray:
        """theta at points ``x``: shape (..., dim), or any shape when dim == 1."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            x = x[..., None]
        out = np.full(x.shape[:-1], self.theta0)
        for m in self.modes:
            arg = 2.0 * np.pi * (x @ np.asarray(m.k, dtype=float)) + m.phase
            out = out + m.amp * np.cos(arg)
        return out

    def f(self, theta, u):
        return kernels.cubic_reaction(theta, u, self.u0, self.blend)[0]

    def f_and_fu(self, theta, u):
        return kernels.cubic_reaction(theta, u, self.u0, self.blend)

    def fuu(self, theta, u):
        return kernels.cubic_reaction_fuu(theta, u, self.u0, self.blend)

    def as_config(self) -> dict:
        return {
            "dim": self.dim,
            "theta0": self.theta0,
            "modes": [[*m.k, m.amp, m.phase] for m in self.modes],
        }


def _sample_grid(dim: int, n: int) -> np.ndarray:
    pts = np.arange(n) / n
    if dim == 1:
        return pts
    g = np.meshgrid(*([pts] * dim), indexing="ij")
    return np.stack(g, axis=-1).reshape(-1, dim)


def _neg_fu(theta, u):
    return 3.0 * u * u - 2.0 * (1.0 + theta) * u + theta


def _strip_min(sigma: float, theta_min: float, theta_max: float) -> float:
    # -f_u is convex in u; on u < 1/2 it grows with theta, on u > 1/2 it shrinks
    lo = np.clip((1.0 + theta_min) / 3.0, 0.0, sigma)
    hi = np.clip((1.0 + theta_max) / 3.0, 1.0 - sigma, 1.0)
    return float(min(_neg_fu(theta_min, lo), _neg_fu(theta_max, hi)))


def stability_constants(theta_min: float, theta_max: float) -> tuple[float, float]:
    """Return ``(sigma, gamma)`` for the cubic on the given theta range.

    sigma is ``0.45 * theta_min`` when -f_u stays positive on both strips;
    otherwise it is 0.9 times the largest admissible value found by bisection.
    gamma is half the minimum of -f_u over the strips.
    """
    cap = SIGMA_FRACTION * theta_min
    if _strip_min(cap, theta_min, theta_max) > 0:
        sigma = cap
    else:
        a, b = 0.0, cap
        for _ in range(200):
            mid = 0.5 * (a + b)
            if _strip_min(mid, theta_min, theta_max) > 0:
                a = mid
            else:
                b = mid
        sigma = 0.9 * a
    if not 0.0 < sigma < 0.5:
        raise InvalidMedium(f"stability margin sigma={sigma:g} must lie in (0, 1/2)")
    gamma = 0.5 * _strip_min(sigma, theta_min, theta_max)
    return sigma, gamma


def make_cubic_medium(
    theta0: float,
    modes: Iterable[Sequence[float] | Mode] = (),
    dim: int | None = None,
) -> ReactionModel:
    """Build a cubic medium from a base level and ``(k, amp, phase)`` modes.

    A mode may be given as ``Mode``, as ``(k, amp, phase)`` with ``k`` a tuple,
    or as a flat list ``[k_1, ..., k_N, amp, phase]``.
    """
    parsed: list[Mode] = []
    for m in modes:
        if isinstance(m, Mode):
            parsed.append(m)
            continue
        m = list(m)
        if len(m) in (2, 3) and isinstance(m[0], (tuple, list)):
            k = tuple(int(v) for v in m[0])
            parsed.append(Mode(k, float(m[1]), float(m[2]) if len(m) == 3 else 0.0))
        else:
            if len(m) < 3:
                raise InvalidMedium(f"mode {m!r} needs wave-vector, amplitude and phase")
            parsed.append(Mode(tuple(int(v) for v in m[:-2]), float(m[-2]), float(m[-1])))
    dims = {len(m.k) for m in parsed}
    if dim is None:
        dim = dims.pop() if len(dims) == 1 else 1
    if dims - {dim}:
        raise InvalidMedium(f"wave-vectors must all have length dim={dim}")
    if dim not in (1, 2):
        raise InvalidMedium(f"dim must be 1 or 2, got {dim}")
    if not 0.0 < theta0 < 1.0:
        raise InvalidMedium(f"theta0={theta0} must lie in (0, 1)")

    probe = ReactionModel(dim, float(theta0), tuple(parsed), 0.0, 0.0, 0.0, 0.0, 0.0)
    th = probe.theta(_sample_grid(dim, 256 if dim == 1 else 128))
    tmin, tmax = float(th.min()), float(th.max())
    if tmin <= THETA_MARGIN or tmax >= 1.0 - THETA_MARGIN:
        raise InvalidMedium(
            f"theta_x ranges over [{tmin:.4f}, {tmax:.4f}], outside "
            f"({THETA_MARGIN}, {1 - THETA_MARGIN})"
        )
    sigma, gamma = stability_constants(tmin, tmax)

    u = np.linspace(0.0, 1.0, 2001)
    lip = 0.0
    for t in (tmin, tmax):
        lip = max(lip, float(np.abs(_neg_fu(t, u)).max()))

    ident = json.dumps(
        {"dim": dim, "theta0": float(theta0), "modes": [[*m.k, m.amp, m.phase] for m in parsed]},
        sort_keys=True,
    )
    digest = hashlib.sha256(ident.encode()).hexdigest()[:16]
    return ReactionModel(dim, float(theta0), tuple(parsed), gamma, sigma, lip, tmin, tmax, _hash=digest)


def eval_f(model: ReactionModel, x, u):
    return model.f(model.theta(np.mod(x, 1.0)), u)


def eval_fu(model: ReactionModel, x, u):
    return model.f_and_fu(model.theta(np.mod(x, 1.0)), u)[1]


def eval_fuu(model: ReactionModel, x, u):
    return model.fuu(model.theta(np.mod(x, 1.0)), u)


def mass_integral(model: ReactionModel, n_u: int = 32, n_x: int = 128) -> float:
    """Integral of f over the unit cell times [0, 1].

    Gauss-Legendre in u, periodic trapezoid in x (exact for the trigonometric
    theta fields used here).
    """
    nodes, weights = np.polynomial.legendre.leggauss(n_u)
    u = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    th = model.theta(_sample_grid(model.dim, n_x))
    vals = model.f(th[:, None], u[None, :])
    return float(vals.mean(axis=0) @ w)
