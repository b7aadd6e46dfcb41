"""Run configuration: a line-oriented ``[section]`` / ``key = value`` grammar.

Values are read as JSON when they parse as JSON (numbers, true/false,
lists), otherwise kept as bare strings. ``#`` starts a comment. Section
names may carry a suffix after a dot, e.g. ``[spread.small]``, which
names one Cauchy experiment.

Example::

    [medium]
    dim = 2
    theta0 = 0.3
    modes = [[1, 0, 0.08, 0.0], [0, 1, 0.05, 0.0]]

    [sweep]
    n_angles = 32
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .errors import ConfigError, InvalidMedium
from .medium import ReactionModel, make_cubic_medium


@dataclass
class CylinderCfg:
    L: float = 40.0
    n_xi: int = 2048
    n_y: int | None = None


@dataclass
class SolverCfg:
    tol: float = 1e-10
    max_iter: int = 50
    gmres_rtol: float = 1e-8


@dataclass
class FrontCfg:
    angle: float = 0.0
    direction: int = 1          # N = 1 only: +1 or -1
    profile_y: list = field(default_factory=lambda: [0])


@dataclass
class SweepCfg:
    n_angles: int = 32


@dataclass
class DerivativeCfg:
    rtol: float = 1e-10


@dataclass
class SpreadCfg:
    name: str = "bubble"
    R: float = 12.0
    beta: float | None = None
    alpha: float | None = None
    W: float = 40.0
    n: int = 512
    dt: float = 0.05
    tmax: float = 60.0
    record_every: float = 1.0
    rays: int = 64
    window: list = field(default_factory=lambda: [30.0, 60.0])
    verdict: bool = False
    tol: float = 0.02


@dataclass
class VerifyCfg:
    kinds: list = field(default_factory=lambda: ["sub", "super", "tail"])
    eps_sub: float | None = None        # default: half the slowest speed
    eps_super: float = 0.05
    span: float = 20.0
    n_t: int = 5
    n_r: int = 40
    n_phi: int = 16


@dataclass
class OutputCfg:
    dir: str = "pulsefront_out"


@dataclass
class RunConfig:
    medium: dict
    cylinder: CylinderCfg
    solver: SolverCfg
    front: FrontCfg | None = None
    sweep: SweepCfg | None = None
    derivative: DerivativeCfg | None = None
    spread: list = field(default_factory=list)
    verify: VerifyCfg | None = None
    output: OutputCfg = field(default_factory=OutputCfg)

    @property
    def dim(self) -> int:
        return int(self.medium["dim"])

    def model(self) -> ReactionModel:
        m = self.medium
        return make_cubic_medium(m["theta0"], m.get("modes", []), dim=m["dim"])

    def as_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the resolved configuration, output location excluded."""
        d = self.as_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @property
    def stages(self) -> list[str]:
        out = ["medium"]
        if self.front:
            out.append("front")
        if self.sweep:
            out.append("sweep")
        if self.derivative:
            out.append("derivative")
        if self.spread:
            out.append("spread")
        if self.verify:
            out.append("verify")
        return out


_SECTIONS = {
    "medium": None,
    "cylinder": CylinderCfg,
    "solver": SolverCfg,
    "front": FrontCfg,
    "sweep": SweepCfg,
    "derivative": DerivativeCfg,
    "spread": SpreadCfg,
    "verify": VerifyCfg,
    "output": OutputCfg,
}
_MEDIUM_KEYS = {"dim", "theta0", "modes"}


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if "," in text:
            return [s.strip() for s in text.split(",") if s.strip()]
        return text


def _tokenize(text: str):
    """Yield (section, key, value, line) and collect syntax errors."""
    errors: list[str] = []
    section = None
    seen: dict[tuple, int] = {}
    entries: dict[str, dict] = {}
    order: list[str] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                errors.append(f"line {no}: malformed section header {raw.strip()!r}")
                continue
            section = line[1:-1].strip()
            base = section.split(".", 1)[0]
            if base not in _SECTIONS:
                errors.append(f"line {no}: unknown section [{section}]")
            if section in entries:
                errors.append(f"line {no}: section [{section}] repeated")
            else:
                entries[section] = {}
                order.append(section)
            continue
        if "=" not in line:
            errors.append(f"line {no}: expected 'key = value', got {raw.strip()!r}")
            continue
        if section is None:
            errors.append(f"line {no}: key outside any section")
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            errors.append(f"line {no}: empty key")
            continue
        if (section, key) in seen:
            errors.append(f"line {no}: duplicate key '{key}' in [{section}] (first set on line {seen[section, key]})")
            continue
        seen[section, key] = no
        entries.setdefault(section, {})[key] = (_value(val), no)
    return entries, order, errors


def _fill(cls, items: dict, section: str, errors: list[str]):
    obj = cls()
    names = set(cls.__dataclass_fields__)
    for key, (val, no) in items.items():
        if key not in names:
            errors.append(f"line {no}: unknown key '{key}' in [{section}]")
            continue
        default = getattr(obj, key)
        if isinstance(default, bool):
            if not isinstance(val, bool):
                errors.append(f"line {no}: '{key}' must be true or false")
                continue
        elif isinstance(default, int) and not isinstance(default, bool):
            if not isinstance(val, int) or isinstance(val, bool):
                errors.append(f"line {no}: '{key}' must be an integer")
                continue
        elif isinstance(default, float) or key in ("beta", "alpha", "eps_sub", "n_y"):
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                errors.append(f"line {no}: '{key}' must be a number")
                continue
            if key == "n_y" and not isinstance(val, int):
                errors.append(f"line {no}: 'n_y' must be an integer")
                continue
            if key != "n_y":
                val = float(val)
        elif isinstance(default, list) and not isinstance(val, list):
            val = [val]
        setattr(obj, key, val)
    return obj


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError with every located problem."""
    entries, order, errors = _tokenize(text)
    med_items = entries.get("medium")
    medium: dict = {}
    if med_items is None:
        errors.append("missing [medium] section")
    else:
        for key, (val, no) in med_items.items():
            if key not in _MEDIUM_KEYS:
                errors.append(f"line {no}: unknown key '{key}' in [medium]")
            else:
                medium[key] = val
        if "theta0" not in medium:
            errors.append("[medium]: theta0 is required")
        medium.setdefault("dim", 1)
        medium.setdefault("modes", [])
    cfg = RunConfig(medium, CylinderCfg(), SolverCfg())
    for sec in order:
        base = sec.split(".", 1)[0]
        cls = _SECTIONS.get(base)
        if cls is None:
            continue
        obj = _fill(cls, entries[sec], sec, errors)
        if base == "spread":
            if "." in sec:
                obj.name = sec.split(".", 1)[1]
            cfg.spread.append(obj)
        else:
            setattr(cfg, base, obj)
    if errors:
        raise ConfigError(errors)
    _validate(cfg, entries, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def _line(entries, section, key) -> str:
    item = entries.get(section, {}).get(key)
    return f"line {item[1]}: " if item else f"[{section}]: "


def _validate(cfg: RunConfig, entries: dict, errors: list[str]) -> None:
    try:
        model = cfg.model()
    except (InvalidMedium, TypeError, ValueError) as exc:
        errors.append(f"[medium]: {exc}")
        return
    dim = model.dim
    cy = cfg.cylinder
    if cy.n_y is None:
        cy.n_y = 16 if dim == 2 else 1
    h = 2.0 * cy.L / (cy.n_xi - 1)
    if h > 0.25:
        errors.append(f"[cylinder]: spacing 2L/(n_xi-1) = {h:.4g} exceeds 0.25")
    if dim == 2 and cy.n_y < 16:
        errors.append(f"{_line(entries, 'cylinder', 'n_y')}n_y must be at least 16 for N = 2")
    if cfg.front and dim == 1 and cfg.front.direction not in (1, -1):
        errors.append(f"{_line(entries, 'front', 'direction')}direction must be 1 or -1")
    if cfg.sweep and dim != 2:
        errors.append("[sweep]: direction sweeps need dim = 2")
    if cfg.sweep and cfg.sweep.n_angles < 4:
        errors.append(f"{_line(entries, 'sweep', 'n_angles')}n_angles must be at least 4")
    if cfg.derivative and not cfg.sweep:
        errors.append("[derivative]: needs a [sweep] section")
    if cfg.verify:
        if not cfg.sweep:
            errors.append("[verify]: barrier certificates need a [sweep] section")
        elif cfg.sweep.n_angles < 32:
            errors.append("[verify]: barrier certificates need n_angles >= 32")
        bad = set(cfg.verify.kinds) - {"sub", "super", "tail"}
        if bad:
            errors.append(f"{_line(entries, 'verify', 'kinds')}unknown certificate kinds {sorted(bad)}")
    names = set()
    for sp in cfg.spread:
        sec = f"spread.{sp.name}" if f"spread.{sp.name}" in entries else "spread"
        if sp.name in names:
            errors.append(f"[{sec}]: experiment name '{sp.name}' used twice")
        names.add(sp.name)
        if dim != 2 and sp.verdict:
            errors.append(f"[{sec}]: speed verdicts need dim = 2")
        if sp.verdict and not cfg.sweep:
            errors.append(f"{_line(entries, sec, 'verdict')}speed verdict needs a [sweep] section")
        if (sp.alpha is None) == (sp.beta is None):
            errors.append(f"[{sec}]: give exactly one of alpha or beta")
        if sp.alpha is not None and not 0.0 < sp.alpha < model.theta_min:
            errors.append(
                f"{_line(entries, sec, 'alpha')}alpha={sp.alpha:g} violates 0 < α < inf θ_x = {model.theta_min:.4g}"
            )
        if sp.beta is not None and not model.theta_max < sp.beta < 1.0:
            errors.append(
                f"{_line(entries, sec, 'beta')}beta={sp.beta:g} violates sup θ_x = {model.theta_max:.4g} < β < 1"
            )
        if sp.R > sp.W / 2:
            errors.append(f"{_line(entries, sec, 'R')}R={sp.R:g} exceeds W/2 = {sp.W / 2:g}")
        if len(sp.window) != 2 or not sp.window[0] < sp.window[1] <= sp.tmax:
            errors.append(f"{_line(entries, sec, 'window')}window must be [t1, t2] with t1 < t2 <= tmax")


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
