"""Stage orchestration: medium -> front/sweep -> derivative -> spread -> verify.

A failing stage stops the stages that need its output; independent later
stages still run. Every artifact carries the configuration hash.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import barrier as bv
from .cauchy import BoxGrid, Tracker, estimate_speeds, evolve, init_omegaR, init_vR
from .config import RunConfig
from .cylinder import CylinderGrid, ProfileField, export_profile_csv, read_pfr
from .front import (
    PulsatingFront,
    SpeedSweep,
    SweepEntry,
    directional_speed_derivative,
    fit_decay,
    shift_to_normalization,
    solve_front,
    speed_identity_residual,
    sweep_directions,
    unit,
)
from .medium import mass_integral

log = logging.getLogger(__name__)

DEPENDS = {"derivative": {"sweep"}, "verify": {"sweep"}}


@dataclass
class PipelineResult:
    config_hash: str
    artifacts: list = field(default_factory=list)
    failures: list = field(default_factory=list)     # (stage, message)
    checks: dict = field(default_factory=dict)       # name -> bool

    @property
    def exit_code(self) -> int:
        return 1 if self.failures or not all(self.checks.values()) else 0


def _kv(lines: dict, chash: str) -> str:
    out = [f"config_hash = {chash}"]
    for k, v in lines.items():
        if isinstance(v, float):
            out.append(f"{k} = {v:.9g}")
        else:
            out.append(f"{k} = {v}")
    return "\n".join(out) + "\n"


def load_sweep(directory, model_hash: str = "") -> SpeedSweep:
    """Rebuild a sweep from ``sweep.csv`` and the front files next to it."""
    d = Path(directory)
    with open(d / "sweep.csv") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    rows = rows[1:]
    entries = []
    grid = None
    for j, r in enumerate(rows):
        g, c, e, vals, _ = read_pfr(d / "sweep_fronts" / f"front_{j:03d}.pfr")
        grid = g
        fr = PulsatingFront(np.asarray(e), c, ProfileField(g, vals), model_hash, float(r[2]), int(r[6]))
        entries.append(SweepEntry(float(r[0]), fr, float(r[3]), None))
    if grid is None:
        raise ValueError(f"no sweep entries under {d}")
    return SpeedSweep(entries, model_hash, grid)


class Pipeline:
    def __init__(self, cfg: RunConfig, out_dir=None, threads: int = 1, seed: int | None = None, progress=None):
        self.cfg = cfg
        self.out = Path(out_dir or cfg.output.dir)
        self.threads = max(int(threads), 1)
        self.seed = seed
        self.model = cfg.model()
        self.hash = cfg.config_hash()
        self.grid = CylinderGrid(cfg.cylinder.L, cfg.cylinder.n_xi, cfg.cylinder.n_y, self.model.dim)
        self.sweep: SpeedSweep | None = None
        self.result = PipelineResult(self.hash)
        self.progress = progress or (lambda msg: log.info(msg))

    def _path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.result.artifacts.append(str(p))
        return p

    def _write(self, name: str, text: str) -> None:
        self._path(name).write_text(text)

    def _solve_kw(self):
        s = self.cfg.solver
        return dict(tol=s.tol, max_iter=s.max_iter, gmres_rtol=s.gmres_rtol)

    # stages

    def stage_medium(self):
        m = self.model
        self._write("medium.txt", _kv({
            "dim": m.dim, "theta0": m.theta0, "theta_min": m.theta_min, "theta_max": m.theta_max,
            "sigma": m.sigma, "gamma": m.gamma, "lipschitz_L": m.lipschitz_L,
            "mass_integral": mass_integral(m), "model_hash": m.model_hash,
        }, self.hash))

    def stage_front(self):
        fc = self.cfg.front
        e = unit(fc.angle) if self.model.dim == 2 else np.array([float(fc.direction)])
        fr = solve_front(self.model, e, self.grid, **self._solve_kw())
        fr = shift_to_normalization(fr)
        fr.save(self._path("front.pfr"), config_hash=self.hash)
        ys = [int(i) for i in fc.profile_y] if self.grid.n_y > 1 else None
        export_profile_csv(self._path("front_profile.csv"), self.grid, fr.U, y_index=ys, config_hash=self.hash)
        dec = fit_decay(fr, self.model)
        self._write("front.txt", _kv({
            "c": fr.c, "residual": fr.residual_norm, "newton_iters": fr.newton_iters,
            "identity_residual": speed_identity_residual(fr, self.model),
            "mu_plus": dec.mu_plus, "mu_minus": dec.mu_minus, "tau": fr.tau,
        }, self.hash))

    def stage_sweep(self):
        n = self.cfg.sweep.n_angles
        sw = sweep_directions(self.model, self.grid, n, progress=lambda j, fr: self.progress(
            f"sweep {j + 1}/{n}: c = {fr.c:.9g}"), **self._solve_kw())
        sw.write_csv(self._path("sweep.csv"), config_hash=self.hash)
        for j, fr in enumerate(sw.fronts):
            fr.save(self._path(f"sweep_fronts/front_{j:03d}.pfr"), config_hash=self.hash)
        self.sweep = sw

    def stage_derivative(self):
        sw = self.sweep
        rows = []
        for j, en in enumerate(sw.entries):
            h = unit(en.angle + np.pi / 2)
            val, fd = directional_speed_derivative(en.front, self.model, h, sweep=sw, index=j,
                                                   rtol=self.cfg.derivative.rtol)
            rows.append((en.angle, en.c, val, fd))
        with open(self._path("derivative.csv"), "w") as fh:
            fh.write(f"# config_hash={self.hash}\n")
            fh.write("angle,c,c_prime_adjoint,c_prime_fd\n")
            for r in rows:
                fh.write(",".join("%.9g" % v for v in r) + "\n")

    def stage_spread(self):
        bad = []
        for sp in self.cfg.spread:
            try:
                self._spread_one(sp)
            except Exception as exc:  # keep running the other experiments
                log.error("spread %s failed: %s", sp.name, exc)
                bad.append(f"{sp.name}: {exc}")
        if bad:
            raise RuntimeError("; ".join(bad))

    def _spread_one(self, sp):
        box = BoxGrid(sp.W, sp.n, self.model.dim)
        if sp.beta is not None:
            st = init_vR(box, self.model, sp.R, sp.beta)
        else:
            st = init_omegaR(box, self.model, sp.R, sp.alpha)
        rep_lines = {"name": sp.name, "R": sp.R, "level": sp.beta if sp.beta is not None else sp.alpha,
                     "W": sp.W, "n": sp.n, "h": box.h, "dt": sp.dt, "tmax": sp.tmax}
        for i, v in enumerate(box.violations()):
            rep_lines[f"resolution_note_{i}"] = v
        if box.dim == 2:
            tr = Tracker(box, sp.rays)
            end = evolve(st, self.model, sp.dt, sp.tmax, record_every=sp.record_every, callback=tr)
            track = tr.result()
            track.write_csv(self._path(f"trajectory_{sp.name}.csv"), config_hash=self.hash)
        else:
            end = evolve(st, self.model, sp.dt, sp.tmax)
            track = None
        rep_lines.update(final_max=float(end.u.max()), final_min=float(end.u.min()))
        text = _kv(rep_lines, self.hash)
        if track is not None and np.isfinite(track.radii).any():
            try:
                rep = estimate_speeds(track, tuple(sp.window), sweep=self.sweep if sp.verdict else None,
                                      tol=sp.tol, dim=box.dim)
                text += rep.text()
                if sp.verdict:
                    self.result.checks[f"spread:{sp.name}"] = bool(rep.verdict)
            except Exception as exc:
                text += f"speed_estimate = unavailable ({exc})\n"
                if sp.verdict:
                    self.result.checks[f"spread:{sp.name}"] = False
        self._write(f"spread_{sp.name}.txt", text)

    def stage_verify(self):
        vc = self.cfg.verify
        sw = self.sweep
        fam = bv.FrontFamily(sw)
        c_lo = float(sw.speeds.min())
        h = self.grid.h
        _, tol = bv.calibrate_tolerance(self.model, c_lo, h)
        for kind in vc.kinds:
            if kind == "tail":
                j = int(np.argmin(sw.speeds))
                bar = bv.ExpTailBarrier(self.model.sigma, self.model.gamma, c_lo, tuple(sw.fronts[j].e))
                err, _ = bv.exp_tail_check(bar, h)
                ok = err <= 1e-6
                self.result.checks["verify:tail"] = ok
                self._write("certificate_tail.txt", _kv({
                    "kind": "exp-tail", "mu1": bar.mu1, "c": c_lo, "max_abs_error": err, "tol": 1e-6,
                    "result": "PASS" if ok else "FAIL"}, self.hash))
                continue
            eps = (vc.eps_sub if vc.eps_sub is not None else c_lo / 2) if kind == "sub" else vc.eps_super
            spec = bv.derive_constants(sw, self.model, eps, kind)
            fld = bv.BarrierField(fam, spec)
            kw = dict(n_t=vc.n_t, n_r=vc.n_r, n_phi=vc.n_phi)
            win = (spec.T + 2e-3, spec.T + vc.span)
            good = bv.certify(fld, self.model, win, tol, **kw)
            bad = bv.certify(fld.flipped(), self.model, win, tol, **kw)
            ok = all(c.passed for _, c in good)
            ctrl = max(c.max_violation for _, c in bad)
            power = ctrl >= 10 * tol
            self.result.checks[f"verify:{kind}"] = ok and power
            parts = [_kv({"kind": kind, "tol_disc": tol}, self.hash), spec.text()]
            for name, c in good:
                parts.append(f"[band {name}]\n" + c.text())
            for name, c in bad:
                parts.append(f"[control {name}]\n" + c.text())
            parts.append(f"control_max_violation = {ctrl:.9g}\n"
                         f"control_power = {'PASS' if power else 'FAIL'}\n"
                         f"result = {'PASS' if ok and power else 'FAIL'}\n")
            self._write(f"certificate_{kind}.txt", "".join(parts))

    def run(self, stages=None) -> PipelineResult:
        stages = list(stages or self.cfg.stages)
        failed: set[str] = set()
        self.out.mkdir(parents=True, exist_ok=True)
        with sfft.set_workers(self.threads):
            for name in stages:
                need = DEPENDS.get(name, set())
                if need & failed or (need and self.sweep is None):
                    msg = f"skipped: needs {sorted(need)}"
                    self.result.failures.append((name, msg))
                    failed.add(name)
                    continue
                self.progress(f"stage {name}")
                try:
                    getattr(self, f"stage_{name}")()
                except Exception as exc:
                    log.exception("stage %s failed", name)
                    self.result.failures.append((name, f"{type(exc).__name__}: {exc}"))
                    failed.add(name)
        return self.result


def run_pipeline(cfg: RunConfig, out_dir=None, stages=None, threads: int = 1, seed=None, sweep_dir=None,
                 progress=None) -> PipelineResult:
    p = Pipeline(cfg, out_dir, threads, seed, progress)
    if sweep_dir is not None:
        p.sweep = load_sweep(sweep_dir, p.model.model_hash)
    return p.run(stages)
