"""Command line entry point: ``pulsefront [global flags] <subcommand> [options]``."""
from __future__ import annotations

import argparse
import logging
import json
import re
import sys

from .config import DerivativeCfg, FrontCfg, SpreadCfg, SweepCfg, VerifyCfg, load_config, parse_config
from .errors import ConfigError, PulsefrontError
from .pipeline import run_pipeline

STAGES = ("medium", "front", "sweep", "derivative", "spread", "verify")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pulsefront", description="Pulsating fronts in periodic bistable media.")
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    p.add_argument("--seed", type=int, default=None, help="reserved; nothing is random at present")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("medium", help="medium constants")
    f = sub.add_parser("front", help="one pulsating front")
    f.add_argument("--angle", type=float, help="direction angle (N = 2)")
    s = sub.add_parser("sweep", help="speeds over directions")
    s.add_argument("--angles", type=int, help="number of directions")
    d = sub.add_parser("derivative", help="adjoint speed derivative along the sweep")
    d.add_argument("--sweep", help="directory of a previous sweep run")
    sp = sub.add_parser("spread", help="expanding bubble experiment")
    sp.add_argument("--medium", help="file with a [medium] section (instead of --config)")
    sp.add_argument("--sweep", help="directory of a previous sweep run, for the speed verdict")
    sp.add_argument("--R", type=float)
    lv = sp.add_mutually_exclusive_group()
    lv.add_argument("--alpha", type=float)
    lv.add_argument("--beta", type=float)
    sp.add_argument("--tmax", type=float)
    sp.add_argument("--record-every", type=float)
    sp.add_argument("--rays", type=int)
    for name in ("verify", "verify-barrier"):
        v = sub.add_parser(name, help="barrier certificates")
        v.add_argument("--kind", choices=("sub", "super", "tail"), action="append")
        v.add_argument("--eps", type=float)
        v.add_argument("--sweep", help="directory of a previous sweep run")
    sub.add_parser("all", help="every stage the configuration requests")
    return p


def _load(args):
    path = getattr(args, "medium", None) or args.config
    if path is None:
        raise ConfigError(["no configuration given (use --config)"])
    return load_config(path)


def _apply(args, cfg):
    cmd = "verify" if args.command == "verify-barrier" else args.command
    if cmd == "front":
        cfg.front = cfg.front or FrontCfg()
        if args.angle is not None:
            cfg.front.angle = args.angle
        return ["medium", "front"]
    if cmd == "sweep":
        cfg.sweep = cfg.sweep or SweepCfg()
        if args.angles is not None:
            cfg.sweep.n_angles = args.angles
        return ["medium", "sweep"]
    if cmd == "derivative":
        cfg.derivative = cfg.derivative or DerivativeCfg()
        cfg.sweep = cfg.sweep or SweepCfg()
        return ["medium", "derivative"] if args.sweep else ["medium", "sweep", "derivative"]
    if cmd == "spread":
        if not cfg.spread:
            cfg.spread.append(SpreadCfg())
        e = cfg.spread[0]
        for key in ("R", "alpha", "beta", "tmax", "record_every", "rays"):
            val = getattr(args, key)
            if val is not None:
                setattr(e, key, val)
                if key == "alpha":
                    e.beta = None
                if key == "beta":
                    e.alpha = None
        if e.alpha is None and e.beta is None:
            m = cfg.model()
            e.beta = 0.5 * (m.theta_max + 1.0)
        if args.sweep:
            return ["medium", "spread"]
        if not cfg.sweep:
            for e in cfg.spread:
                e.verdict = False
        return ["medium", "sweep", "spread"] if cfg.sweep else ["medium", "spread"]
    if cmd == "verify":
        cfg.verify = cfg.verify or VerifyCfg()
        cfg.sweep = cfg.sweep or SweepCfg()
        if args.kind:
            cfg.verify.kinds = list(dict.fromkeys(args.kind))
        if args.eps is not None:
            cfg.verify.eps_sub = cfg.verify.eps_super = args.eps
        return ["medium", "verify"] if args.sweep else ["medium", "sweep", "verify"]
    if cmd == "medium":
        return ["medium"]
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
        stages = _apply(args, cfg)
        # re-validate after command-line overrides
        cfg = _revalidate(cfg)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    sweep_dir = getattr(args, "sweep", None)
    try:
        res = run_pipeline(cfg, out_dir=args.out, stages=stages, threads=args.threads, seed=args.seed,
                           sweep_dir=sweep_dir, progress=print if args.verbose else None)
    except PulsefrontError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for stage, msg in res.failures:
        print(f"stage {stage} failed: {msg}", file=sys.stderr)
    for name, ok in sorted(res.checks.items()):
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
    print(f"config_hash = {res.config_hash}")
    return res.exit_code


def _revalidate(cfg):
    """Round-trip the overridden config through the parser checks.

    The file itself already validated, so anything flagged here came from a
    command-line override and line numbers of the dump would mislead.
    """
    try:
        return parse_config(dump_config(cfg))
    except ConfigError as exc:
        raise ConfigError([re.sub(r"^line \d+: ", "command line: ", e) for e in exc.errors]) from None


def dump_config(cfg) -> str:
    """Inverse of parse_config for resolved configs."""
    lines = ["[medium]"]
    for k in ("dim", "theta0", "modes"):
        lines.append(f"{k} = {json.dumps(cfg.medium[k])}")

    def section(name, obj):
        if obj is None:
            return
        lines.append(f"[{name}]")
        for k, v in vars(obj).items():
            if v is None or (name.startswith("spread") and k == "name"):
                continue
            lines.append(f"{k} = {json.dumps(v)}")

    section("cylinder", cfg.cylinder)
    section("solver", cfg.solver)
    section("front", cfg.front)
    section("sweep", cfg.sweep)
    section("derivative", cfg.derivative)
    for sp in cfg.spread:
        section(f"spread.{sp.name}", sp)
    section("verify", cfg.verify)
    section("output", cfg.output)
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    sys.exit(main())
