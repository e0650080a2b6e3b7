"""Command line entry point: ``odcbf run|verify|batch``."""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import parse_config
from .errors import ConfigError
from .runner import run_scenario, verify_command

log = logging.getLogger("odcbf")


def _add_common(p):
    p.add_argument("--config", help="scenario TOML file")
    p.add_argument("--scenario", choices=["double-integrator", "satellite", "custom"])
    p.add_argument("--method", choices=["cbf", "od-cbf", "hocbf", "od-hocbf", "fixed-theta", "recbf", "od-recbf"])
    p.add_argument("--out", help="output directory")
    p.add_argument("--dt", type=float, help="RK4 step [s]")
    p.add_argument("--t-final", type=float, help="horizon [s]")
    p.add_argument("--preset", help="initial-condition preset (nominal, outside, consistent-orbit, paper-literal)")
    p.add_argument("--seed", type=int, help="sampler seed for verification")
    p.add_argument("--verify", action="store_true", help="run verification checks before simulating")


def _overrides(args):
    pairs = {"": {"scenario": args.scenario, "method": args.method},
             "output": {"dir": args.out},
             "sim": {"dt": args.dt, "t_final": args.t_final, "preset": args.preset},
             "verify": {"seed": args.seed}}
    out = {f"{sec}.{k}" if sec else k: v for sec, d in pairs.items() for k, v in d.items() if v is not None}
    if getattr(args, "verify", False):
        out["checks.verify"] = True
    return out


def load(args, config_path=None):
    path = config_path or args.config
    try:
        text = Path(path).read_text(encoding="utf-8") if path else ""
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    cfg = parse_config(text + "\n", _overrides(args))
    if path and cfg.raw.get("name") is None:
        cfg.name = Path(path).stem
    return cfg


def _run_one(cfg):
    report = run_scenario(cfg)
    return report.ok, report.to_text()


def cmd_run(args):
    cfg = load(args)
    ok, text = _run_one(cfg)
    print(text)
    return 0 if ok else 1


def cmd_verify(args):
    cfg = load(args)
    bundle = verify_command(cfg)
    print(bundle.to_text())
    print(f"wrote {bundle.path}")
    return 0 if bundle.ok else 1


def cmd_batch(args):
    cfgs = [load(args, path) for path in args.configs]
    for i, cfg in enumerate(cfgs):
        # keep outputs of same-named scenarios apart
        if sum(c.name == cfg.name for c in cfgs) > 1:
            cfg.name = f"{cfg.name}_{i}"
    workers = max(1, args.workers)
    if workers == 1:
        results = [_run_one(c) for c in cfgs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, cfgs))
    for _, text in results:
        print(text)
    return 0 if all(ok for ok, _ in results) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="odcbf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="simulate one scenario")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)
    p_ver = sub.add_parser("verify", help="sampling checks of barrier validity")
    _add_common(p_ver)
    p_ver.set_defaults(func=cmd_verify)
    p_batch = sub.add_parser("batch", help="run several scenario files")
    _add_common(p_batch)
    p_batch.add_argument("configs", nargs="+", help="scenario TOML files")
    p_batch.add_argument("--workers", type=int, default=1)
    p_batch.set_defaults(func=cmd_batch)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
