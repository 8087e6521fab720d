"""``antitree`` command line.

Exit codes: 0 success, 1 run finished but its checks failed, 2 configuration
error, 3 capacity error, 4 numerical failure.

``ANTITREE_OUTPUT_ROOT``: when set, relative ``output_dir`` values are
placed under it.
"""
import argparse
import json
import os
import platform
import shutil
import sys
import tempfile
import time

import numpy as np
import scipy

from . import __version__
from ._io import write_json
from .config import parse_config, resolve_output_dir
from .errors import (
    CapacityError,
    ConfigurationError,
    DomainError,
    GridTooCoarseError,
    IntegrationError,
    SingularityError,
)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_CAPACITY, EXIT_NUMERICAL = 0, 1, 2, 3, 4
NUMERICAL = (SingularityError, IntegrationError, GridTooCoarseError, DomainError, ArithmeticError,
             np.linalg.LinAlgError)


def versions():
    return {"antitree": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _finite(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def run_config(cfg):
    """Run into a temporary directory inside the output directory, then move
    the artifacts into place; nothing is left behind on failure."""
    from .experiments import RUNNERS

    out = resolve_output_dir(cfg)
    os.makedirs(out, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".partial-", dir=out)
    try:
        t0 = time.perf_counter()
        report = RUNNERS[cfg.experiment](cfg, tmp)
        manifest = {"experiment": cfg.experiment, "config": cfg.to_text(), "seed": cfg.seed,
                    "workers": cfg.workers, "versions": versions(), "wall_time": time.perf_counter() - t0,
                    "pass": report.get("pass")}
        write_json(os.path.join(tmp, "manifest.json"), _finite(manifest))
        for name in os.listdir(tmp):
            os.replace(os.path.join(tmp, name), os.path.join(out, name))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return report, out


def _run(args):
    cfg = parse_config(args.config)
    report, out = run_config(cfg)
    status = "pass" if report.get("pass") else "FAIL"
    print(f"{cfg.experiment}: {status} ({out})")
    return EXIT_OK if report.get("pass") else EXIT_FAILED


def _validate(args):
    cfg = parse_config(args.config)
    print(f"{args.config}: valid {cfg.experiment} config")
    return EXIT_OK


def _oracle(args):
    from .disorder import DisorderSpec
    from .experiments import oracle_comparison
    from .graph import AntitreeParams

    p = AntitreeParams(args.n, args.r, args.s, args.w)
    spec = DisorderSpec(args.kind, args.sigma)
    window = None
    if args.window_lo is not None or args.window_hi is not None:
        if args.window_lo is None or args.window_hi is None:
            raise ConfigurationError("give both --window-lo and --window-hi")
        window = (args.window_lo, args.window_hi)
    scan, ref, dev, res, _, win = oracle_comparison(p, spec, args.seed, window)
    print(json.dumps(_finite({"window": list(win), "count": int(ref.size), "scan": scan.zeros.tolist(),
                              "oracle": ref.tolist(), "max_deviation": dev, "max_eigvec_residual": res}), indent=2))
    return EXIT_OK if dev <= 1e-8 else EXIT_FAILED


def _version(args):
    print(f"antitree {__version__}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="antitree", description="Antitree Anderson model experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.set_defaults(func=_run)
    v = sub.add_parser("validate", help="parse and validate a config without running it")
    v.add_argument("config")
    v.set_defaults(func=_validate)
    o = sub.add_parser("oracle", help="compare the secular scan with the dense eigensolver")
    o.add_argument("--n", type=int, required=True)
    o.add_argument("--r", type=int, required=True)
    o.add_argument("--s", type=int, required=True)
    o.add_argument("--w", type=float, default=0.0)
    o.add_argument("--sigma", type=float, default=1.0)
    o.add_argument("--kind", default="two_point_symmetric")
    o.add_argument("--seed", type=int, required=True)
    o.add_argument("--window-lo", type=float)
    o.add_argument("--window-hi", type=float)
    o.set_defaults(func=_oracle)
    ver = sub.add_parser("version", help="print the version")
    ver.set_defaults(func=_version)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except NUMERICAL as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
