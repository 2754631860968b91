"""``geldg`` command line: one subcommand per experiment, CSV on stdout or --out.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then command-line flags.  The exit status is 0 iff every
requested threshold passed, 1 if one failed and 2 on usage or solver errors.
"""

from __future__ import annotations

import argparse
import sys

from .errors import GELDGError
from .harness import COMMANDS, make_config, read_config_file, run_command

# per-command defaults layered under the config file
COMMAND_DEFAULTS = {
    "converge": {},
    "cfl-sweep": {"meshes": "160", "T": "100"},
    "dgcl": {"meshes": "40", "cfl": "0.1", "T": "1"},
    "mass-check": {"meshes": "40,80"},
    "mpp-demo": {"problem": "step", "k": "2", "rk": "4", "cfl": "1", "meshes": "160", "variant": "geldg2"},
    "swirl": {"problem": "swirl", "rk": "4", "cfl": "2.5", "meshes": "20,40,80"},
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="file of key = value lines")
    p.add_argument("--problem")
    p.add_argument("--k", type=int)
    p.add_argument("--rk", type=int)
    p.add_argument("--cfl", type=float)
    p.add_argument("--meshes", help="comma-separated cell counts, e.g. 40,80,160")
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--limiter", help="none | gel_mpp | zhang | pp | tvb")
    p.add_argument("--variant", help="geldg | geldg1..3 | eldg-reference-partition[:id] | perturbed:<nu>:<alpha>")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--tvb-M", type=float, dest="tvb_M")
    p.add_argument("--lf-mode", dest="lf_mode", choices=("global", "local"))
    p.add_argument("--cfls", help="comma-separated CFL list for cfl-sweep")
    p.add_argument("--splitting", type=int, choices=(2, 4))
    p.add_argument("--norm-nodes", type=int, dest="norm_nodes")
    p.add_argument("--snapshots", type=int, help="number of snapshot CSVs to write next to --out")
    p.add_argument("--min-order", type=float, dest="min_order")
    p.add_argument("--max-error", type=float, dest="max_error")
    p.add_argument("--max-drift", type=float, dest="max_drift")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geldg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_run_flags(sub.add_parser(name))
    return parser


_FLAG_KEYS = (
    "problem", "k", "rk", "cfl", "meshes", "T", "limiter", "variant", "out", "tvb_M",
    "lf_mode", "cfls", "splitting", "norm_nodes", "snapshots", "min_order", "max_error", "max_drift",
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        base = dict(COMMAND_DEFAULTS[args.command])
        if args.config:
            base.update(read_config_file(args.config))
        cfg = make_config(base, **{key: getattr(args, key) for key in _FLAG_KEYS})
        text, ok = run_command(args.command, cfg)
    except (ValueError, KeyError, OSError, GELDGError) as exc:
        print(f"geldg {args.command}: {exc}", file=sys.stderr)
        return 2
    if not cfg.out:
        sys.stdout.write(text)
    print("PASS" if ok else "FAIL", file=sys.stderr)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
