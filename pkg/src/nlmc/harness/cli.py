"""``nlmc <experiment> --config PATH [--override key=value ...]``."""
from __future__ import annotations

import argparse
import json
import sys

from nlmc.errors import ConfigError
from nlmc.harness.config import EXPERIMENTS, load_config
from nlmc.harness.runner import EXIT_CONFIG, run, write_outputs


def build_parser():
    ap = argparse.ArgumentParser(prog="nlmc", description="Nonlocal mean curvature experiments.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, metavar="PATH", help="YAML run configuration")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted-path override, e.g. params.s=0.3 (repeatable)")
    ap.add_argument("--out", default=None, metavar="DIR", help="output directory (default: output.dir)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.override, experiment=args.experiment)
    except ConfigError as err:
        print(json.dumps({"error": "ConfigError", "message": str(err), "exit_code": EXIT_CONFIG}), file=sys.stderr)
        return EXIT_CONFIG
    rr = run(cfg)
    files = write_outputs(rr, cfg, args.out)
    status = {"experiment": cfg.experiment, "exit_code": rr.exit_code, "files": files}
    if rr.report.get("error"):
        status["error"] = rr.report["error"]
    if rr.report.get("numerical_warnings"):
        status["numerical_warnings"] = rr.report["numerical_warnings"]
    print(json.dumps(status))
    return rr.exit_code


if __name__ == "__main__":
    sys.exit(main())
