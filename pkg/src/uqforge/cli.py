"""``uqforge`` command line."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import runs
from .errors import UQError
from .options import check_supported, read_options

SUBCOMMANDS = ("sip-simple", "sfp-simple", "gravity", "bimodal", "modal", "gsa-line", "validate-options")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uqforge", description="Run the bundled uncertainty-quantification examples.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("options_file", help="key = value option file")
        sp.add_argument("--seed", type=int, help="override env_seed")
        sp.add_argument("--workers", type=int, help="override env_numSubEnvironments")
        sp.add_argument("--out-dir", type=Path, default=Path("."), help="directory for all outputs (default: .)")
        return sp

    add("sip-simple", "DRAM on the two-parameter Gaussian posterior")
    add("sfp-simple", "Monte Carlo push-forward of a Gaussian through theta1 + theta2")
    g = add("gravity", "infer g from fall times, then propagate it to a projectile range")
    g.add_argument("--v0", type=float, default=5.0, help="launch speed [m/s]")
    g.add_argument("--alpha", type=float, default=math.pi / 4, help="launch angle [rad]")
    g.add_argument("--h0", type=float, default=0.0, help="launch height [m]")
    for name, text in (("bimodal", "multilevel sampling of a two-component mixture"),
                       ("modal", "multilevel sampling of the three-parameter modal target")):
        sp = add(name, text)
        sp.add_argument("--chain-layout", choices=("multiplicity", "per_copy"), default="multiplicity",
                        help="one chain per resampled start, or one-step chains per copy")
        if name == "modal":
            sp.add_argument("--modes", type=int, choices=(1, 2), default=1)
            sp.add_argument("--concatenated-prior", action="store_true",
                            help="beta prior on the third parameter instead of a uniform one")
    gl = add("gsa-line", "sensitivity indices of y = m*x + c")
    gl.add_argument("--n-samples", type=int, help="rows per sample matrix (default: fp_mc_qseq_size)")
    gl.add_argument("--x", type=float, default=2.0)
    add("validate-options", "parse an option file and report warnings")
    return p


def _validate(args) -> int:
    opts = read_options(args.options_file)
    for fam in ("env", "ip", "ip_mh", "ip_ml", "fp", "fp_mc"):
        check_supported(opts, fam)
    for w in opts.warnings:
        print(f"warning: {w}")
    sys.stdout.write(opts.emit(only_non_default=True))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.subcommand == "validate-options":
            return _validate(args)
        ctx = runs.RunContext(str(args.options_file), args.out_dir, args.seed, args.workers)
        cmd = args.subcommand
        if cmd == "sip-simple":
            report = runs.run_sip_simple(ctx)
        elif cmd == "sfp-simple":
            report = runs.run_sfp_simple(ctx)
        elif cmd == "gravity":
            ctx.extra["gravity"] = {"v0": args.v0, "alpha": args.alpha, "h0": args.h0}
            report = runs.run_gravity(ctx)
        elif cmd == "bimodal":
            ctx.extra["chain_layout"] = args.chain_layout
            report = runs.run_bimodal(ctx)
        elif cmd == "modal":
            ctx.extra["chain_layout"] = args.chain_layout
            report = runs.run_modal(ctx, args.modes, args.concatenated_prior)
        else:
            report = runs.run_gsa_line(ctx, args.n_samples, args.x)
    except (UQError, OSError, ValueError) as exc:
        print(f"uqforge: error: {exc}", file=sys.stderr)
        return 1
    print(f"{report.subcommand}: {len(report.manifest)} files written to {args.out_dir} "
          f"({report.wall_time:.2f} s); see {runs.REPORT_NAME}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
