"""Command-line entry point: ``invex {prox,deconv,cs,denoise,check}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .checks import run_check
from .errors import InvexError
from .experiments import ExperimentConfig, run_experiment
from .prox import brute_force_prox, lp_quasinorm_prox, prox_scalar
from .regularizers import Kind, Regularizer

EXIT_FAIL = 1
EXIT_USAGE = 2


def _add_run_flags(p):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="run a single base seed")
    p.add_argument("--threads", type=int, help="worker threads for independent cells")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="invex", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prox", help="scalar proximal operator")
    p.add_argument("--kind", required=True,
                   help="lp, log, ratio, sq, log_minus_ratio or l1")
    p.add_argument("--p", type=float, help="exponent for lp")
    p.add_argument("--epsilon", type=float, help="shift for lp (default: smallest admissible)")
    p.add_argument("--lam", type=float, required=True, help="weight in (0, 1]")
    p.add_argument("--t", type=float, required=True, help="input value")
    p.add_argument("--oracle", action="store_true", help="use the grid-search oracle")
    p.add_argument("--unshifted", action="store_true",
                   help="lp only: threshold rule for lam*|w|**p without the epsilon shift")

    for name, text in (("deconv", "blur-plus-Haar deconvolution"),
                       ("cs", "compressive sensing recovery"),
                       ("denoise", "patch-frame denoising")):
        _add_run_flags(sub.add_parser(name, help=text))

    p = sub.add_parser("check", help="run the built-in property suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=200, help="prox cases per regularizer")
    return parser


def _prox(args) -> int:
    params = {}
    if args.p is not None:
        params["p"] = args.p
    if args.epsilon is not None:
        params["epsilon"] = args.epsilon
    reg = Regularizer.from_dict({"kind": args.kind, **params})
    if args.unshifted:
        if reg.kind is not Kind.LP:
            raise InvexError("--unshifted applies to the lp kind only")
        value = lp_quasinorm_prox(args.t, args.lam, reg.p)
    elif args.oracle:
        value = brute_force_prox(reg, args.lam, args.t)
    else:
        value = prox_scalar(reg, args.lam, args.t)
    print(f"{value + 0.0:.12g}")  # + 0.0 folds -0.0 into 0.0
    return 0


def _run(args) -> int:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    data.setdefault("experiment", args.command)
    if data["experiment"] != args.command:
        raise InvexError(f"config is for {data['experiment']!r}, not {args.command!r}")
    if args.out:
        data["output_dir"] = args.out
    if args.seed is not None:
        data["seeds"] = [args.seed]
    if args.threads is not None:
        data["threads"] = args.threads
    cfg = ExperimentConfig.from_dict(data)
    rows = run_experiment(cfg)
    for r in rows:
        status = f"error: {r.error}" if r.error else (
            f"psnr={r.psnr_db:.4g} ssim={r.ssim:.4g} rel_err={r.rel_err:.4g}"
            if r.psnr_db is not None else f"rel_err={r.rel_err:.4g}")
        p = "" if r.p is None else f"(p={r.p:g})"
        print(f"{r.image} {r.reg}{p} snr={r.snr_db:g} seed={r.seed}: {status}")
    print(f"results written to {cfg.output_dir}/results.csv")
    return EXIT_FAIL if any(r.error for r in rows) else 0


def _check(args) -> int:
    report = run_check(seed=args.seed, oracle_cases=args.cases)
    print("\n".join(report.lines()))
    return 0 if report.ok else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"prox": _prox, "check": _check}
    try:
        return handlers.get(args.command, _run)(args)
    except (InvexError, ValueError, OSError) as exc:
        print(f"invex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
