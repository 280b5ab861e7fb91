"""Command-line interface: ``simulate`` with sweep/gen-corpus/perceive/csf subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import percept, sweep as sweep_mod
from .csf import FieldGeometry, csf, detection_probability
from .errors import VobsimError
from .stackgen import (
    LesionSpec,
    ViewingConditions,
    generate_corpus,
    normalize_to_display,
    read_stack,
    write_manifest,
    write_stack,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Virtual observer simulation over 3D image stacks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a configured parameter sweep")
    p_sweep.add_argument("--config", required=True, help="JSON run configuration")
    p_sweep.add_argument("--out", required=True, help="output CSV path")
    p_sweep.add_argument("--threads", type=int, default=1)
    p_sweep.add_argument("--report", help="optional JSON trend-report path")

    p_gen = sub.add_parser("gen-corpus", help="generate a labeled stack corpus")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--n-pairs", type=int, default=200)
    p_gen.add_argument("--nx", type=int, default=64)
    p_gen.add_argument("--ny", type=int, default=64)
    p_gen.add_argument("--nt", type=int, default=32)
    p_gen.add_argument("--beta", type=float, default=3.0)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--amplitude", type=float, default=sweep_mod.DEFAULT_LESION_AMPLITUDE)
    p_gen.add_argument("--sigma-xy", type=float, default=6.0)
    p_gen.add_argument("--sigma-t", type=float, default=3.0)

    p_perc = sub.add_parser("perceive", help="apply one perception method to a stack file")
    p_perc.add_argument("--input", required=True)
    p_perc.add_argument("--output", required=True)
    p_perc.add_argument("--method", required=True, choices=["LF", "PM", "MC", "lf", "pm", "mc"])
    p_perc.add_argument("--mc-seed", type=int)
    p_perc.add_argument("--l-max", type=float, default=300.0)
    p_perc.add_argument("--contrast", type=float, default=200.0)
    p_perc.add_argument("--ssr", type=float, default=7.0)
    p_perc.add_argument("--browse-speed", type=float, default=25.0)
    p_perc.add_argument(
        "--normalize", action="store_true",
        help="normalize the stack to the display range before perceiving",
    )

    p_csf = sub.add_parser("csf", help="contrast sensitivity diagnostics")
    csf_sub = p_csf.add_subparsers(dest="csf_command", required=True)
    p_eval = csf_sub.add_parser("eval", help="print S and p for one operating point")
    p_eval.add_argument("--u", type=float, required=True, help="spatial frequency, cycles/deg")
    p_eval.add_argument("--w", type=float, required=True, help="temporal frequency, cycles/s")
    p_eval.add_argument("--l-avg", type=float, required=True, help="average luminance, cd/m^2")
    p_eval.add_argument("--x0", type=float, required=True, help="apparent size, deg")
    p_eval.add_argument("--m", type=float, required=True, help="component modulation")
    return parser


def _cmd_sweep(args) -> int:
    config = sweep_mod.SweepConfig.from_json(args.config)
    report = sweep_mod.run_sweep(config, args.out, threads=args.threads)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    for method, label in report.labels.items():
        print(f"{method}\t{report.parameter}\t{label}")
    return 0


def _cmd_gen_corpus(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lesion = LesionSpec(amplitude=args.amplitude, sigma_xy=args.sigma_xy, sigma_t=args.sigma_t)
    stacks = generate_corpus(
        args.n_pairs, args.nx, args.ny, args.nt, args.beta, lesion, args.seed
    )
    paths, labels = [], []
    for i, stack in enumerate(stacks):
        path = out_dir / f"stack_{i:05d}.vstk"
        write_stack(stack, path)
        paths.append(path.name)
        labels.append(stack.label)
    write_manifest(out_dir / "manifest.json", paths, labels, args.seed)
    print(f"wrote {len(stacks)} stacks to {out_dir}")
    return 0


def _cmd_perceive(args) -> int:
    vc = ViewingConditions(
        l_max=args.l_max, contrast=args.contrast, ssr=args.ssr,
        browse_speed=args.browse_speed,
    )
    stack = read_stack(args.input)
    if args.normalize:
        stack = normalize_to_display(stack, vc)
    out = percept.perceive(stack, args.method.upper(), vc, mc_seed=args.mc_seed)
    write_stack(out, args.output)
    return 0


def _cmd_csf_eval(args) -> int:
    geom = FieldGeometry(x0=args.x0, l_avg=args.l_avg)
    s = csf(args.u, args.w, geom)
    p = detection_probability(args.m, s)
    print(s)
    print(p)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "sweep": _cmd_sweep,
        "gen-corpus": _cmd_gen_corpus,
        "perceive": _cmd_perceive,
        "csf": _cmd_csf_eval,
    }
    try:
        return handlers[args.command](args)
    except VobsimError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except OSError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
