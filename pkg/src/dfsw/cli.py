"""Command-line entry point: ``dfsw {limits,gen-code,simulate,sweep}``.

Exit codes: 0 success (a sweep that misses its target still exits 0),
1 usage or configuration error, 2 internal error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, hmm, ldpc, limits


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _dist(text: str) -> list[tuple[int, float]]:
    """``"2:0.5,3:0.5"`` -> [(2, 0.5), (3, 0.5)]"""
    try:
        out = []
        for part in text.split(","):
            d, f = part.split(":")
            out.append((int(d), float(f)))
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected degree:fraction pairs, got {text!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--config", type=Path, help="JSON or YAML key-value config; flags override it")


def _model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--model", help="built-in model name (M1, M2, M3)")
    g.add_argument("--two-state", type=_floats, metavar="P00,P11,Q0,Q1")


def _code_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bit-degree", type=int)
    p.add_argument("--check-degree", type=int)
    p.add_argument("--rate", type=float, help="design code rate K/N (check degrees concentrated)")
    p.add_argument("--bit-dist", type=_dist, metavar="D:F,...")
    p.add_argument("--check-dist", type=_dist, metavar="D:F,...")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dfsw", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("limits", help="conditional-entropy curve and entropy rate as CSV")
    _common(p)
    _model_args(p)
    p.add_argument("--max-m", type=int, default=20)
    p.add_argument("--mc-samples", type=int, default=200_000)
    p.add_argument("--exact-max", type=int, default=20, help="deepest exactly enumerated M")
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("gen-code", help="build a 4-cycle-free LDPC code and write it as alist")
    _common(p)
    p.add_argument("--n", type=int)
    _code_args(p)
    p.add_argument("--out", type=Path)

    for name, text in (("simulate", "Monte Carlo compression experiment, JSON report"),
                       ("sweep", "simulate over a grid of code rates, CSV")):
        p = sub.add_parser(name, help=text)
        _common(p)
        _model_args(p)
        p.add_argument("--n", type=int)
        p.add_argument("--l", type=int)
        p.add_argument("--m", type=int)
        _code_args(p)
        p.add_argument("--alist", type=Path)
        p.add_argument("--code-seed", type=int)
        p.add_argument("--blocks", type=int)
        p.add_argument("--max-bp-iters", type=int)
        p.add_argument("--feedback-policy", choices=[f.value for f in bench.codec.FeedbackPolicy])
        p.add_argument("--window", type=int)
        p.add_argument("--workers", type=int)
        if name == "simulate":
            p.add_argument("--out", type=Path)
        else:
            p.add_argument("--rates", type=_floats)
            p.add_argument("--target", type=float)
    return parser


def _model_from(args, cfg: dict) -> hmm.HmmModel:
    if args.model:
        return hmm.named_model(args.model)
    if args.two_state:
        if len(args.two_state) != 4:
            raise UsageError("--two-state needs four values")
        return hmm.from_two_state(args.two_state, name="two-state")
    if "model" in cfg:
        m = cfg["model"]
        return hmm.named_model(m) if isinstance(m, str) else hmm.model_from_mapping(m)
    if cfg:
        return hmm.model_from_mapping(cfg)
    raise UsageError("choose a model with --model, --two-state or --config")


def cmd_limits(args, cfg: dict) -> int:
    model = _model_from(args, cfg)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    curve = limits.fig3_curve(model, args.max_m, args.mc_samples, seed, exact_max=args.exact_max)
    rate = limits.entropy_rate(model, args.tol, mc_samples=args.mc_samples, seed=seed)
    sys.stdout.write(curve.to_csv())
    sys.stdout.write(
        f"# entropy_rate={rate.value!r} depth={rate.depth} "
        f"converged={str(rate.converged).lower()} method={rate.method}\n"
    )
    return 0


def _code_spec(args, cfg_code: dict | None) -> dict | None:
    if getattr(args, "alist", None):
        return {"kind": "alist", "path": str(args.alist)}
    if args.bit_dist or args.check_dist:
        if not (args.bit_dist and args.check_dist):
            raise UsageError("--bit-dist and --check-dist go together")
        return {"kind": "irregular", "bit_degrees": args.bit_dist, "check_degrees": args.check_dist}
    if args.rate is not None:
        return {"kind": "rate", "rate": args.rate, "bit_degree": args.bit_degree or 3}
    if args.check_degree is not None:
        return {"kind": "regular", "bit_degree": args.bit_degree or 3, "check_degree": args.check_degree}
    if cfg_code is not None and args.bit_degree is not None:
        return {**cfg_code, "bit_degree": args.bit_degree}
    return cfg_code


def cmd_gen_code(args, cfg: dict) -> int:
    n = args.n if args.n is not None else cfg.get("N")
    seed = args.seed if args.seed is not None else int(cfg.get("code_seed", cfg.get("seed", 0)))
    code = _code_spec(args, cfg.get("code"))
    if n is None or code is None or code["kind"] == "alist":
        raise UsageError("gen-code needs --n and a code description (degrees, --rate or distributions)")
    spec = bench.ExperimentSpec(N=int(n), code=code, code_seed=seed)
    H = spec.build_code()
    if ldpc.has_four_cycle(H):
        raise RuntimeError("constructed code has a 4-cycle")
    text = ldpc.to_alist(H)
    # without --out the alist owns stdout and the summary moves to stderr
    info = sys.stdout if args.out else sys.stderr
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    print(f"N={H.n_bits} checks={H.n_checks} K={H.k} rate={H.rate!r}", file=info)
    print("girth check: no 4-cycles (girth >= 6)", file=info)
    return 0


def _experiment(args, cfg: dict) -> tuple[bench.ExperimentSpec, dict]:
    cfg = dict(cfg)
    extra = {k: cfg.pop(k) for k in ("rates", "target", "workers", "seed") if k in cfg}
    over = {}
    if args.model:
        over["model"] = args.model
    elif args.two_state:
        if len(args.two_state) != 4:
            raise UsageError("--two-state needs four values")
        over["model"] = {"two_state": args.two_state}
    for flag, key in (("n", "N"), ("l", "L"), ("m", "M"), ("code_seed", "code_seed"),
                      ("blocks", "num_blocks"), ("max_bp_iters", "max_bp_iters"),
                      ("feedback_policy", "feedback_policy"), ("window", "window")):
        v = getattr(args, flag)
        if v is not None:
            over[key] = v
    if args.seed is not None:
        over["master_seed"] = args.seed
    elif "seed" in extra and "master_seed" not in cfg:
        over["master_seed"] = int(extra["seed"])
    code = _code_spec(args, cfg.get("code"))
    if code is not None:
        over["code"] = code
    cfg.update(over)
    spec = bench.ExperimentSpec.from_mapping(cfg)
    spec.validate()
    return spec, extra


def cmd_simulate(args, cfg: dict) -> int:
    spec, extra = _experiment(args, cfg)
    workers = args.workers or int(extra.get("workers", 1))
    report = bench.simulate(spec, workers=workers)
    text = bench.report_json(report)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_sweep(args, cfg: dict) -> int:
    spec, extra = _experiment(args, cfg)
    rates = args.rates or extra.get("rates")
    if not rates:
        raise UsageError("sweep needs --rates (or 'rates' in the config)")
    target = args.target if args.target is not None else float(extra.get("target", 1e-3))
    workers = args.workers or int(extra.get("workers", 1))
    rows = bench.sweep(spec, [float(r) for r in rates], target, workers=workers)
    sys.stdout.write(bench.sweep_csv(rows, target))
    return 0


COMMANDS = {"limits": cmd_limits, "gen-code": cmd_gen_code, "simulate": cmd_simulate, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help exits 0, bad usage 1
        return exc.code if isinstance(exc.code, int) else 1
    try:
        cfg = hmm.load_mapping(args.config) if args.config else {}
    except Exception as exc:  # noqa: BLE001
        print(f"dfsw {args.command}: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args, cfg)
    except (UsageError, bench.SpecError, hmm.InvalidModelError, ldpc.CodeConstructionError,
            limits.InfeasibleDepthError, OSError, ValueError) as exc:
        print(f"dfsw {args.command}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"dfsw {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
