"""covplan command line.

    covplan plan generate --model M --strength 2 [--scope a,b] [--fix f=v ...] --seed S --out plan.csv
    covplan plan verify   --model M --plan plan.csv --strength 2 [--scope ...] [--fix ...]
    covplan analyze pairwise   --plan plan.csv --scores scores.csv [--alpha 0.05] --out DIR
    covplan analyze regression --model M --plan plan.csv --scores scores.csv [--interactions 2] --out DIR
    covplan simulate --model M [--generations 20] [--samples 30] [--seed S] [--effects E] --out DIR

Exit status: 0 success, 1 usage or validation error, 2 internal error.
``--model running-example`` loads the bundled 15-factor model.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .coverage import (
    CoverageRequirement,
    coverage_report,
    infeasible_interactions,
)
from .errors import CovplanError
from .generator import generate_plan, read_plan, write_plan
from .model import example_model_text, load_model, parse_model
from .scores import dump_scores, ingest_scores, sample_stats

log = logging.getLogger("covplan")

BUILTIN_MODELS = {"running-example": example_model_text}


class UsageError(CovplanError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_model(arg):
    if arg in BUILTIN_MODELS and not Path(arg).exists():
        return parse_model(BUILTIN_MODELS[arg]())
    return load_model(arg) if Path(arg).exists() else parse_model(_read(arg))


def _fixed(pairs):
    out = {}
    for item in pairs or []:
        name, sep, value = item.partition("=")
        if not sep or not name or not value:
            raise UsageError(f"--fix expects name=value, got {item!r}")
        if name in out:
            raise UsageError(f"--fix given twice for {name!r}")
        out[name] = value
    return out


def _scope(text):
    if text is None:
        return None
    names = [s.strip() for s in text.split(",") if s.strip()]
    if not names:
        raise UsageError("--scope is empty")
    return names


def _requirement(model, args):
    return CoverageRequirement.for_model(model, args.strength, _scope(args.scope), _fixed(args.fix))


def _digest(path) -> str:
    if not Path(path).exists():
        return "builtin"
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(command, params, inputs, outputs) -> str:
    doc = {
        "tool": "covplan",
        "version": __version__,
        "command": command,
        "parameters": params,
        "inputs": {str(p): _digest(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# -- commands ---------------------------------------------------------------

def cmd_plan_generate(args) -> int:
    model = _load_model(args.model)
    req = _requirement(model, args)
    plan = generate_plan(model, req, args.seed)
    report = coverage_report(model, req, plan)
    dropped = infeasible_interactions(model, req)
    text = write_plan(plan)
    if args.out:
        out = Path(args.out)
        _write(out, text)
        manifest = out.with_name(out.name + ".manifest.json")
        _write(manifest, _manifest(
            "plan generate",
            {"seed": args.seed, **req.to_dict()},
            [args.model], [out],
        ))
    else:
        sys.stdout.write(text)
    msg = sys.stderr if not args.out else sys.stdout
    print(f"plan: {len(plan)} rows", file=msg)
    print(f"covered {report.covered}/{report.required} interactions", file=msg)
    if dropped:
        print(f"infeasible under constraints (not required): {len(dropped)}", file=msg)
        for t in dropped:
            print(f"  {t}", file=msg)
    return 0


def cmd_plan_verify(args) -> int:
    model = _load_model(args.model)
    req = _requirement(model, args)
    plan = read_plan(_read(args.plan), model)
    report = coverage_report(model, req, plan)
    print(f"plan: {len(plan)} rows")
    print(f"covered {report.covered}/{report.required} interactions "
          f"(ratio {report.coverage_ratio:.6g})")
    if report.missing:
        print("missing:")
        for t in report.missing:
            print(f"  {t}")
        return 1
    return 0


def cmd_analyze_pairwise(args) -> int:
    from .pairwise import pairwise_report, report_csv, report_text, verdict

    plan = read_plan(_read(args.plan))
    dataset = ingest_scores(plan, _read(args.scores))
    stats = sample_stats(dataset)
    report = pairwise_report(stats, args.alpha)
    out = Path(args.out)
    files = [out / "pairwise.csv", out / "pairwise.txt"]
    _write(files[0], report_csv(report))
    _write(files[1], report_text(report))
    if not args.no_figures:
        from .plotting import pairwise_figure

        files.append(out / "pairwise.png")
        pairwise_figure(report, stats, files[-1])
    _write(out / "manifest.json", _manifest(
        "analyze pairwise", {"alpha": args.alpha}, [args.plan, args.scores], files))
    if stats.unscored:
        print("unscored rows (excluded): " + ", ".join(map(str, stats.unscored)))
    print(verdict(report))
    return 0


def cmd_analyze_regression(args) -> int:
    from .regression import (
        build_design_matrix,
        coefficient_csv,
        coefficient_table,
        coefficient_text,
        fit_logistic,
        wald_csv,
        wald_table,
        wald_text,
    )

    model = _load_model(args.model)
    plan = read_plan(_read(args.plan), model)
    dataset = ingest_scores(plan, _read(args.scores))
    dm = build_design_matrix(model, plan, dataset, args.interactions)
    fit = fit_logistic(dm)
    coefs = coefficient_table(fit)
    wald = wald_table(fit)
    out = Path(args.out)
    files = [out / "coefficients.csv", out / "coefficients.txt", out / "wald.csv", out / "wald.txt"]
    _write(files[0], coefficient_csv(coefs))
    _write(files[1], coefficient_text(coefs, fit))
    _write(files[2], wald_csv(wald))
    _write(files[3], wald_text(wald))
    if not args.no_figures:
        from .plotting import coefficient_figure, wald_figure

        files += [out / "coefficients.png", out / "wald.png"]
        coefficient_figure(coefs, files[-2])
        wald_figure(wald, files[-1])
    _write(out / "manifest.json", _manifest(
        "analyze regression", {"interactions": args.interactions},
        [args.model, args.plan, args.scores], files))
    print(coefficient_text(coefs, fit), end="")
    print()
    print(wald_text(wald), end="")
    return 0


def cmd_simulate(args) -> int:
    from .simulation import (
        SimulationConfig,
        parse_effects,
        merged_plans,
        run_paper_simulation,
        simulate_with_effects,
        theta_csv,
    )

    model = _load_model(args.model)
    req = _requirement(model, args)
    cfg = SimulationConfig(samples_per_row=args.samples, generations=args.generations,
                           seed=args.seed)
    inputs = [args.model]
    if args.effects:
        effects = parse_effects(_read(args.effects))
        inputs.append(args.effects)
        sim = simulate_with_effects(model, merged_plans(model, req, cfg), effects,
                                    args.samples, args.seed)
    else:
        sim = run_paper_simulation(model, req, cfg)
    out = Path(args.out)
    files = [out / "plan.csv", out / "scores.csv", out / "theta.csv"]
    _write(files[0], write_plan(sim.plan))
    _write(files[1], dump_scores(sim.dataset))
    _write(files[2], theta_csv(sim))
    stats = sample_stats(sim.dataset)
    if not args.no_figures:
        from .plotting import simulation_figure

        files.append(out / "simulation.png")
        simulation_figure(sim, stats, files[-1])
    _write(out / "manifest.json", _manifest(
        "simulate",
        {"generations": args.generations, "samples": args.samples, "seed": args.seed,
         "effects": bool(args.effects), **req.to_dict()},
        inputs, files))
    grand = sum(s for _, _, s in sim.dataset.observations) / len(sim.dataset)
    print(f"simulated {len(sim.plan)} unique rows x {args.samples} samples = "
          f"{len(sim.dataset)} observations (grand mean {grand:.4f})")
    return 0


# -- parser -----------------------------------------------------------------

def _add_requirement_flags(p, strength_required=True):
    p.add_argument("--strength", type=int, required=strength_required, default=2,
                   help="interaction strength k")
    p.add_argument("--scope", help="comma-separated factors to cover (default: all not fixed)")
    p.add_argument("--fix", action="append", metavar="NAME=VALUE",
                   help="pin a factor outside the experiment (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="covplan", description="Covering experiment plans and score analysis.")
    parser.add_argument("--version", action="version", version=f"covplan {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    top = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    plan = top.add_parser("plan", help="generate or verify a covering plan")
    plan_sub = plan.add_subparsers(dest="command", required=True, parser_class=_Parser)
    gen = plan_sub.add_parser("generate", help="build a k-coverage plan")
    gen.add_argument("--model", required=True)
    _add_requirement_flags(gen)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", help="plan CSV path (stdout if omitted)")
    gen.set_defaults(func=cmd_plan_generate)
    ver = plan_sub.add_parser("verify", help="check a plan's coverage")
    ver.add_argument("--model", required=True)
    ver.add_argument("--plan", required=True)
    _add_requirement_flags(ver)
    ver.set_defaults(func=cmd_plan_verify)

    analyze = top.add_parser("analyze", help="statistics on scored plans")
    an_sub = analyze.add_subparsers(dest="command", required=True, parser_class=_Parser)
    pw = an_sub.add_parser("pairwise", help="all-pairs proportion tests, Holm-Sidak adjusted")
    pw.add_argument("--plan", required=True)
    pw.add_argument("--scores", required=True)
    pw.add_argument("--alpha", type=float, default=0.05)
    pw.add_argument("--out", required=True, help="output directory")
    pw.add_argument("--no-figures", action="store_true")
    pw.set_defaults(func=cmd_analyze_pairwise)
    rg = an_sub.add_parser("regression", help="logistic regression with coefficient/Wald tables")
    rg.add_argument("--model", required=True)
    rg.add_argument("--plan", required=True)
    rg.add_argument("--scores", required=True)
    rg.add_argument("--interactions", type=int, choices=(1, 2), default=1)
    rg.add_argument("--out", required=True, help="output directory")
    rg.add_argument("--no-figures", action="store_true")
    rg.set_defaults(func=cmd_analyze_regression)

    sim = top.add_parser("simulate", help="synthetic scores for a merged multi-seed plan")
    sim.add_argument("--model", required=True)
    _add_requirement_flags(sim, strength_required=False)
    sim.add_argument("--generations", type=int, default=20)
    sim.add_argument("--samples", type=int, default=30)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--effects", help="JSON map of design column -> log-odds coefficient")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--no-figures", action="store_true")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CovplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
