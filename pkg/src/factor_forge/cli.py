"""Command-line front end: ``mine``, ``eval``, ``validate``, ``synth`` and ``report``.

Exit codes: 0 ok, 1 rejected formula or missing selection, 2 config error,
3 data error, 4 generator exhausted, 5 leakage guard.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

from factor_forge import __version__
from factor_forge.config import ConfigError, RunConfig, load_config

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_GENERATOR = 4
EXIT_LEAKAGE = 5

log = logging.getLogger("factor_forge")


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _config_flag_type(f: dataclasses.Field) -> Any:
    hint = str(f.type)
    if "bool" in hint:
        return bool
    if "int" in hint:
        return int
    if "float" in hint:
        return float
    return str


def _add_config_overrides(parser: argparse.ArgumentParser) -> None:
    """One flag per RunConfig field, so every setting is overridable and echoed into the manifest."""
    group = parser.add_argument_group("run configuration overrides")
    for f in dataclasses.fields(RunConfig):
        if f.name in ("scoring", "seed", "output_root"):
            continue
        flag = "--" + f.name.replace("_", "-")
        kind = _config_flag_type(f)
        if kind is bool:
            group.add_argument(flag, dest=f"cfg_{f.name}", action=argparse.BooleanOptionalAction, default=None)
        else:
            group.add_argument(flag, dest=f"cfg_{f.name}", type=kind, default=None, metavar=f.name.upper())
    group.add_argument("--data", dest="cfg_data_path", default=None, help="alias of --data-path")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="output location (meaning depends on the command)")
    parser.add_argument("--verbose", "-v", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="factor-forge", description="Sandboxed alpha-factor mining and evaluation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    mine = sub.add_parser("mine", help="run a mining session")
    _common(mine)
    _add_config_overrides(mine)
    mine.add_argument("--resume", metavar="RUN_DIR", help="continue an interrupted run")

    ev = sub.add_parser("eval", help="evaluate one formula")
    _common(ev)
    ev.add_argument("formula")
    ev.add_argument("--data", dest="data_path")
    ev.add_argument("--universe")
    ev.add_argument("--start")
    ev.add_argument("--end")
    ev.add_argument("--horizon", type=int)
    ev.add_argument("--min-assets", type=int)
    ev.add_argument("--buckets", type=int)

    val = sub.add_parser("validate", help="evaluate a frozen selection on a later holdout panel")
    _common(val)
    val.add_argument("run_dir")
    val.add_argument("--data", dest="data_path", required=True, help="holdout panel CSV")
    val.add_argument("--universe")
    val.add_argument("--start")
    val.add_argument("--end")
    val.add_argument("--tag")

    syn = sub.add_parser("synth", help="write a synthetic panel with a planted signal")
    _common(syn)
    syn.add_argument("--assets", type=int, default=50)
    syn.add_argument("--dates", type=int, default=300)
    syn.add_argument("--beta", type=float, default=0.05)
    syn.add_argument("--sigma", type=float, default=1.0)
    syn.add_argument("--hidden", default="close", choices=("close", "range"))
    syn.add_argument("--start", default="2022-01-03")

    rep = sub.add_parser("report", help="regenerate reports from a run directory")
    _common(rep)
    rep.add_argument("run_dir")
    return parser


def _setup_logging(verbose: int) -> None:
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_root"] = args.out
    return cfg.with_overrides(**overrides).validate()


# -- commands --------------------------------------------------------------------


def cmd_mine(args: argparse.Namespace) -> int:
    from factor_forge.mining import GeneratorError, resume_run, run_mining
    from factor_forge.mining.loop import load_run_panel
    from factor_forge.panel import DataError
    from factor_forge.store import format_round_table

    def progress(result: Any) -> None:
        best = "-" if result.best_score is None else f"{result.best_score:.4f}"
        print(
            f"round {result.round_index}: candidates {result.candidates}, evaluated {result.evaluated}, "
            f"ok {result.ok}, errors {result.errors}, best {best}",
            file=sys.stderr,
        )

    try:
        if args.resume:
            summary = resume_run(args.resume, on_round=progress)
        else:
            config = _resolve_config(args)
            panel = load_run_panel(config)
            summary = run_mining(config, panel=panel, on_round=progress)
    except (DataError, FileNotFoundError) as exc:
        raise CliError(f"data error: {exc}", EXIT_DATA) from exc
    except GeneratorError as exc:
        raise CliError(f"generator error: {exc}", EXIT_GENERATOR) from exc
    print(format_round_table({"rounds": summary.rounds, "totals": summary.totals}))
    if summary.selection:
        print()
        print("Selected factors:")
        for s in summary.selection:
            print(f"  {s['id']:<30} {s['score']:>9.4f}  {s['formula']}")
    else:
        print("\nNo candidate was accepted; nothing selected.")
    print(f"\nrun directory: {summary.run_dir}")
    return EXIT_OK


def _fmt(x: float, digits: int = 4) -> str:
    return "-" if x is None or not math.isfinite(x) else f"{x:.{digits}f}"


def format_eval_report(formula: str, key: str, family: str, report: Any) -> str:
    c = report.complexity
    a = report.alignment
    lines = [
        f"formula      {formula}",
        f"key          {key}",
        f"family       {family}",
        f"complexity   depth {c.depth}, nodes {c.node_count}, operators {c.operator_count}, windows {c.window_count}",
        f"alignment    coverage {_fmt(a.coverage)}, drop ratio {_fmt(a.drop_ratio)}, dates {a.valid_dates}",
        "",
        f"{'':<12}{'mean':>10}{'IR(ann)':>10}{'t(HAC)':>12}{'p':>9}",
    ]
    for label, agg, hac in (("rank IC", report.rank_ic_agg, report.rank_ic_hac), ("IC", report.ic_agg, report.ic_hac)):
        lines.append(f"{label:<12}{_fmt(agg.mean):>10}{_fmt(agg.ir_annual, 3):>10}{_fmt(hac.t, 2) + hac.stars:>12}{_fmt(hac.p):>9}")
    ls = report.long_short_hac
    lines.append(
        f"{'long-short':<12}{_fmt(report.buckets.long_short_mean, 6):>10}{'':>10}{_fmt(ls.t, 2) + ls.stars:>12}{_fmt(ls.p):>9}"
    )
    lines.append(f"turnover     top-decile {_fmt(report.turnover.top_decile)}, rank {_fmt(report.turnover.rank)}")
    lines.append(f"HAC lag      {report.ic_hac.lag} over {report.ic_hac.n} dates")
    means = ", ".join(_fmt(m, 6) for m in report.buckets.bucket_means)
    lines.append(f"bucket means {means}")
    lines.append("* p<0.05, ** p<0.01, *** p<0.001")
    return "\n".join(lines)


def cmd_eval(args: argparse.Namespace) -> int:
    from factor_forge.corpus import load_corpus, negative_templates
    from factor_forge.dsl import FormulaSyntaxError, canonicalize, classify_family, parse_formula, validate
    from factor_forge.evaluation import DegenerateFactor, assess
    from factor_forge.mining.loop import load_run_registry
    from factor_forge.panel import DataError, forward_returns, load_panel
    from factor_forge.scoring import score_candidate
    from factor_forge.store import dumps, factor_artifact

    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {
        "data_path": args.data_path,
        "universe_path": args.universe,
        "start": args.start,
        "end": args.end,
        "horizon": args.horizon,
        "min_assets": args.min_assets,
        "buckets": args.buckets,
    }
    cfg = cfg.with_overrides(**overrides).validate()
    registry = load_run_registry(cfg)
    try:
        ast = parse_formula(args.formula)
    except FormulaSyntaxError as exc:
        print(f"rejected at parse: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    verdict = validate(ast, registry)
    if not verdict.accepted:
        print(f"rejected at {verdict.failed_layer.value} layer: {'; '.join(verdict.reasons)}", file=sys.stderr)
        return EXIT_REJECTED
    if not cfg.data_path:
        raise CliError("eval needs --data", EXIT_CONFIG)
    try:
        panel = load_panel(cfg.data_path, cfg.universe_path, cfg.start, cfg.end)
    except (DataError, FileNotFoundError) as exc:
        raise CliError(f"data error: {exc}", EXIT_DATA) from exc
    try:
        report = assess(
            ast, panel, forward_returns(panel, cfg.horizon), registry=registry, min_assets=cfg.min_assets, buckets=cfg.buckets
        )
    except DegenerateFactor as exc:
        print(f"evaluation failed: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    key = canonicalize(ast)
    family = classify_family(ast)
    print(format_eval_report(str(ast), key, family.value, report))
    if args.out:
        negatives = negative_templates(load_corpus(cfg.corpus_path), registry)
        cand = score_candidate(str(ast), key, family, ast, report.metric_vector(), negatives, cfg.score_config())
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(dumps(factor_artifact(cand, report)) + "\n", encoding="utf-8")
        print(f"\nartifact written to {out}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    from factor_forge.dsl import load_registry
    from factor_forge.panel import DataError, load_panel
    from factor_forge.store import (
        LeakageError,
        NoSelectionError,
        RunStore,
        RunStoreError,
        format_holdout_table,
        holdout_evaluate,
    )

    try:
        store = RunStore(args.run_dir)
    except RunStoreError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    try:
        panel = load_panel(args.data_path, args.universe, args.start, args.end)
    except (DataError, FileNotFoundError) as exc:
        raise CliError(f"data error: {exc}", EXIT_DATA) from exc
    registry_path = store.manifest.get("config", {}).get("registry_path")
    registry = load_registry(registry_path) if registry_path else None
    try:
        result = holdout_evaluate(store.path, panel, registry=registry, tag=args.tag)
    except LeakageError as exc:
        raise CliError(f"leakage guard: {exc}", EXIT_LEAKAGE) from exc
    except NoSelectionError as exc:
        raise CliError(f"no selection: {exc}", EXIT_REJECTED) from exc
    print(format_holdout_table(result))
    print(f"\nholdout tables written to {result['path']}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    from factor_forge.panel import write_panel_csv
    from factor_forge.synth import synth_panel

    if args.assets < 1 or args.dates < 2:
        raise CliError("synth needs --assets >= 1 and --dates >= 2", EXIT_CONFIG)
    try:
        panel = synth_panel(
            args.assets, args.dates, beta=args.beta, sigma=args.sigma, seed=args.seed or 0, hidden=args.hidden, start=args.start
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    out = Path(args.out or "panel.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_panel_csv(panel, out)
    print(f"wrote {args.dates} dates x {args.assets} assets to {out}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    from factor_forge.store import ReportError, RunStore, RunStoreError, emit_report, format_round_table, summarize_rounds

    try:
        paths = emit_report(args.run_dir)
    except ReportError as exc:
        raise CliError(str(exc), EXIT_REJECTED) from exc
    except RunStoreError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    print(format_round_table(summarize_rounds(RunStore(args.run_dir).read_rounds())))
    print()
    for name, path in paths.items():
        print(f"{name:<22} {path}")
    return EXIT_OK


COMMANDS = {"mine": cmd_mine, "eval": cmd_eval, "validate": cmd_validate, "synth": cmd_synth, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
