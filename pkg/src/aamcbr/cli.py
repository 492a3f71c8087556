"""Command-line interface.

Typical offline run::

    aamcbr gen-scenarios --out runs/demo
    aamcbr gen-testsets --out runs/demo --testsets 50 --seed 1
    aamcbr run-coverage --out runs/demo --backend noisy --noise-flip 0.15
    aamcbr run-extraction --out runs/demo --backend noisy --noise-omit 0.1
    aamcbr run-predict --out runs/demo --backend noisy --noise-flip 0.15 --noise-omit 0.1
    aamcbr report --out runs/demo

Every flag can also be given in a TOML config file (``--config``) using the
flag name with underscores, e.g. ``noise_flip = 0.15``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .backends import CachingBackend, HttpBackend, NoisyOracleBackend, OracleBackend
from .datagen import (
    DEFAULT_MAX_ATTEMPTS,
    ScenarioPool,
    build_template_pool,
    dump_test_sets,
    generate_pool,
    generate_test_sets,
    load_test_sets,
)
from .domain import CREDIT_DOMAIN, FactorDomain
from .experiments import (
    STRATEGIES,
    MetricsTable,
    coverage_metrics,
    extraction_metrics,
    prediction_metrics,
    run_coverage_experiment,
    run_extraction_experiment,
    run_prediction_experiment,
)
from .prompts import Prompts
from .report import (
    emit_report,
    load_metrics,
    read_coverage_csv,
    read_extraction_csv,
    read_prediction_csv,
)

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

logger = logging.getLogger("aamcbr")


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return {k.replace("-", "_"): v for k, v in data.items()}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file with defaults for any flag")
    p.add_argument("--out", default="runs/default", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--domain", help="factor-domain JSON file (default: built-in credit domain)")
    p.add_argument("--prompts-dir", help="directory of prompt template overrides")
    p.add_argument("--pool", help="scenario pool file (default: <out>/scenarios.jsonl)")
    p.add_argument("--testsets-dir", help="test-set directory (default: <out>/testsets)")
    p.add_argument("-v", "--verbose", action="store_true")


def _backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=["oracle", "noisy", "http"], default="oracle")
    p.add_argument("--noise-flip", type=float, default=0.0)
    p.add_argument("--noise-omit", type=float, default=0.0)
    p.add_argument("--noise-add", type=float, default=0.0)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--concurrency", type=int, default=8)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--cache", help="response cache directory")
    p.add_argument("--endpoint", default="https://api.openai.com/v1/chat/completions")
    p.add_argument("--model", default="gpt-4o")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--request-log", help="JSON-lines request log for the http backend")


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aamcbr", description="AA-CBR / AAM-CBR experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenarios", help="build the scenario pool")
    _common(p)
    _backend_flags(p)
    p.add_argument("--max-attempts", type=int, default=DEFAULT_MAX_ATTEMPTS)

    p = sub.add_parser("gen-testsets", help="draw test sets from the scenario pool")
    _common(p)
    p.add_argument("--testsets", type=int, default=50, help="number of test sets")
    p.add_argument("--with-replacement", action="store_true")

    for name, helptext in (
        ("run-coverage", "case coverage experiment"),
        ("run-extraction", "case factor extraction experiment"),
        ("run-predict", "outcome prediction experiment"),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _backend_flags(p)
        if name == "run-predict":
            p.add_argument("--defaults", choices=["0", "1", "both"], default="both")
            p.add_argument("--strategies", nargs="+", choices=list(STRATEGIES), default=list(STRATEGIES))
            p.add_argument("--factorized-single-prompt", action="store_true")

    p = sub.add_parser("report", help="recompute metrics and tables from record CSVs")
    _common(p)

    if config:
        for sp in sub.choices.values():
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in config.items() if k in known})
    return parser


def _domain(args) -> FactorDomain:
    return FactorDomain.load(args.domain) if args.domain else CREDIT_DOMAIN


def _prompts(args) -> Prompts:
    return Prompts.from_dir(args.prompts_dir) if args.prompts_dir else Prompts.default()


def _pool_path(args) -> Path:
    return Path(args.pool) if args.pool else Path(args.out) / "scenarios.jsonl"


def _testsets_dir(args) -> Path:
    return Path(args.testsets_dir) if args.testsets_dir else Path(args.out) / "testsets"


def make_backend(args, truth_table: dict, domain: FactorDomain, prompts: Prompts):
    if args.backend == "oracle":
        backend = OracleBackend(truth_table, domain, prompts, composer_seed=args.seed)
    elif args.backend == "noisy":
        backend = NoisyOracleBackend(
            truth_table, domain, prompts,
            flip_prob=args.noise_flip, omit_prob=args.noise_omit, add_prob=args.noise_add,
            seed=args.noise_seed, composer_seed=args.seed,
        )
    else:
        backend = HttpBackend(
            args.endpoint, args.model, api_key_env=args.api_key_env, timeout=args.timeout,
            temperature=args.temperature, request_log=args.request_log,
        )
    if args.cache:
        backend = CachingBackend(backend, args.cache)
    return backend


def _existing_metrics(out: Path) -> MetricsTable:
    path = out / "metrics.json"
    return load_metrics(path) if path.exists() else MetricsTable()


def cmd_gen_scenarios(args) -> int:
    domain, prompts = _domain(args), _prompts(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.backend == "http":
        backend = make_backend(args, {}, domain, prompts)
        pool = generate_pool(backend, domain, args.max_attempts, args.concurrency, prompts)
    else:
        pool = build_template_pool(domain, seed=args.seed)
    pool.dump(_pool_path(args))
    print(f"{len(pool)} scenarios, {len(pool.skipped)} skipped -> {_pool_path(args)}")
    return 0


def cmd_gen_testsets(args) -> int:
    domain = _domain(args)
    pool = ScenarioPool.load(_pool_path(args), domain)
    sets = generate_test_sets(pool, args.testsets, seed=args.seed, with_replacement=args.with_replacement)
    dump_test_sets(sets, _testsets_dir(args), domain)
    print(f"{len(sets)} test sets -> {_testsets_dir(args)}")
    return 0


def _load_inputs(args):
    domain, prompts = _domain(args), _prompts(args)
    pool = ScenarioPool.load(_pool_path(args), domain)
    test_sets = load_test_sets(_testsets_dir(args), domain)
    if not test_sets:
        raise SystemExit(f"no test sets found in {_testsets_dir(args)}")
    backend = make_backend(args, pool.truth_table(), domain, prompts)
    return pool, test_sets, backend, prompts


def cmd_run_coverage(args) -> int:
    pool, test_sets, backend, prompts = _load_inputs(args)
    records, metrics = run_coverage_experiment(
        backend, test_sets, pool, concurrency=args.concurrency, max_retries=args.max_retries, prompts=prompts
    )
    out = Path(args.out)
    table = _existing_metrics(out).merge(MetricsTable(coverage=metrics))
    emit_report(out, table, coverage=records)
    print((out / "tables.txt").read_text(encoding="utf-8"))
    return 0


def cmd_run_extraction(args) -> int:
    pool, test_sets, backend, prompts = _load_inputs(args)
    out = Path(args.out)
    cov_path = out / "coverage.csv"
    if cov_path.exists():
        coverage = read_coverage_csv(cov_path)
    else:
        coverage, cov_metrics = run_coverage_experiment(
            backend, test_sets, pool, concurrency=args.concurrency, max_retries=args.max_retries, prompts=prompts
        )
    records, metrics = run_extraction_experiment(
        backend, coverage, test_sets, pool,
        concurrency=args.concurrency, max_retries=args.max_retries, prompts=prompts,
    )
    table = _existing_metrics(out).merge(
        MetricsTable(coverage=coverage_metrics(coverage), extraction=metrics)
    )
    emit_report(out, table, coverage=None if cov_path.exists() else coverage, extraction=records)
    print((out / "tables.txt").read_text(encoding="utf-8"))
    return 0


def cmd_run_predict(args) -> int:
    pool, test_sets, backend, prompts = _load_inputs(args)
    defaults = (0, 1) if args.defaults == "both" else (int(args.defaults),)
    records, metrics = run_prediction_experiment(
        backend, test_sets, pool,
        defaults=defaults, strategies=args.strategies,
        factorized_single_prompt=args.factorized_single_prompt,
        concurrency=args.concurrency, max_retries=args.max_retries, prompts=prompts,
    )
    out = Path(args.out)
    emit_report(out, _existing_metrics(out).merge(MetricsTable(prediction=metrics)), predictions=records)
    print((out / "tables.txt").read_text(encoding="utf-8"))
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    table = MetricsTable()
    if (out / "coverage.csv").exists():
        table.coverage = coverage_metrics(read_coverage_csv(out / "coverage.csv"))
    if (out / "extraction.csv").exists():
        table.extraction = extraction_metrics(read_extraction_csv(out / "extraction.csv"))
    if (out / "predictions.csv").exists():
        table.prediction = prediction_metrics(read_prediction_csv(out / "predictions.csv"))
    emit_report(out, table)
    print((out / "tables.txt").read_text(encoding="utf-8"))
    return 0


COMMANDS = {
    "gen-scenarios": cmd_gen_scenarios,
    "gen-testsets": cmd_gen_testsets,
    "run-coverage": cmd_run_coverage,
    "run-extraction": cmd_run_extraction,
    "run-predict": cmd_run_predict,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    config = load_config(known.config) if known.config else None
    args = build_parser(config).parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
