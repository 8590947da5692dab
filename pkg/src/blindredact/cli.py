"""Command line: ``blindredact {ingest,run,report,synth}``.

Exit status: 0 success, 2 configuration error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import ingest, report, synth
from .errors import ConfigError, DataError
from .evaluate import BinningConfig, EvalConfig, Prepared
from .redact import CellError, RedactionPlan, plan_default_medicare, run_plan
from .table import CsvFormat, read_table, table_fingerprint, write_table

logger = logging.getLogger("blindredact")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
OUT_DIR_ENV = "BLINDREDACT_OUT"
MEDICARE_DEFAULT = "medicare-default"

_CONFIG_KEYS = {"data", "categorical", "plan", "k", "seed", "alpha", "binning",
                "exclude_siblings", "baseline", "output_dir", "delimiter"}


@dataclass
class RunConfig:
    data: Path
    plan: object = MEDICARE_DEFAULT
    categorical: list[str] | None = None
    k: int = 10
    seed: int = 2011
    alpha: float = 1.0
    binning: BinningConfig = field(default_factory=BinningConfig)
    exclude_siblings: bool = False
    baseline: bool = True
    output_dir: Path = Path("out")
    delimiter: str = ","

    @property
    def evaluation(self) -> EvalConfig:
        return EvalConfig(self.k, self.seed, self.alpha, self.binning)

    def categorical_columns(self) -> list[str]:
        if self.categorical is not None:
            return list(self.categorical)
        return list(ingest.CATEGORICAL_FIELDS) if self.plan == MEDICARE_DEFAULT else []

    def echo(self) -> dict:
        """Every knob needed to reproduce the run (``--parallel`` excluded: it cannot change results)."""
        return {
            "data": str(self.data),
            "plan": self.plan,
            "categorical": self.categorical_columns(),
            "k": self.k,
            "seed": self.seed,
            "alpha": self.alpha,
            "binning": {"method": self.binning.method, "k_bins": self.binning.k_bins,
                        "fit_scope": self.binning.fit_scope},
            "exclude_siblings": self.exclude_siblings,
            "baseline": self.baseline,
            "output_dir": str(self.output_dir),
            "delimiter": self.delimiter,
        }


def load_run_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Read a JSON run config; relative paths resolve against the config's directory.

    ``overrides`` (from flags) win over file values; the output directory can
    also come from ``$BLINDREDACT_OUT`` (flag > environment > file).
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    if "data" not in raw:
        raise ConfigError("config lacks 'data'")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    binning_raw = dict(raw.get("binning", {}))
    for key in ("method", "k_bins", "fit_scope"):
        if key in overrides:
            binning_raw[key] = overrides.pop(key)
    if os.environ.get(OUT_DIR_ENV) and "output_dir" not in overrides:
        overrides["output_dir"] = os.environ[OUT_DIR_ENV]
    # flag / environment paths are relative to the working directory
    if "output_dir" in overrides:
        overrides["output_dir"] = str(Path(overrides["output_dir"]).resolve())
    merged = {**raw, **overrides}
    base = path.parent

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else (base / p).resolve()

    try:
        binning = BinningConfig(**binning_raw)
    except TypeError as exc:
        raise ConfigError(f"bad binning section: {exc}") from exc
    plan = merged.get("plan", MEDICARE_DEFAULT)
    if plan != MEDICARE_DEFAULT:
        if not isinstance(plan, dict) or not {"blind", "targets"} <= set(plan):
            raise ConfigError(f"plan must be {MEDICARE_DEFAULT!r} or an object with 'blind' and 'targets'")
    cfg = RunConfig(
        data=resolve(merged["data"]),
        plan=plan,
        categorical=merged.get("categorical"),
        k=merged.get("k", 10),
        seed=merged.get("seed", 2011),
        alpha=float(merged.get("alpha", 1.0)),
        binning=binning,
        exclude_siblings=bool(merged.get("exclude_siblings", False)),
        baseline=bool(merged.get("baseline", True)),
        output_dir=resolve(merged.get("output_dir", "out")),
        delimiter=merged.get("delimiter", ","),
    )
    cfg.evaluation  # validates k / seed / alpha
    if not cfg.data.is_file():
        raise ConfigError(f"data file {cfg.data} does not exist")
    return cfg


def build_plan(cfg: RunConfig, names: list[str]) -> RedactionPlan:
    if cfg.plan == MEDICARE_DEFAULT:
        return plan_default_medicare(names, cfg.evaluation, cfg.exclude_siblings)
    p = cfg.plan
    blind = p["blind"] if p["blind"] != "all" else names
    targets = p["targets"] if p["targets"] != "all" else names
    plan = RedactionPlan(tuple(blind), tuple(targets), cfg.evaluation,
                         tuple(p["blind_labels"]) if "blind_labels" in p else None,
                         tuple(p["target_labels"]) if "target_labels" in p else None,
                         {t: tuple(v) for t, v in p.get("exclude", {}).items()})
    plan.check(names)
    return plan


def cmd_ingest(args) -> int:
    mapping = ingest.load_mapping(args.mapping)
    fmt = CsvFormat(delimiter=args.delimiter, encoding=args.encoding)
    tables = []
    for side, path in (("inpatient", args.inpatient), ("outpatient", args.outpatient)):
        categorical = [mapping[side][f] for f in ingest.SOURCE_FIELDS if f in ingest.CATEGORICAL_FIELDS]
        tables.append(read_table(path, fmt, categorical=categorical, name=side))
    joined = ingest.harmonize_join(tables[0], tables[1], mapping)
    derived, drops = ingest.derive_columns(joined)
    out = write_table(derived, args.out)
    drop_path = Path(str(out) + ".drops.txt")
    drop_path.write_text(drops.to_text(), encoding="utf-8")
    validation = ingest.validate_schema(derived)
    for r in validation.results:
        logger.info("invariant %s: %s (%d violations)", r.name, "pass" if r.passed else "FAIL", r.violations)
    print(f"wrote {derived.row_count} rows to {out} ({drops.total_dropped} dropped, see {drop_path})")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_run_config(args.config, {
        "seed": args.seed, "k": args.k, "alpha": args.alpha, "output_dir": args.out,
        "k_bins": args.bins, "fit_scope": args.fit_scope, "method": args.method,
    })
    if args.parallel < 1:
        raise ConfigError("--parallel must be >= 1")
    table = read_table(cfg.data, CsvFormat(delimiter=cfg.delimiter), categorical=cfg.categorical_columns())
    plan = build_plan(cfg, table.names)
    prepared = Prepared.from_table(table.select(plan.columns))
    matrix, baseline = run_plan(prepared, plan, parallel=args.parallel, baseline=cfg.baseline)

    out = cfg.output_dir
    paths = report.emit_all_matrices(matrix, out)
    if baseline:
        paths.append(_emit_baseline_csv(baseline, plan, out / "baseline.csv"))
    dataset = table_fingerprint(table)
    dataset["file_sha256"] = _file_sha256(cfg.data)
    run = report.build_report(matrix, baseline, cfg.echo(), dataset)
    paths.append(report.emit_run_json(run, out / "run.json"))
    s = run["summary"]
    print(f"{s['n_cells']} cells; mean accuracy MIKRO {s['mean_accuracy_mikro']:.2f}, "
          f"mean kappa MIKRO {s['mean_kappa_mikro']:.3f}")
    for p in paths:
        print(p)
    return EXIT_OK


def _file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _emit_baseline_csv(baseline: dict, plan: RedactionPlan, path: Path) -> Path:
    labels = dict(zip(plan.targets, plan.target_labels))
    lines = ["target,accuracy -,accuracy +,accuracy MIKRO,kappa -,kappa +,kappa MIKRO"]
    for t, r in baseline.items():
        a, k = r.accuracy, r.kappa
        values = [report.format_value("accuracy", v) for v in (a.minus, a.plus, a.mikro)]
        values += [report.format_value("kappa", v) for v in (k.minus, k.plus, k.mikro)]
        name = labels[t]
        lines.append(",".join([f'"{name}"' if "," in name else name, *values]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def cmd_report(args) -> int:
    run = report.load_report(args.run_json)
    matrix, baseline = report.matrix_from_report(run)
    out = Path(args.out_dir)
    paths = report.emit_charts(matrix, baseline, out)
    if args.table:
        table = read_table(args.table, categorical=ingest.CATEGORICAL_FIELDS)
        missing = [c for c in ingest.SCHEMA_COLUMNS if c not in table]
        if missing:
            raise DataError(f"{args.table} is not a derived transaction table; lacks {missing}")
        path = out / "graph1_summary.svg"
        report.emit_summary_chart(table, path)
        paths.insert(0, path)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.medicare_like is not None:
        table = synth.medicare_like(args.medicare_like, seed=args.seed)
    elif args.spec:
        spec = synth.load_spec(args.spec)
        table = synth.generate(spec)
    else:
        raise ConfigError("give a spec file or --medicare-like N")
    out = write_table(table, args.out)
    print(f"wrote {table.row_count} rows x {len(table.columns)} columns to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blindredact", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="join inpatient/outpatient files and derive the analysis table")
    p.add_argument("inpatient")
    p.add_argument("outpatient")
    p.add_argument("mapping", help="JSON column-name correspondence")
    p.add_argument("out", help="derived table (CSV); a .drops.txt report is written next to it")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--encoding", default="utf-8")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="run the redaction grid from a JSON config")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, help="cross-validation folds")
    p.add_argument("--alpha", type=float)
    p.add_argument("--bins", type=int, dest="bins", help="bins per numeric column")
    p.add_argument("--method", choices=["equal-frequency", "equal-width"])
    p.add_argument("--fit-scope", choices=["fold", "global"])
    p.add_argument("--out", help=f"output directory (else ${OUT_DIR_ENV}, else the config)")
    p.add_argument("--parallel", type=int, default=1, help="concurrent cells; never changes results")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="draw charts from a run report")
    p.add_argument("run_json")
    p.add_argument("out_dir")
    p.add_argument("--table", help="derived transaction table, for the summary chart")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic table")
    p.add_argument("spec", nargs="?", help="JSON synth spec")
    p.add_argument("out")
    p.add_argument("--medicare-like", type=int, metavar="N", help="N rows with Medicare-like cardinalities")
    p.add_argument("--seed", type=int, default=2011)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc.cause, DataError) else EXIT_INTERNAL
    except (DataError, report.ReportError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
