"""Score-matrix CSVs, the run-report JSON, and the grouped-bar / summary charts."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

import numpy as np

from . import ingest as sch
from . import plotting
from .errors import BlindRedactError, DataError
from .evaluate import RNG_ALGORITHM, CVResult, EvalConfig, BinningConfig
from .redact import METRICS, STATISTICS, RedactionMatrix, RedactionPlan, added_value_deltas, triple_from_dict
from .table import Table

NA = "N/A"
DECIMALS = {"accuracy": 2, "kappa": 3}
STAT_LABELS = {"minus": "-", "plus": "+", "mikro": "MIKRO"}
CELL_SEED_RULE = "first 8 bytes (big-endian) of sha256(json.dumps([seed, blind, target]))"


class ReportError(BlindRedactError):
    """A run report that cannot be turned back into a matrix."""


def format_value(metric: str, value: float) -> str:
    return f"{value:.{DECIMALS[metric]}f}"


def matrix_csv_text(matrix: RedactionMatrix, metric: str, statistic: str) -> str:
    plan = matrix.plan
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["", f"{metric.capitalize()} {STAT_LABELS[statistic]}", *plan.target_labels])
    for label, row in zip(plan.blind_labels, matrix.grid(metric, statistic)):
        writer.writerow(["BLIND", label, *(NA if v is None else format_value(metric, v) for v in row)])
    return buf.getvalue()


def emit_matrix_csv(matrix: RedactionMatrix, metric: str, statistic: str, path: str | Path) -> Path:
    """One statistic of one metric as a blind x target grid; N/A on matching pairs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(matrix_csv_text(matrix, metric, statistic), encoding="utf-8")
    return path


def read_matrix_csv(path: str | Path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {
        "corner": header[1],
        "targets": header[2:],
        "blind": [r[1] for r in body],
        "values": [[None if v == NA else float(v) for v in r[2:]] for r in body],
    }


def emit_all_matrices(matrix: RedactionMatrix, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        emit_matrix_csv(matrix, m, s, out_dir / f"{m}_{s}.csv")
        for m in METRICS for s in STATISTICS
    ]


# ---------------------------------------------------------------- run report


def _cell_dict(result: CVResult) -> dict:
    return {
        "accuracy": result.accuracy.to_dict(),
        "kappa": result.kappa.to_dict(),
        "features": list(result.features),
        "per_fold": result.per_fold,
    }


def summary_aggregates(matrix: RedactionMatrix) -> dict:
    cells = [r for _, _, r in matrix.computed()]
    return {
        "n_cells": len(cells),
        "mean_accuracy_mikro": math.fsum(r.accuracy.mikro for r in cells) / len(cells) if cells else None,
        "mean_kappa_mikro": math.fsum(r.kappa.mikro for r in cells) / len(cells) if cells else None,
    }


def build_report(matrix: RedactionMatrix, baseline: Mapping[str, CVResult], config: dict,
                 dataset: dict, timestamp: str | None = None) -> dict:
    """Assemble the run report.

    ``config`` is the echoed run configuration; ``dataset`` the input
    fingerprint.  The run id hashes those two (less the output location), so
    repeated runs differ in the timestamp alone.
    """
    plan = matrix.plan
    keyed = {k: v for k, v in config.items() if k != "output_dir"}
    run_id = hashlib.sha256(json.dumps([keyed, dataset], sort_keys=True).encode("utf-8")).hexdigest()[:16]
    deltas = added_value_deltas(matrix, baseline) if baseline else {}
    return {
        "run_id": run_id,
        "timestamp": timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config,
        "evaluation": plan.config.to_dict(),
        "rng": {"algorithm": RNG_ALGORITHM, "cell_seed_rule": CELL_SEED_RULE},
        "dataset": dataset,
        "plan": plan.to_dict(),
        "cells": [
            {"blind": b, "target": t, **({"na": True} if r is None else _cell_dict(r))}
            for (b, t), r in matrix.cells.items()
        ],
        "baseline": [{"blind": None, "target": t, **_cell_dict(r)} for t, r in baseline.items()],
        "deltas": [{"blind": b, "target": t, **d} for (b, t), d in deltas.items()],
        "summary": summary_aggregates(matrix),
    }


def report_json_text(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1, ensure_ascii=False, allow_nan=False) + "\n"


def emit_run_json(report: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_json_text(report), encoding="utf-8")
    return path


def _result_from_dict(target: str, d: dict) -> CVResult:
    if not isinstance(d.get("per_fold"), list) or not d["per_fold"]:
        raise ReportError(f"report cell for target {target!r} lacks per-fold scores")
    return CVResult(target, list(d.get("features", [])), triple_from_dict(d["accuracy"]),
                    triple_from_dict(d["kappa"]), d["per_fold"])


def matrix_from_report(report: dict) -> tuple[RedactionMatrix, dict[str, CVResult]]:
    """Rebuild the matrix and baseline from a parsed run report."""
    try:
        p = report["plan"]
        ev = report["evaluation"]
        config = EvalConfig(ev["k"], ev["seed"], ev["alpha"], BinningConfig(**ev["binning"]))
        plan = RedactionPlan(tuple(p["blind"]), tuple(p["targets"]), config,
                             tuple(p["blind_labels"]), tuple(p["target_labels"]),
                             {t: tuple(v) for t, v in p.get("exclude", {}).items()})
        cells = {}
        for c in report["cells"]:
            cells[(c["blind"], c["target"])] = None if c.get("na") else _result_from_dict(c["target"], c)
        baseline = {c["target"]: _result_from_dict(c["target"], c) for c in report.get("baseline", [])}
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportError(f"malformed run report: {exc!r}") from exc
    missing = [(b, t) for b in plan.blind for t in plan.targets if (b, t) not in cells]
    if missing:
        raise ReportError(f"run report lacks cells {missing[:5]}")
    return RedactionMatrix(plan, cells), baseline


def load_report(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ReportError(f"cannot read run report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ReportError(f"run report {path} is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------- charts


def short_label(label: str) -> str:
    """Chart shorthand: "per Discharge" -> "PP", "Facility Total X" -> "X Total"."""
    out = label.replace(" per Discharge", " PP")
    if out.lower().startswith("facility total "):
        out = out[len("facility total "):] + " Total"
    return out


CHARTS = (
    ("graph2_accuracy_by_target", "accuracy", "target"),
    ("graph3_kappa_by_target", "kappa", "target"),
    ("graph4_accuracy_by_blind", "accuracy", "blind"),
    ("graph5_kappa_by_blind", "kappa", "blind"),
)

TITLES = {
    ("accuracy", "target"): "Effects of values (top) when blinded (bottom): accuracy range",
    ("kappa", "target"): "Effects of values (top) when blinded (bottom): kappa range",
    ("accuracy", "blind"): "Effects of values (bottom) when blinded (top): accuracy",
    ("kappa", "blind"): "Effects of values (bottom) when blinded (top): kappa",
}


def bar_groups(matrix: RedactionMatrix, baseline: Mapping[str, CVResult], metric: str, group_by: str) -> list[dict]:
    """Ordered bar groups, one per computed cell, grouped by target or by blinded column."""
    plan = matrix.plan
    blind_label = dict(zip(plan.blind, plan.blind_labels))
    target_label = dict(zip(plan.targets, plan.target_labels))
    if group_by == "target":
        order = [(b, t) for t in plan.targets for b in plan.blind]
    elif group_by == "blind":
        order = [(b, t) for b in plan.blind for t in plan.targets]
    else:
        raise ValueError(f"group_by must be 'target' or 'blind', got {group_by!r}")
    groups = []
    for b, t in order:
        r = matrix.cells[(b, t)]
        if r is None:
            continue
        triple = getattr(r, metric)
        base = baseline.get(t)
        groups.append({
            "blind": b, "target": t,
            "blind_label": blind_label[b], "target_label": target_label[t],
            "minus": triple.minus, "plus": triple.plus, "mikro": triple.mikro,
            "baseline_mikro": None if base is None else getattr(base, metric).mikro,
        })
    return groups


def _groups_csv(groups: list[dict], path: Path) -> Path:
    fields = ["position", "blind", "target", "minus", "plus", "mikro", "baseline_mikro"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for i, g in enumerate(groups):
        writer.writerow([i, g["blind_label"], g["target_label"],
                         *(("" if g[k] is None else repr(g[k])) for k in fields[3:])])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _bar_chart(groups: list[dict], metric: str, group_by: str, path: Path) -> Path:
    with plotting.style():
        fig, ax = plotting.new_figure(width=max(6.0, 0.22 * len(groups) + 2.0), height=4.5)
        x = np.arange(len(groups))
        width = 0.27
        for j, stat in enumerate(STATISTICS):
            bars = ax.bar(x + (j - 1) * width, [g[stat] for g in groups], width,
                          color=plotting.TRIPLE_COLORS[j], label=f"{STAT_LABELS[stat]}")
            for bar, g in zip(bars, groups):
                bar.set_gid(f"{metric}|{g['blind']}|{g['target']}|{stat}")
        base = [(i, g["baseline_mikro"]) for i, g in enumerate(groups) if g["baseline_mikro"] is not None]
        if base:
            ax.scatter([i for i, _ in base], [v for _, v in base], marker="_", s=60, color="black",
                       zorder=3, label="no blind (MIKRO)")
        if group_by == "target":
            ticks = [f"{short_label(g['target_label'])} | {short_label(g['blind_label'])}" for g in groups]
        else:
            ticks = [f"{short_label(g['blind_label'])} | {short_label(g['target_label'])}" for g in groups]
        ax.set_xticks(x)
        ax.set_xticklabels(ticks, rotation=90)
        ax.set_xlim(-0.6, len(groups) - 0.4)
        if metric == "accuracy":
            ax.set_ylim(0, 100)
            ax.set_ylabel("accuracy (%)")
        else:
            ax.set_ylim(-1, 1)
            ax.axhline(0, color="black", linewidth=0.6)
            ax.set_ylabel("kappa")
        first, second = ("value", "blinded") if group_by == "target" else ("blinded", "value")
        ax.set_xlabel(f"{first} | {second}   (PP = per discharge / per person)")
        ax.set_title(TITLES[(metric, group_by)])
        ax.legend(title="fold score", loc="upper left", bbox_to_anchor=(1.0, 1.0))
        return plotting.save(fig, path)


def emit_charts(matrix: RedactionMatrix, baseline: Mapping[str, CVResult], out_dir: str | Path) -> list[Path]:
    """Four grouped-bar SVGs (plus a CSV of each chart's bar values).

    The by-target and by-blind charts of a metric hold the same bars in a
    different order.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create chart directory {out_dir}: {exc}") from exc
    paths = []
    for stem, metric, group_by in CHARTS:
        groups = bar_groups(matrix, baseline, metric, group_by)
        paths.append(_bar_chart(groups, metric, group_by, out_dir / f"{stem}.svg"))
        _groups_csv(groups, out_dir / f"{stem}.csv")
    return paths


SUMMARY_SERIES = (sch.TOTAL_CHARGE, sch.TOTAL_PAYMENT, sch.TOTAL_LOSS)


def summary_series(table: Table) -> dict:
    """Per-transaction series, inpatient rows first, then outpatient, each in input order."""
    flags = table.column(sch.INOROUT).values
    is_out = np.array([f == "OUT" for f in flags], dtype=bool)
    order = np.argsort(is_out, kind="stable")
    series = {name: table.column(name).values[order] for name in (*SUMMARY_SERIES, sch.DISCHARGES)}
    return {"order": order, "n_inpatient": int((~is_out).sum()), **series}


def emit_summary_chart(table: Table, out_path: str | Path) -> dict:
    """Facility totals and discharges per transaction; returns the plotted series."""
    data = summary_series(table)
    x = np.arange(len(data["order"]))
    with plotting.style():
        fig, ax = plotting.new_figure(width=10.0, height=4.5)
        for name, color in zip(SUMMARY_SERIES, ("#4f81bd", "#9bbb59", "#c0504d")):
            ax.plot(x, data[name], linewidth=0.5, color=color, label=name)
        ax.set_ylabel("USD")
        ax.set_xlabel("facility-DRG transaction (inpatient, then outpatient)")
        twin = ax.twinx()
        twin.plot(x, data[sch.DISCHARGES], linewidth=0.5, color="#7f7f7f", label=sch.DISCHARGES)
        twin.set_ylabel("discharges")
        if 0 < data["n_inpatient"] < len(x):
            ax.axvline(data["n_inpatient"] - 0.5, color="black", linewidth=0.6, linestyle="--")
        handles = ax.get_legend_handles_labels()
        extra = twin.get_legend_handles_labels()
        ax.legend(handles[0] + extra[0], handles[1] + extra[1], loc="upper left")
        ax.set_title("Total charges, payments, loss and discharges by facility-DRG transaction")
        plotting.save(fig, out_path)
    return data
