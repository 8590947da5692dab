"""Blind redaction: remove one column, re-measure how predictable every other column is.

For each (blinded column, target column) pair the blinded column is
physically removed, and cross-validated naive Bayes predicts the target from
whatever remains.  Cells where the blinded column is the target are N/A.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import ingest as sch
from .errors import BlindRedactError, ConfigError, DataError
from .evaluate import CVResult, EvalConfig, Prepared, ScoreTriple, cross_validate
from .table import Table

logger = logging.getLogger(__name__)

METRICS = ("accuracy", "kappa")
STATISTICS = ("minus", "plus", "mikro")

#: Medicare blind rows: (column, printed label), in printed order.
MEDICARE_BLIND = (
    (sch.CHARGE_PD, "Charge per Discharge"),
    (sch.TOTAL_CHARGE, "Facility Total Charge"),
    (sch.CITY, "CITY"),
    (sch.DISCHARGES, "DISCHARGE"),
    (sch.DRG, "DRG"),
    (sch.INOROUT, "INorOUTPT"),
    (sch.LOSS_PD, "Loss per Discharge"),
    (sch.TOTAL_LOSS, "Facility total Loss"),
    (sch.PAYMENT_PD, "Payment per Discharge"),
    (sch.TOTAL_PAYMENT, "Facility Total Payment"),
    (sch.PROVIDER, "PROVIDER"),
    (sch.STATE, "STATE"),
    (sch.ZIP, "ZIP"),
)
#: Medicare targets: (column, printed label), in printed order.
MEDICARE_TARGETS = (
    (sch.CHARGE_PD, "Charge per Discharge"),
    (sch.TOTAL_CHARGE, "Facility Total Charge"),
    (sch.DISCHARGES, "Discharges"),
    (sch.DRG, "DRG"),
    (sch.LOSS_PD, "Loss per Discharge"),
    (sch.TOTAL_LOSS, "Facility Total Loss"),
    (sch.PAYMENT_PD, "Payment per Discharge"),
    (sch.TOTAL_PAYMENT, "Facility Total Payment"),
    (sch.STATE, "State"),
    (sch.ZIP, "ZIP"),
)

# Columns tied by an arithmetic identity (loss = charge - payment, total = per-discharge x discharges).
_DERIVATION_FAMILIES = (
    {sch.CHARGE_PD, sch.PAYMENT_PD, sch.LOSS_PD},
    {sch.TOTAL_CHARGE, sch.TOTAL_PAYMENT, sch.TOTAL_LOSS},
    {sch.TOTAL_CHARGE, sch.CHARGE_PD, sch.DISCHARGES},
    {sch.TOTAL_PAYMENT, sch.PAYMENT_PD, sch.DISCHARGES},
    {sch.TOTAL_LOSS, sch.LOSS_PD, sch.DISCHARGES},
)
MEDICARE_SIBLINGS = {
    name: tuple(sorted(set().union(*(f for f in _DERIVATION_FAMILIES if name in f)) - {name}))
    for name in set().union(*_DERIVATION_FAMILIES)
}


class CellError(BlindRedactError):
    def __init__(self, blind, target, cause: BaseException):
        super().__init__(f"cell (blind={blind!r}, target={target!r}) failed: {cause}")
        self.blind = blind
        self.target = target
        self.cause = cause


@dataclass(frozen=True)
class RedactionPlan:
    blind: tuple[str, ...]
    targets: tuple[str, ...]
    config: EvalConfig = field(default_factory=EvalConfig)
    blind_labels: tuple[str, ...] | None = None
    target_labels: tuple[str, ...] | None = None
    #: target -> columns withheld from its features in every cell
    exclude: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "blind", tuple(self.blind))
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.blind_labels is None:
            object.__setattr__(self, "blind_labels", self.blind)
        if self.target_labels is None:
            object.__setattr__(self, "target_labels", self.targets)
        for names, labels in ((self.blind, self.blind_labels), (self.targets, self.target_labels)):
            if len(set(names)) != len(names):
                raise ConfigError(f"duplicate names in plan: {list(names)}")
            if len(labels) != len(names):
                raise ConfigError("plan labels do not match plan names")

    @property
    def columns(self) -> list[str]:
        """Every column the plan touches, blinds first, in plan order."""
        return list(dict.fromkeys([*self.blind, *self.targets]))

    def check(self, names: Sequence[str]) -> None:
        missing = [c for c in self.columns if c not in names]
        if missing:
            raise DataError(f"plan references columns absent from the data: {missing}")

    def reordered(self, blind: Sequence[str]) -> "RedactionPlan":
        labels = dict(zip(self.blind, self.blind_labels))
        return RedactionPlan(tuple(blind), self.targets, self.config,
                             tuple(labels[b] for b in blind), self.target_labels, self.exclude)

    def to_dict(self) -> dict:
        return {
            "blind": list(self.blind),
            "targets": list(self.targets),
            "blind_labels": list(self.blind_labels),
            "target_labels": list(self.target_labels),
            "exclude": {t: list(v) for t, v in sorted(self.exclude.items())},
        }


def plan_default_medicare(table: Table | Sequence[str], config: EvalConfig = EvalConfig(),
                          exclude_siblings: bool = False) -> RedactionPlan:
    """The 13 blinded x 10 target Medicare layout, rows and columns in printed order."""
    names = table.names if isinstance(table, Table) else list(table)
    plan = RedactionPlan(
        blind=tuple(n for n, _ in MEDICARE_BLIND),
        targets=tuple(n for n, _ in MEDICARE_TARGETS),
        config=config,
        blind_labels=tuple(label for _, label in MEDICARE_BLIND),
        target_labels=tuple(label for _, label in MEDICARE_TARGETS),
        exclude={t: MEDICARE_SIBLINGS.get(t, ()) for t, _ in MEDICARE_TARGETS} if exclude_siblings else {},
    )
    plan.check(names)
    return plan


def cell_seed(seed: int, blind: str | None, target: str) -> int:
    """Per-cell seed from the run seed and the two column names (None = no blind)."""
    key = json.dumps([seed, blind, target], ensure_ascii=False).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def run_cell(table: Table | Prepared, blind: str | None, target: str, config: EvalConfig = EvalConfig(),
             columns: Sequence[str] | None = None, exclude: Sequence[str] = ()) -> CVResult:
    """Cross-validate ``target`` on the table with ``blind`` removed.

    ``columns`` restricts the working set (default: all columns); ``blind``
    of None gives the unredacted baseline.
    """
    prepared = table if isinstance(table, Prepared) else Prepared.from_table(table)
    if blind == target:
        raise DataError(f"blind and target are both {target!r}")
    columns = list(prepared.names if columns is None else columns)
    for name in [target] + ([blind] if blind is not None else []):
        if name not in prepared or name not in columns:
            raise DataError(f"column {name!r} not present")
    reduced = prepared.select([c for c in columns if c != blind])
    features = [c for c in reduced.names if c != target and c not in exclude]
    return cross_validate(reduced, target, config.with_seed(cell_seed(config.seed, blind, target)), features)


@dataclass
class RedactionMatrix:
    plan: RedactionPlan
    cells: dict  # (blind, target) -> CVResult, or None on the N/A diagonal

    def cell(self, blind: str, target: str) -> CVResult | None:
        return self.cells[(blind, target)]

    def computed(self) -> list[tuple[str, str, CVResult]]:
        return [(b, t, r) for (b, t), r in self.cells.items() if r is not None]

    def grid(self, metric: str, statistic: str) -> list[list[float | None]]:
        """Rows = blinded columns, columns = targets; None marks N/A."""
        if metric not in METRICS or statistic not in STATISTICS:
            raise ValueError(f"unknown metric/statistic {metric!r}/{statistic!r}")
        out = []
        for b in self.plan.blind:
            row = []
            for t in self.plan.targets:
                r = self.cells[(b, t)]
                row.append(None if r is None else getattr(getattr(r, metric), statistic))
            out.append(row)
        return out


_WORKER_DATA: Prepared | None = None


def _init_worker(prepared: Prepared) -> None:
    global _WORKER_DATA
    _WORKER_DATA = prepared


def _worker_cell(args) -> CVResult:
    blind, target, config, columns, exclude = args
    return run_cell(_WORKER_DATA, blind, target, config, columns, exclude)


def _run_tasks(prepared: Prepared, tasks: list, parallel: int) -> list[CVResult]:
    results = []
    if parallel <= 1:
        for i, task in enumerate(tasks):
            try:
                results.append(run_cell(prepared, *task))
            except Exception as exc:
                raise CellError(task[0], task[1], exc) from exc
            logger.debug("cell %d/%d done (blind=%s, target=%s)", i + 1, len(tasks), task[0], task[1])
        return results
    with ProcessPoolExecutor(max_workers=parallel, initializer=_init_worker, initargs=(prepared,)) as pool:
        futures = [pool.submit(_worker_cell, task) for task in tasks]
        for task, future in zip(tasks, futures):
            try:
                results.append(future.result())
            except Exception as exc:
                raise CellError(task[0], task[1], exc) from exc
    return results


def run_plan(table: Table | Prepared, plan: RedactionPlan, parallel: int = 1,
             baseline: bool = True) -> tuple[RedactionMatrix, dict[str, CVResult]]:
    """Compute every non-N/A cell, plus (optionally) the no-blind baseline per target.

    Cell results do not depend on ``parallel`` or on execution order.
    """
    prepared = table if isinstance(table, Prepared) else Prepared.from_table(table)
    plan.check(prepared.names)
    columns = plan.columns
    tasks = [
        (b, t, plan.config, columns, tuple(plan.exclude.get(t, ())))
        for b in plan.blind for t in plan.targets if b != t
    ]
    if baseline:
        tasks += [(None, t, plan.config, columns, tuple(plan.exclude.get(t, ()))) for t in plan.targets]
    logger.info("running %d cells on %d rows (parallel=%d)", len(tasks), prepared.row_count, parallel)
    results = dict(zip(((task[0], task[1]) for task in tasks), _run_tasks(prepared, tasks, parallel)))
    cells = {(b, t): (None if b == t else results[(b, t)]) for b in plan.blind for t in plan.targets}
    base = {t: results[(None, t)] for t in plan.targets} if baseline else {}
    return RedactionMatrix(plan, cells), base


def run_matrix(table: Table | Prepared, plan: RedactionPlan, parallel: int = 1) -> RedactionMatrix:
    return run_plan(table, plan, parallel, baseline=False)[0]


def run_baseline(table: Table | Prepared, plan: RedactionPlan) -> dict[str, CVResult]:
    prepared = table if isinstance(table, Prepared) else Prepared.from_table(table)
    return {t: run_cell(prepared, None, t, plan.config, plan.columns, plan.exclude.get(t, ())) for t in plan.targets}


def added_value_deltas(matrix: RedactionMatrix, baseline: Mapping[str, CVResult]) -> dict:
    """(blind, target) -> baseline mikro minus redacted mikro, per metric.

    Positive means the blinded column was helping predict the target.
    N/A cells are left out.
    """
    out = {}
    for b, t, r in matrix.computed():
        base = baseline[t]
        out[(b, t)] = {m: getattr(base, m).mikro - getattr(r, m).mikro for m in METRICS}
    return out


def triple_from_dict(d: Mapping) -> ScoreTriple:
    return ScoreTriple(float(d["minus"]), float(d["plus"]), float(d["mikro"]))
