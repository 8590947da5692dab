"""Seeded synthetic tables with planted dependencies, for checking attribution end to end.

A spec is a row count, a seed and an ordered list of column generators:

``uniform-categorical``  ``labels``: count or explicit list
``copy-of``              ``source``, ``noise``: source value w.p. 1 - noise, else a uniform *other* label
``function-of``          ``sources``, ``mapping`` ("v1|v2" -> label), ``noise`` as above
``lognormal-numeric``    ``mu``, ``sigma``; optional ``round`` (decimals) or ``integer``
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ingest
from .errors import ConfigError, DataError
from .table import CATEGORICAL, NUMERIC, Column, Table

GENERATORS = ("uniform-categorical", "copy-of", "function-of", "lognormal-numeric")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    generator: str
    params: dict = field(default_factory=dict)

    def sources(self) -> list[str]:
        if self.generator == "copy-of":
            return [self.params["source"]]
        if self.generator == "function-of":
            return list(self.params["sources"])
        return []

    def to_dict(self) -> dict:
        return {"name": self.name, "generator": self.generator, **self.params}


@dataclass(frozen=True)
class SynthSpec:
    row_count: int
    seed: int
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        if self.row_count < 0:
            raise ConfigError("row_count must be non-negative")
        seen = set()
        for c in self.columns:
            if c.generator not in GENERATORS:
                raise ConfigError(f"column {c.name!r}: unknown generator {c.generator!r}")
            if c.name in seen:
                raise ConfigError(f"duplicate column {c.name!r}")
            for s in c.sources():
                if s == c.name or (s not in seen and any(o.name == s for o in self.columns)):
                    raise ConfigError(f"column {c.name!r}: cyclic dependency on {s!r}")
                if s not in seen:
                    raise ConfigError(f"column {c.name!r}: unknown source {s!r}")
            noise = c.params.get("noise", 0.0)
            if not 0 <= noise < 1:
                raise ConfigError(f"column {c.name!r}: noise must be in [0, 1), got {noise}")
            seen.add(c.name)

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise ConfigError(f"no column {name!r} in spec")

    def ancestors(self, name: str) -> set[str]:
        out, stack = set(), list(self.column(name).sources())
        while stack:
            s = stack.pop()
            if s not in out:
                out.add(s)
                stack.extend(self.column(s).sources())
        return out

    def universe(self, name: str) -> list[str]:
        """Label set a categorical column draws from."""
        c = self.column(name)
        if c.generator == "uniform-categorical":
            labels = c.params["labels"]
            return [f"{name}_{i}" for i in range(labels)] if isinstance(labels, int) else [str(v) for v in labels]
        if c.generator == "copy-of":
            return self.universe(c.params["source"])
        if c.generator == "function-of":
            return list(dict.fromkeys(str(v) for v in c.params["mapping"].values()))
        raise ConfigError(f"column {name!r} is numeric")

    def to_dict(self) -> dict:
        return {"row_count": self.row_count, "seed": self.seed, "columns": [c.to_dict() for c in self.columns]}

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        try:
            cols = tuple(
                ColumnSpec(c["name"], c["generator"], {k: v for k, v in c.items() if k not in ("name", "generator")})
                for c in d["columns"]
            )
            return cls(int(d["row_count"]), int(d["seed"]), cols)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed synth spec: {exc!r}") from exc


def load_spec(path: str | Path) -> SynthSpec:
    try:
        return SynthSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except OSError as exc:
        raise ConfigError(f"cannot read synth spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"synth spec {path} is not valid JSON: {exc}") from exc


def _corrupt(rng: np.random.Generator, index: np.ndarray, size: int, noise: float) -> np.ndarray:
    """Replace each code, w.p. ``noise``, by a uniform draw from the other ``size - 1`` codes."""
    flip = rng.random(len(index)) < noise
    other = rng.integers(0, max(size - 1, 1), len(index))
    other = other + (other >= index)
    if size < 2:
        return index
    return np.where(flip, other, index)


def generate(spec: SynthSpec) -> Table:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.row_count
    codes: dict[str, np.ndarray] = {}
    universes: dict[str, list[str]] = {}
    columns = []
    for c in spec.columns:
        p = c.params
        if c.generator == "lognormal-numeric":
            values = rng.lognormal(float(p.get("mu", 0.0)), float(p.get("sigma", 1.0)), n)
            if p.get("integer"):
                values = np.ceil(values)
            elif "round" in p:
                values = np.round(values, int(p["round"]))
            columns.append(Column(c.name, NUMERIC, values))
            continue
        universe = spec.universe(c.name)
        if c.generator == "uniform-categorical":
            index = rng.integers(0, len(universe), n)
        elif c.generator == "copy-of":
            index = _corrupt(rng, codes[p["source"]], len(universe), float(p.get("noise", 0.0)))
        else:
            position = {label: i for i, label in enumerate(universe)}
            mapping = {str(k): position[str(v)] for k, v in p["mapping"].items()}
            keys = zip(*(np.asarray(universes[s], dtype=object)[codes[s]] for s in p["sources"]))
            try:
                clean = np.fromiter((mapping["|".join(k)] for k in keys), dtype=np.int64, count=n)
            except KeyError as exc:
                raise DataError(f"column {c.name!r}: mapping has no entry for {exc.args[0]!r}") from None
            index = _corrupt(rng, clean, len(universe), float(p.get("noise", 0.0)))
        codes[c.name] = index
        universes[c.name] = universe
        columns.append(Column(c.name, CATEGORICAL, np.asarray(universe, dtype=object)[index]))
    return Table("synthetic", columns)


def oracle_bayes_accuracy(spec: SynthSpec, target: str, blinded=()) -> float:
    """Closed-form Bayes-optimal accuracy (percent) for a copy-of or uniform target.

    Source visible: ``100 * (1 - noise)``.  Source blinded, with nothing else
    visible that shares an ancestor with the target: ``100 / L``.
    """
    c = spec.column(target)
    blinded = set(blinded)
    if c.generator == "copy-of":
        source = c.params["source"]
        if source not in blinded:
            return 100.0 * (1.0 - float(c.params.get("noise", 0.0)))
        if spec.column(source).generator != "uniform-categorical":
            raise ValueError(f"no closed form: source {source!r} of {target!r} is not uniform")
    elif c.generator != "uniform-categorical":
        raise ValueError(f"no closed form for {c.generator!r} target {target!r}")
    lineage = spec.ancestors(target) | {target}
    for other in spec.columns:
        if other.name in blinded or other.name == target:
            continue
        if (spec.ancestors(other.name) | {other.name}) & lineage:
            raise ValueError(f"no closed form: visible column {other.name!r} shares lineage with {target!r}")
    return 100.0 / len(spec.universe(target))


def planted_spec(n: int = 5000, seed: int = 2011, labels: int = 4, noise: float = 0.1, noise_features: int = 5) -> SynthSpec:
    """``source`` uniform, ``target`` a noisy copy of it, plus independent uniform noise columns."""
    cols = [ColumnSpec("source", "uniform-categorical", {"labels": labels}),
            ColumnSpec("target", "copy-of", {"source": "source", "noise": noise})]
    cols += [ColumnSpec(f"noise{i}", "uniform-categorical", {"labels": labels}) for i in range(1, noise_features + 1)]
    return SynthSpec(n, seed, tuple(cols))


def medicare_like_spec(n: int, seed: int = 2011, providers: int = 3000, drgs: int = 130, states: int = 50,
                       zips: int = 2500, cities: int = 1500, outpatient_codes: int = 30) -> SynthSpec:
    """Spec with Medicare-like cardinalities: provider -> zip -> city -> state, DRG -> IN/OUT."""
    rng = np.random.Generator(np.random.PCG64(seed ^ 0x5EED))
    provider_labels = [str(10000 + i) for i in range(providers)]
    zip_labels = [f"{1000 + 37 * i:05d}" for i in range(zips)]
    city_labels = [f"CITY{i:04d}" for i in range(cities)]
    state_labels = [f"S{i:02d}" for i in range(states)]
    drg_labels = [f"DRG:{i:03d}" for i in range(drgs - outpatient_codes)]
    drg_labels += [f"APC:{i:04d}" for i in range(outpatient_codes)]

    def assign(keys, values):
        # every value used at least once, the rest drawn uniformly
        picks = np.concatenate([np.arange(len(values)), rng.integers(0, len(values), max(len(keys) - len(values), 0))])
        picks = rng.permutation(picks)[:len(keys)]
        return {k: values[int(j)] for k, j in zip(keys, picks)}

    cols = (
        ColumnSpec(ingest.PROVIDER, "uniform-categorical", {"labels": provider_labels}),
        ColumnSpec(ingest.ZIP, "function-of", {"sources": [ingest.PROVIDER], "mapping": assign(provider_labels, zip_labels)}),
        ColumnSpec(ingest.CITY, "function-of", {"sources": [ingest.ZIP], "mapping": assign(zip_labels, city_labels)}),
        ColumnSpec(ingest.STATE, "function-of", {"sources": [ingest.CITY], "mapping": assign(city_labels, state_labels)}),
        ColumnSpec(ingest.DRG, "uniform-categorical", {"labels": drg_labels}),
        ColumnSpec(ingest.INOROUT, "function-of", {"sources": [ingest.DRG],
                                                   "mapping": {d: ("IN" if d.startswith("DRG:") else "OUT") for d in drg_labels}}),
        ColumnSpec(ingest.DISCHARGES, "lognormal-numeric", {"mu": 3.0, "sigma": 1.0, "integer": True}),
        ColumnSpec(ingest.CHARGE_PD, "lognormal-numeric", {"mu": 10.0, "sigma": 0.8, "round": 2}),
        ColumnSpec(ingest.PAYMENT_PD, "lognormal-numeric", {"mu": 9.0, "sigma": 0.7, "round": 2}),
    )
    return SynthSpec(n, seed, cols)


def medicare_like(n: int, seed: int = 2011, **cardinalities) -> Table:
    """A schema-conforming 13-column table built from :func:`medicare_like_spec`."""
    derived, _ = ingest.derive_columns(generate(medicare_like_spec(n, seed, **cardinalities)))
    return derived
