"""
CSV ingestion with binarization, versioned JSON documents, and the
IF / ELSE IF / ELSE table rendering of a fitted list.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .model import BinaryDataset, FallingRuleList, Hyperparameters, RuleAntecedent, RuleUniverse, risk_vector

FORMAT_VERSION = 1


class DataError(ValueError):
    """Malformed input data; carries the offending location in its message."""


# --- binarization -------------------------------------------------------------

@dataclass
class BinarizationConfig:
    """How raw CSV columns become binary features.

    ``mode="auto"``: 0/1 columns pass through, numeric columns get one
    ``col>=t`` indicator per threshold (``thresholds`` if given for the
    column, otherwise the ``quantiles`` of the column), everything else is
    categorical with one ``col=level`` indicator per level.
    ``mode="passthrough"``: every column must already be 0/1.
    """

    mode: str = "auto"
    categorical: tuple = ()
    numeric: tuple = ()
    drop: tuple = ()
    thresholds: dict = field(default_factory=dict)
    quantiles: tuple = (0.25, 0.5, 0.75)
    level_names: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("auto", "passthrough"):
            raise ValueError(f"unknown binarization mode {self.mode!r}")


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def _fmt_threshold(t):
    return f"{t:g}"


@dataclass
class FittedBinarizer:
    """Column transforms fitted on training data; serializable to JSON."""

    columns: list

    @property
    def feature_names(self):
        names = []
        for col in self.columns:
            names.extend(col["features"])
        return names

    def transform(self, table: dict, n_rows: int) -> np.ndarray:
        out = []
        for col in self.columns:
            name = col["column"]
            if name not in table:
                raise DataError(f"column {name!r} missing from input")
            raw = table[name]
            if col["kind"] == "binary":
                vals = np.array([_parse_binary(v, name, i) for i, v in enumerate(raw)], dtype=bool)
                out.append(vals[:, None])
            elif col["kind"] == "categorical":
                vals = np.asarray(raw, dtype=object)
                out.append(np.stack([vals == lvl for lvl in col["levels"]], axis=1))
            else:
                vals = np.array([_parse_float(v, name, i) for i, v in enumerate(raw)])
                out.append(np.stack([vals >= t for t in col["thresholds"]], axis=1))
        if not out:
            return np.zeros((n_rows, 0), dtype=bool)
        return np.concatenate(out, axis=1).astype(bool)

    def to_dict(self):
        return {"columns": self.columns}

    @classmethod
    def from_dict(cls, d):
        return cls(list(d["columns"]))


def _parse_binary(v, col, row):
    s = v.strip().lower()
    if s in ("1", "true", "1.0"):
        return True
    if s in ("0", "false", "0.0"):
        return False
    raise DataError(f"row {row + 2}, column {col!r}: expected a binary value, got {v!r}")


def _parse_float(v, col, row):
    try:
        return float(v)
    except ValueError:
        raise DataError(f"row {row + 2}, column {col!r}: expected a number, got {v!r}") from None


def fit_binarizer(table: dict, columns: list, config: BinarizationConfig) -> FittedBinarizer:
    specs = []
    for name in columns:
        if name in config.drop:
            continue
        raw = table[name]
        distinct = set(v.strip() for v in raw)
        if config.mode == "passthrough":
            for i, v in enumerate(raw):
                _parse_binary(v, name, i)
            specs.append({"column": name, "kind": "binary", "features": [name]})
            continue
        numeric = all(_is_number(v) for v in distinct)
        if name in config.categorical or (not numeric and name not in config.numeric):
            levels = sorted(distinct, key=lambda s: (float(s), s) if numeric else (0.0, s))
            names = config.level_names.get(name, {})
            specs.append({"column": name, "kind": "categorical", "levels": levels,
                          "features": [f"{name}={names.get(l, l)}" for l in levels]})
        elif name not in config.numeric and name not in config.thresholds and distinct <= {"0", "1"}:
            specs.append({"column": name, "kind": "binary", "features": [name]})
        else:
            vals = np.array([_parse_float(v, name, i) for i, v in enumerate(raw)])
            if name in config.thresholds:
                thr = sorted(set(float(t) for t in config.thresholds[name]))
            else:
                thr = sorted(set(np.quantile(vals, config.quantiles).tolist()))
                # a threshold at the minimum would give a constant column
                thr = [t for t in thr if t > vals.min()]
            specs.append({"column": name, "kind": "threshold", "thresholds": thr,
                          "features": [f"{name}>={_fmt_threshold(t)}" for t in thr]})
    return FittedBinarizer(specs)


def read_csv_table(path) -> tuple[list, dict, int]:
    """Header and column-major string table; rejects ragged rows and empty cells."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        cols = {h: [] for h in header}
        n = 0
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {reader.line_num} has {len(row)} fields, expected {len(header)}")
            for h, v in zip(header, row):
                if v.strip() in ("", "?", "NA", "NaN", "nan"):
                    raise DataError(f"{path}: missing value at row {reader.line_num}, column {h!r}")
                cols[h].append(v.strip())
            n += 1
    if n == 0:
        raise DataError(f"{path}: no data rows")
    return header, cols, n


def ingest_csv(path, label_column: str | None, config: BinarizationConfig = BinarizationConfig(),
               binarizer: FittedBinarizer | None = None):
    """Read a CSV into a :class:`BinaryDataset`.

    Returns ``(dataset, fitted_binarizer)``.  Pass a previously fitted
    ``binarizer`` to apply the training transform to new data.  When
    ``label_column`` is None (prediction), labels are all zero.
    """
    header, table, n = read_csv_table(path)
    if label_column is not None and label_column not in table:
        raise DataError(f"{path}: label column {label_column!r} not found")
    if label_column is not None:
        y = np.array([_parse_binary(v, label_column, i) for i, v in enumerate(table[label_column])])
    else:
        y = np.zeros(n, dtype=bool)
    feature_cols = [h for h in header if h != label_column]
    if binarizer is None:
        binarizer = fit_binarizer(table, feature_cols, config)
    X = binarizer.transform(table, n)
    if X.shape[1] == 0:
        raise DataError(f"{path}: no feature columns after binarization")
    return BinaryDataset(X, y, tuple(binarizer.feature_names)), binarizer


# --- documents ------------------------------------------------------------------

def hyperparameters_to_dict(H: Hyperparameters) -> dict:
    d = asdict(H)
    for k in ("alpha_gamma", "beta_gamma"):
        if isinstance(d[k], tuple):
            d[k] = list(d[k])
    return d


def hyperparameters_from_dict(d: dict) -> Hyperparameters:
    d = dict(d)
    for k in ("alpha_gamma", "beta_gamma"):
        if isinstance(d.get(k), list):
            d[k] = tuple(d[k])
    return Hyperparameters(**d)


def universe_to_dict(universe: RuleUniverse, feature_names) -> dict:
    return {
        "format": "frl-universe",
        "format_version": FORMAT_VERSION,
        "feature_names": list(feature_names),
        "rules": [{"feature_ids": list(r.feature_ids),
                   "features": list(r.display_names or [feature_names[f] for f in r.feature_ids]),
                   "weight": w, "support": s}
                  for r, w, s in zip(universe.rules, universe.weights, universe.support_counts)],
    }


def universe_from_dict(d: dict) -> tuple[RuleUniverse, list]:
    _check_format(d, "frl-universe")
    rules = tuple(RuleAntecedent(tuple(r["feature_ids"]), tuple(r["features"])) for r in d["rules"])
    return (RuleUniverse(rules, tuple(r.get("weight", 1.0) for r in d["rules"]),
                         tuple(r.get("support", 0) for r in d["rules"])), list(d["feature_names"]))


def _check_format(d, kind):
    if d.get("format") != kind:
        raise DataError(f"expected a {kind} document, got {d.get('format')!r}")
    if d.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported {kind} format_version {d.get('format_version')!r}")


def _none_if_nan(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else float(x)


@dataclass
class ModelDocument:
    """Serializable fitted model: rules, parameters, and training summaries."""

    rules: list
    gamma: list
    k_default: float
    posterior_probs: list
    empirical_probs: list
    supports: list
    hyperparameters: dict
    seed: int | None
    steps: int
    feature_names: list = field(default_factory=list)
    objective: float | None = None
    binarizer: dict | None = None
    label_column: str | None = None
    format_version: int = FORMAT_VERSION

    @classmethod
    def build(cls, model: FallingRuleList, universe: RuleUniverse, data: BinaryDataset, H: Hyperparameters,
              seed, steps, objective=None, binarizer: FittedBinarizer | None = None, label_column=None):
        from .evaluation import segment_summary

        support, rate = segment_summary(model, universe, data)
        _, _, p = risk_vector(model)
        rules = []
        for j in model.rule_indices:
            r = universe.rules[j]
            rules.append({"feature_ids": list(r.feature_ids),
                          "features": list(r.display_names or [data.feature_names[f] for f in r.feature_ids])})
        return cls(rules, list(model.gamma), model.k_default, p.tolist(),
                   [_none_if_nan(x) for x in rate.tolist()], [int(s) for s in support],
                   hyperparameters_to_dict(H), seed, steps, list(data.feature_names), objective,
                   None if binarizer is None else binarizer.to_dict(), label_column)

    def model(self) -> tuple[FallingRuleList, RuleUniverse]:
        """The list re-expressed over a universe holding only its own rules."""
        rules = tuple(RuleAntecedent(tuple(r["feature_ids"]), tuple(r["features"])) for r in self.rules)
        return FallingRuleList(tuple(range(len(rules))), tuple(self.gamma), self.k_default), RuleUniverse(rules)

    def to_dict(self) -> dict:
        d = {"format": "frl-model"}
        d.update(asdict(self))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelDocument":
        _check_format(d, "frl-model")
        d = {k: v for k, v in d.items() if k != "format"}
        return cls(**d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ModelDocument":
        return cls.from_dict(json.loads(text))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: not valid JSON ({e})") from None


# --- rendering --------------------------------------------------------------------

_ROW = re.compile(r"^(IF|ELSE IF|ELSE)\s+(.*?)\s*THEN .+? is\s+(\d+\.\d{2}%|-)\s+(\d+)\s*$")


def render_list(doc: ModelDocument, outcome: str = "risk") -> str:
    """Render the list as a table of conditions, empirical rates and supports."""
    conds = [" AND ".join(r["features"]) for r in doc.rules] + [""]
    heads = ["IF"] + ["ELSE IF"] * len(doc.rules)
    heads[-1] = "ELSE"
    width = max([len(c) for c in conds] + [len("Conditions")])
    then = f"THEN {outcome} is"
    lines = [f"{'':<8}{'Conditions':<{width}}  {'':<{len(then)}}  {'Probability':>11}  {'Support':>7}"]
    for head, cond, prob, sup in zip(heads, conds, doc.empirical_probs, doc.supports):
        shown = "-" if prob is None else f"{100.0 * prob:.2f}%"
        lines.append(f"{head:<8}{cond:<{width}}  {then}  {shown:>11}  {sup:>7}")
    return "\n".join(lines) + "\n"


def parse_rendered(text: str) -> list:
    """Inverse of :func:`render_list`: ``[(conditions, percent or None, support), ...]``."""
    rows = []
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        m = _ROW.match(line.strip())
        if m is None:
            raise ValueError(f"cannot parse row {line!r}")
        _, cond, prob, sup = m.groups()
        conds = [c.strip() for c in cond.split(" AND ")] if cond.strip() else []
        rows.append((conds, None if prob == "-" else float(prob[:-1]), int(sup)))
    return rows
