"""Pixel-level ranking metrics and report aggregation.

AUROC is the Mann-Whitney statistic P(s_pos > s_neg) + 0.5 P(tie), computed
with average ranks in O(n log n).  Average precision sums precision at each
positive's rank under a deterministic pessimistic tie order: within a tied
score group, negatives are ranked above positives (documented choice; the
test oracles mirror it).  Both metrics return fractions in [0, 1]; tables
render percentages with one decimal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, MetricUndefinedError, NumericError

VARIANTS = ("before", "A", "B", "C")

# score-map provenance -> report column
VARIANT_BY_PROVENANCE = {
    "baseline": "before",
    "intensity-only": "A",
    "uncertainty-only": "B",
    "proposed": "C",
}


def _check_labeled(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.size == 0 or scores.size != labels.size:
        raise ConfigurationError(
            f"scores and labels must be nonempty and equal length, got {scores.size}/{labels.size}")
    if not np.all(np.isfinite(scores)):
        raise NumericError("scores contain non-finite values")
    if not np.isin(labels, (0, 1)).all():
        raise ConfigurationError("labels must be 0 or 1")
    return scores, labels.astype(np.int64)


def auroc(scores, labels) -> float:
    """Area under the ROC curve over pooled (score, label) pairs."""
    scores, labels = _check_labeled(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("AUROC needs both classes present")
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size, dtype=np.float64)
    # average 1-based ranks within tied groups
    boundaries = np.flatnonzero(np.diff(sorted_scores)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [scores.size]))
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + 1 + e)
    rank_sum_pos = float(ranks[labels == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(scores, labels) -> float:
    """AP = mean over positives of precision at that positive's rank.

    Ranks follow descending score with negatives placed before positives at
    equal score (pessimistic), under a stable order.
    """
    scores, labels = _check_labeled(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise MetricUndefinedError("average precision needs at least one positive")
    order = np.lexsort((labels, -scores))
    hits = np.cumsum(labels[order])
    positions = np.arange(1, scores.size + 1)
    at_positives = labels[order] == 1
    return float(np.sum(hits[at_positives] / positions[at_positives]) / n_pos)


def aggregate(values: Sequence[float]) -> float:
    """Arithmetic mean over categories (the 'm' in mAUROC/mAP)."""
    values = list(values)
    if not values:
        raise ConfigurationError("cannot aggregate an empty list")
    return float(np.mean(values))


def compare(baseline: Mapping[str, float], variant: Mapping[str, float]) -> dict[str, float]:
    """Per-key differences variant - baseline (percentage points when the
    inputs are percentages)."""
    if set(baseline) != set(variant):
        raise ConfigurationError(
            f"category sets differ: {sorted(baseline)} vs {sorted(variant)}")
    return {key: float(variant[key] - baseline[key]) for key in baseline}


@dataclass
class MetricsReport:
    """Per-category AUROC/AP per method variant, with aggregates and deltas.

    Metric values are stored as fractions in [0, 1]; rendering multiplies by
    100 to mirror the usual table layout.
    """

    categories: tuple[str, ...]
    auroc: dict[str, dict[str, float]] = field(default_factory=dict)  # variant -> category -> value
    ap: dict[str, dict[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        self.categories = tuple(self.categories)
        for table in (self.auroc, self.ap):
            for variant, per_cat in table.items():
                if variant not in VARIANTS:
                    raise ConfigurationError(f"unknown variant {variant!r}")
                if set(per_cat) != set(self.categories):
                    raise ConfigurationError(
                        f"variant {variant} categories {sorted(per_cat)} do not match "
                        f"{sorted(self.categories)}")
                for value in per_cat.values():
                    if not (0.0 <= value <= 1.0):
                        raise ConfigurationError(f"metric value {value} outside [0, 1]")

    def mean_auroc(self, variant: str) -> float:
        return aggregate([self.auroc[variant][c] for c in self.categories])

    def mean_ap(self, variant: str) -> float:
        return aggregate([self.ap[variant][c] for c in self.categories])

    def deltas_vs_before(self) -> dict[str, dict[str, float]]:
        """Percentage-point aggregate deltas of each variant against 'before'."""
        out = {}
        base = {"mauroc": self.mean_auroc("before") * 100, "map": self.mean_ap("before") * 100}
        for variant in self.auroc:
            if variant == "before":
                continue
            ours = {"mauroc": self.mean_auroc(variant) * 100, "map": self.mean_ap(variant) * 100}
            out[variant] = compare(base, ours)
        return out

    def to_json_dict(self) -> dict:
        doc = {
            "categories": list(self.categories),
            "auroc": self.auroc,
            "ap": self.ap,
            "mauroc": {v: self.mean_auroc(v) for v in self.auroc},
            "map": {v: self.mean_ap(v) for v in self.ap},
        }
        if "before" in self.auroc:
            doc["deltas_vs_before_pp"] = self.deltas_vs_before()
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MetricsReport":
        return cls(tuple(doc["categories"]), doc["auroc"], doc["ap"])

    def save(self, json_path: str | Path, table_path: str | Path | None = None) -> None:
        Path(json_path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True))
        if table_path is not None:
            Path(table_path).write_text(self.render_table())

    def render_table(self) -> str:
        """Aligned text table: rows are categories plus the average row,
        columns are variants x {AUROC, AP} in percent."""
        variants = [v for v in VARIANTS if v in self.auroc]
        width = max([len(c) for c in self.categories] + [len("average"), len("category")]) + 2
        header1 = "category".ljust(width)
        header2 = " " * width
        for v in variants:
            header1 += f"{v:>16}"
            header2 += f"{'AUROC':>9}{'AP':>7}"
        lines = [header1, header2]

        def row(name: str, getter) -> str:
            line = name.ljust(width)
            for v in variants:
                au, ap_ = getter(v)
                line += f"{au * 100:>9.1f}{ap_ * 100:>7.1f}"
            return line

        for cat in self.categories:
            lines.append(row(cat, lambda v, c=cat: (self.auroc[v][c], self.ap[v][c])))
        lines.append(row("average", lambda v: (self.mean_auroc(v), self.mean_ap(v))))
        if "before" in variants:
            deltas = self.deltas_vs_before()
            line = "delta vs before".ljust(width)
            for v in variants:
                if v == "before":
                    line += f"{'-':>9}{'-':>7}"
                else:
                    line += f"{deltas[v]['mauroc']:>+9.1f}{deltas[v]['map']:>+7.1f}"
            lines.append(line)
        return "\n".join(lines) + "\n"
