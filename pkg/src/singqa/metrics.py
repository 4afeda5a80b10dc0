"""Evaluation protocol: MSE, LCC, SRCC and Kendall tau-b at the
utterance level and over per-system mean scores.

Degenerate inputs (constant vectors, fewer than two points, all pairs
tied) yield float('nan') as an explicit not-a-value marker instead of an
exception, so batch reports stay generable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

REPORT_COLUMNS = ["utt_mse", "utt_lcc", "utt_srcc", "utt_ktau", "sys_mse", "sys_lcc", "sys_srcc", "sys_ktau"]


@dataclass(frozen=True)
class LevelMetrics:
    mse: float
    lcc: float
    srcc: float
    ktau: float


@dataclass(frozen=True)
class MetricReport:
    utterance: LevelMetrics
    system: LevelMetrics
    n_utterances: int
    n_systems: int

    def as_row(self) -> list[float]:
        u, s = self.utterance, self.system
        return [u.mse, u.lcc, u.srcc, u.ktau, s.mse, s.lcc, s.srcc, s.ktau]


def _pair(pred, label):
    p = np.asarray(pred, dtype=np.float64)
    l = np.asarray(label, dtype=np.float64)
    if p.ndim != 1 or l.ndim != 1:
        raise ValueError("metric inputs must be 1-D vectors")
    if p.size != l.size:
        raise ValueError(f"length mismatch: {p.size} predictions vs {l.size} labels")
    if p.size == 0:
        raise ValueError("metric inputs must be non-empty")
    return p, l


def mse(pred, label) -> float:
    p, l = _pair(pred, label)
    d = p - l
    return float(np.mean(d * d))


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if x.size < 2:
        return math.nan
    xc = x - x.mean()
    yc = y - y.mean()
    ssx = float(np.dot(xc, xc))
    ssy = float(np.dot(yc, yc))
    if ssx == 0.0 or ssy == 0.0:
        return math.nan
    return float(np.dot(xc, yc) / math.sqrt(ssx * ssy))


def lcc(pred, label) -> float:
    """Pearson correlation; nan marker for constant input."""
    p, l = _pair(pred, label)
    return _pearson(p, l)


def average_ranks(values) -> np.ndarray:
    """Fractional ranks starting at 1, ties receiving the group average."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def srcc(pred, label) -> float:
    """Spearman rank correlation: Pearson over average ranks."""
    p, l = _pair(pred, label)
    if p.size < 2:
        return math.nan
    return _pearson(average_ranks(p), average_ranks(l))


def _merge_count_inversions(a: list) -> tuple[list, int]:
    n = len(a)
    if n <= 1:
        return a, 0
    mid = n // 2
    left, inv_l = _merge_count_inversions(a[:mid])
    right, inv_r = _merge_count_inversions(a[mid:])
    merged = []
    inv = inv_l + inv_r
    i = j = 0
    while i < len(left) and j < len(right):
        if right[j] < left[i]:  # strict: ties are not inversions
            inv += len(left) - i
            merged.append(right[j])
            j += 1
        else:
            merged.append(left[i])
            i += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged, inv


def _tie_pairs(v: np.ndarray) -> int:
    _, counts = np.unique(v, return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


def ktau(pred, label) -> float:
    """Kendall tau-b via sort-and-count:

        tau_b = (concordant - discordant) / sqrt((n0 - ties_x)(n0 - ties_y))

    Discordant pairs are counted as strict inversions of the second
    vector once pairs are sorted lexicographically by the first.
    """
    p, l = _pair(pred, label)
    n = p.size
    if n < 2:
        return math.nan
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(p)
    n2 = _tie_pairs(l)
    if n0 == n1 or n0 == n2:
        return math.nan
    order = np.lexsort((l, p))
    _, discordant = _merge_count_inversions(list(l[order]))
    joint = _tie_pairs(np.ascontiguousarray(np.column_stack([p, l])).view([("p", np.float64), ("l", np.float64)]).ravel())
    concordant_minus_discordant = n0 - n1 - n2 + joint - 2 * discordant
    return float(concordant_minus_discordant / math.sqrt((n0 - n1) * (n0 - n2)))


def system_aggregate(predictions, labels, system_ids):
    """Per-system arithmetic means of predictions and labels.

    Returns (sorted system ids, mean predictions, mean labels).
    """
    p, l = _pair(predictions, labels)
    ids = list(system_ids)
    if len(ids) != p.size:
        raise ValueError(f"length mismatch: {p.size} scores vs {len(ids)} system ids")
    systems = sorted(set(ids))
    mean_pred = np.empty(len(systems))
    mean_label = np.empty(len(systems))
    ids_arr = np.asarray(ids, dtype=object)
    for k, sys_id in enumerate(systems):
        mask = ids_arr == sys_id
        mean_pred[k] = p[mask].mean()
        mean_label[k] = l[mask].mean()
    return systems, mean_pred, mean_label


def full_report(predictions, labels, system_ids) -> MetricReport:
    """All four metrics at the utterance level and over system means."""
    p, l = _pair(predictions, labels)
    systems, sys_pred, sys_label = system_aggregate(p, l, system_ids)
    return MetricReport(
        utterance=LevelMetrics(mse(p, l), lcc(p, l), srcc(p, l), ktau(p, l)),
        system=LevelMetrics(mse(sys_pred, sys_label), lcc(sys_pred, sys_label),
                            srcc(sys_pred, sys_label), ktau(sys_pred, sys_label)),
        n_utterances=int(p.size),
        n_systems=len(systems),
    )


def format_report_table(report: MetricReport) -> str:
    """Human-readable two-row metric table."""

    def cell(x: float) -> str:
        return "   nan" if math.isnan(x) else f"{x:6.3f}"

    lines = [
        f"{'level':<12}{'MSE':>8}{'LCC':>8}{'SRCC':>8}{'KTAU':>8}",
        f"{'utterance':<12}" + "".join(f"{cell(v):>8}" for v in report.as_row()[:4]),
        f"{'system':<12}" + "".join(f"{cell(v):>8}" for v in report.as_row()[4:]),
        f"(n_utterances={report.n_utterances}, n_systems={report.n_systems})",
    ]
    return "\n".join(lines)


def write_report_csv(report: MetricReport, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        writer.writerow([repr(float(v)) for v in report.as_row()])
