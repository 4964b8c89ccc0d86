"""Questionnaire scoring and the nonparametric statistics pipeline.

Trust is measured with a 12-item 7-point questionnaire whose first five
items are distrust-worded and therefore reverse-coded.  Condition effects
are tested with Kruskal-Wallis (midranks, tie-corrected), effect sizes as
eta squared, and pairwise differences with Dunn's test under Bonferroni
correction.

The chi-square and normal survival functions are computed here from the
regularized incomplete gamma function (series + continued fraction) and
``math.erfc`` -- no statistics dependency in the package itself.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

ITEM_COUNT = 12
REVERSED_ITEMS = 5  # items 1..5 are distrust-worded
LIKERT_MIN, LIKERT_MAX = 1, 7

CONDITIONS = ("simple", "random", "synchronized")

# Cohen-style thresholds for eta squared
_EFFECT_THRESHOLDS = ((0.1379, "large"), (0.0588, "medium"), (0.0099, "small"))


@dataclass(frozen=True)
class LikertResponse:
    participant: str
    condition: str
    items: Tuple[int, ...]
    coins: Optional[int] = None

    def __post_init__(self):
        if len(self.items) != ITEM_COUNT:
            raise ValueError(f"expected {ITEM_COUNT} items, got {len(self.items)}")
        for v in self.items:
            if not isinstance(v, int) or not LIKERT_MIN <= v <= LIKERT_MAX:
                raise ValueError(f"item value out of 1..7: {v!r}")
        if self.coins is not None and not 0 <= self.coins <= 5:
            raise ValueError(f"coins out of 0..5: {self.coins}")


def tpa_score(resp: LikertResponse) -> float:
    """Mean of the 12 items after reverse-coding the first five."""
    total = sum(8 - v for v in resp.items[:REVERSED_ITEMS])
    total += sum(resp.items[REVERSED_ITEMS:])
    return total / ITEM_COUNT


# --- survival functions ----------------------------------------------------

_MAX_ITERATIONS = 500
_CONVERGENCE_EPS = 1e-16


def _lower_gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by power series (x < a+1)."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_ITERATIONS):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _CONVERGENCE_EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by Lentz's continued
    fraction (x >= a+1)."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITERATIONS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CONVERGENCE_EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_gamma_q(a: float, x: float) -> float:
    """Q(a, x) = 1 - P(a, x), accurate to better than 1e-10 absolute."""
    if a <= 0.0:
        raise ValueError("shape parameter must be positive")
    if x < 0.0:
        raise ValueError("x must be >= 0")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _lower_gamma_series(a, x)
    return _upper_gamma_cf(a, x)


def chi2_sf(x: float, df: float) -> float:
    """Survival function of the chi-square distribution."""
    if df <= 0:
        raise ValueError("df must be positive")
    if x <= 0.0:
        return 1.0
    return regularized_gamma_q(df / 2.0, x / 2.0)


def normal_sf(z: float) -> float:
    """Survival function of the standard normal distribution."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# --- rank machinery ---------------------------------------------------------


def _midranks(values: Sequence[float]) -> Tuple[List[float], List[int]]:
    """Midranks (1-based, ties averaged) and the tie-group sizes."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    tie_sizes = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        tie_sizes.append(j - i + 1)
        i = j + 1
    return ranks, tie_sizes


def _pooled_ranks(groups: Sequence[Sequence[float]]):
    pooled = [float(v) for g in groups for v in g]
    for v in pooled:
        if not math.isfinite(v):
            raise ValueError("values must be finite")
    ranks, tie_sizes = _midranks(pooled)
    tie_sum = sum(t**3 - t for t in tie_sizes)
    mean_ranks = []
    idx = 0
    for g in groups:
        n = len(g)
        mean_ranks.append(math.fsum(ranks[idx:idx + n]) / n)
        idx += n
    return len(pooled), mean_ranks, tie_sum


# --- tests ------------------------------------------------------------------


@dataclass(frozen=True)
class KruskalResult:
    statistic: float
    df: int
    p_value: float
    degenerate: bool = False


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> KruskalResult:
    """Tie-corrected Kruskal-Wallis H with a chi-square p-value."""
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    if any(len(g) == 0 for g in groups):
        raise ValueError("groups must be nonempty")
    n_total, mean_ranks, tie_sum = _pooled_ranks(groups)
    df = len(groups) - 1
    correction = 1.0 - tie_sum / (n_total**3 - n_total)
    if correction <= 0.0:
        # every pooled value identical: no information at all
        return KruskalResult(0.0, df, 1.0, degenerate=True)
    grand_mean = (n_total + 1) / 2.0
    deviation = math.fsum(len(g) * (r - grand_mean) ** 2 for g, r in zip(groups, mean_ranks))
    h = 12.0 * deviation / (n_total * (n_total + 1))
    h /= correction
    return KruskalResult(h, df, chi2_sf(h, df))


def eta_squared(h: float, k: int, n: int) -> float:
    """Effect size from the H statistic: (H - k + 1) / (n - k)."""
    if n <= k:
        raise ValueError("need more observations than groups")
    return (h - k + 1) / (n - k)


def classify_effect(eta: float) -> str:
    for threshold, label in _EFFECT_THRESHOLDS:
        if eta > threshold:
            return label
    return "negligible"


@dataclass(frozen=True)
class PairwiseComparison:
    pair: Tuple[str, str]
    z: float
    p_value: float
    p_adjusted: float


@dataclass(frozen=True)
class DunnResult:
    comparisons: Tuple[PairwiseComparison, ...]
    degenerate: bool = False


def dunn_posthoc(groups: Sequence[Sequence[float]],
                 labels: Optional[Sequence[str]] = None,
                 tie_correction: bool = True) -> DunnResult:
    """Dunn's pairwise z tests on pooled midranks, Bonferroni-adjusted."""
    k = len(groups)
    if k < 2:
        raise ValueError("need at least two groups")
    if any(len(g) == 0 for g in groups):
        raise ValueError("groups must be nonempty")
    if labels is None:
        labels = [str(i + 1) for i in range(k)]
    elif len(labels) != k:
        raise ValueError("one label per group required")
    n_total, mean_ranks, tie_sum = _pooled_ranks(groups)
    if not tie_correction:
        tie_sum = 0.0
    variance = n_total * (n_total + 1) / 12.0 - tie_sum / (12.0 * (n_total - 1))
    degenerate = variance <= 0.0
    pairs = k * (k - 1) // 2
    comparisons = []
    for i in range(k):
        for j in range(i + 1, k):
            if degenerate:
                z = 0.0
            else:
                se = math.sqrt(variance * (1.0 / len(groups[i]) + 1.0 / len(groups[j])))
                z = (mean_ranks[i] - mean_ranks[j]) / se
            p = 2.0 * normal_sf(abs(z))
            comparisons.append(
                PairwiseComparison(
                    pair=(labels[i], labels[j]),
                    z=z,
                    p_value=p,
                    p_adjusted=min(1.0, p * pairs),
                )
            )
    return DunnResult(tuple(comparisons), degenerate)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation (n-1 convention throughout)."""
    if len(x) != len(y):
        raise ValueError("sequences must have equal length")
    if len(x) < 3:
        raise ValueError("need at least three pairs")
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation undefined for zero variance")
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    return sxy / math.sqrt(sxx * syy)


# --- reporting ---------------------------------------------------------------


def _stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def _median_iqr(values: Sequence[float]) -> Tuple[float, float]:
    ordered = sorted(values)
    n = len(ordered)

    def quantile(q: float) -> float:
        pos = q * (n - 1)
        lo = int(math.floor(pos))
        hi = min(lo + 1, n - 1)
        frac = pos - lo
        return ordered[lo] * (1.0 - frac) + ordered[hi] * frac

    return quantile(0.5), quantile(0.75) - quantile(0.25)


@dataclass(frozen=True)
class ReportRow:
    label: str
    medians: Dict[str, float]
    iqrs: Dict[str, float]
    h: float
    p_value: float
    eta: float
    stars: Dict[Tuple[str, str], str]
    degenerate: bool


@dataclass(frozen=True)
class Report:
    conditions: Tuple[str, ...]
    rows: Tuple[ReportRow, ...]

    @property
    def degenerate(self) -> bool:
        return any(row.degenerate for row in self.rows)


def report_table(responses: Sequence[LikertResponse],
                 conditions: Sequence[str] = CONDITIONS) -> Report:
    """Per-item medians/IQRs plus KW, eta squared, and Dunn stars; the last
    row aggregates the full questionnaire score."""
    if len(conditions) < 2:
        raise ValueError("need at least two conditions")
    by_condition: Dict[str, List[LikertResponse]] = {c: [] for c in conditions}
    for resp in responses:
        if resp.condition not in by_condition:
            raise ValueError(f"unknown condition {resp.condition!r}")
        by_condition[resp.condition].append(resp)
    for c in conditions:
        if not by_condition[c]:
            raise ValueError(f"no responses for condition {c!r}")

    def build_row(label: str, extract) -> ReportRow:
        groups = [[extract(r) for r in by_condition[c]] for c in conditions]
        kw = kruskal_wallis(groups)
        n_total = sum(len(g) for g in groups)
        eta = eta_squared(kw.statistic, len(groups), n_total)
        dunn = dunn_posthoc(groups, labels=list(conditions))
        stars = {c.pair: _stars(c.p_adjusted) for c in dunn.comparisons}
        medians, iqrs = {}, {}
        for c, g in zip(conditions, groups):
            medians[c], iqrs[c] = _median_iqr(g)
        return ReportRow(
            label=label,
            medians=medians,
            iqrs=iqrs,
            h=kw.statistic,
            p_value=kw.p_value,
            eta=eta,
            stars=stars,
            degenerate=kw.degenerate or dunn.degenerate,
        )

    rows = [
        build_row(f"Q{i + 1}", lambda r, i=i: float(r.items[i]))
        for i in range(ITEM_COUNT)
    ]
    rows.append(build_row("TPA", tpa_score))
    return Report(tuple(conditions), tuple(rows))


def format_report(report: Report) -> str:
    """Aligned-text rendering: one row per item, then the aggregate score."""
    header = ["item"]
    for c in report.conditions:
        header.append(f"{c} med/IQR")
    header += ["H", "p", "eta2"]
    header += [f"{a[:4]}-{b[:4]}" for a, b in report.rows[0].stars]
    lines = [header]
    for row in report.rows:
        cells = [row.label]
        for c in report.conditions:
            cells.append(f"{row.medians[c]:.1f}/{row.iqrs[c]:.1f}")
        cells.append(f"{row.h:.2f}")
        cells.append(f"{row.p_value:.4f}")
        cells.append(f"{row.eta:.2f}")
        cells += [row.stars[pair] or "-" for pair in row.stars]
        lines.append(cells)
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip()
        for line in lines
    )


def report_csv_rows(report: Report) -> List[List[str]]:
    header = ["item"]
    for c in report.conditions:
        header += [f"{c}_median", f"{c}_iqr"]
    header += ["h", "p", "eta2"]
    header += [f"stars_{a}_{b}" for a, b in report.rows[0].stars]
    out = [header]
    for row in report.rows:
        cells = [row.label]
        for c in report.conditions:
            cells += [f"{row.medians[c]:.6g}", f"{row.iqrs[c]:.6g}"]
        cells += [f"{row.h:.10g}", f"{row.p_value:.10g}", f"{row.eta:.10g}"]
        cells += [row.stars[pair] for pair in row.stars]
        out.append(cells)
    return out


# --- responses CSV -----------------------------------------------------------

_RESPONSE_FIELDS = ["participant", "condition"] + [f"i{k}" for k in range(1, 13)] + ["coins"]


def write_responses(path, responses: Sequence[LikertResponse]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_RESPONSE_FIELDS)
        for r in responses:
            row = [r.participant, r.condition, *r.items,
                   "" if r.coins is None else r.coins]
            writer.writerow(row)


def read_responses(path) -> List[LikertResponse]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _RESPONSE_FIELDS:
            raise ValueError(f"unexpected columns: {reader.fieldnames}")
        for row in reader:
            items = tuple(int(row[f"i{k}"]) for k in range(1, 13))
            coins = row["coins"].strip()
            out.append(
                LikertResponse(
                    participant=row["participant"],
                    condition=row["condition"],
                    items=items,
                    coins=int(coins) if coins else None,
                )
            )
    return out
