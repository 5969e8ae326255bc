"""Run summaries, Friedman ranking and the Bonferroni-Dunn critical difference."""

from __future__ import annotations

import math
from dataclasses import dataclass
from html import escape

import numpy as np

# Two-tailed Bonferroni-Dunn critical values q_alpha(k) for k = 2..10 compared
# against one control: z_{1 - alpha / (2 (k - 1))}. Values as tabulated by
# Demsar, "Statistical comparisons of classifiers over multiple data sets",
# JMLR 7 (2006), Table 5(b).
BONFERRONI_DUNN_Q = {
    0.05: (1.960, 2.241, 2.394, 2.498, 2.576, 2.638, 2.690, 2.724, 2.773),
    0.10: (1.645, 1.960, 2.128, 2.241, 2.326, 2.394, 2.450, 2.498, 2.539),
}


@dataclass(frozen=True)
class SummaryStats:
    best: float
    worst: float
    mean: float
    median: float
    stdev: float

    FIELDS = ("best", "worst", "mean", "median", "stdev")

    def as_tuple(self) -> tuple:
        return (self.best, self.worst, self.mean, self.median, self.stdev)


def summarize_runs(values) -> SummaryStats:
    """Best/worst/mean/median and sample standard deviation of final fitness values."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or len(v) < 2:
        raise ValueError(f"need at least 2 values to summarise, got {v.size}")
    return SummaryStats(
        best=float(v.min()),
        worst=float(v.max()),
        mean=float(v.mean()),
        median=float(np.median(v)),
        stdev=float(v.std(ddof=1)),
    )


@dataclass(frozen=True)
class ResultsMatrix:
    """Mean fitness per algorithm (rows) and function (columns)."""

    algorithms: tuple
    functions: tuple
    mean_values: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean_values, dtype=np.float64)
        if m.shape != (len(self.algorithms), len(self.functions)):
            raise ValueError(f"matrix shape {m.shape} does not match "
                             f"{len(self.algorithms)} algorithms x {len(self.functions)} functions")
        if not np.all(np.isfinite(m)):
            raise ValueError("results matrix has non-finite entries")
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(self, "mean_values", m)


def _average_ranks(column: np.ndarray) -> np.ndarray:
    """Ascending ranks starting at 1; tied values share the mean of their positions."""
    order = np.argsort(column, kind="stable")
    ranks = np.empty(len(column))
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and column[order[j + 1]] == column[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def friedman_ranks(matrix: ResultsMatrix):
    """Rank algorithms per function (1 = lowest mean).

    Returns ``(rank_matrix, average_ranks)`` with ``rank_matrix`` shaped k x N.
    """
    m = matrix.mean_values
    if m.shape[0] < 2 or m.shape[1] < 1:
        raise ValueError("need at least two algorithms and one function")
    ranks = np.column_stack([_average_ranks(m[:, j]) for j in range(m.shape[1])])
    return ranks, ranks.mean(axis=1)


def friedman_statistic(average_ranks, k: int, n: int) -> float:
    """Friedman chi-square from average ranks over ``n`` functions."""
    if k < 2:
        raise ValueError("the Friedman statistic needs k >= 2")
    r = np.asarray(average_ranks, dtype=np.float64)
    if len(r) != k:
        raise ValueError(f"expected {k} average ranks, got {len(r)}")
    return float(12.0 * n / (k * (k + 1)) * (np.sum(r**2) - k * (k + 1) ** 2 / 4.0))


def bonferroni_dunn_cd(k: int, n: int, alpha: float = 0.05) -> float:
    """Critical difference between average ranks of k algorithms over n functions."""
    table = BONFERRONI_DUNN_Q.get(alpha)
    if table is None:
        raise ValueError(f"alpha must be one of {sorted(BONFERRONI_DUNN_Q)}, got {alpha}")
    if not 2 <= k <= 1 + len(table):
        raise ValueError(f"critical values are tabulated for 2 <= k <= {1 + len(table)}, got {k}")
    if n < 1:
        raise ValueError(f"need at least one function, got n={n}")
    return table[k - 2] * math.sqrt(k * (k + 1) / (6.0 * n))


@dataclass(frozen=True)
class FriedmanOutcome:
    algorithms: tuple
    average_ranks: np.ndarray
    statistic: float
    critical_difference: float
    alpha: float
    n_functions: int

    def significantly_different(self, a: str, b: str) -> bool:
        ia, ib = self.algorithms.index(a), self.algorithms.index(b)
        return abs(self.average_ranks[ia] - self.average_ranks[ib]) > self.critical_difference

    def worst(self) -> str:
        return self.algorithms[int(np.argmax(self.average_ranks))]

    def best(self) -> str:
        return self.algorithms[int(np.argmin(self.average_ranks))]


def friedman_test(matrix: ResultsMatrix, alpha: float = 0.05) -> FriedmanOutcome:
    _, avg = friedman_ranks(matrix)
    k, n = matrix.mean_values.shape
    return FriedmanOutcome(
        algorithms=matrix.algorithms,
        average_ranks=avg,
        statistic=friedman_statistic(avg, k, n),
        critical_difference=bonferroni_dunn_cd(k, n, alpha),
        alpha=alpha,
        n_functions=n,
    )


def format_friedman_report(outcome: FriedmanOutcome, matrix: ResultsMatrix) -> str:
    ranks, _ = friedman_ranks(matrix)
    width = max(len(a) for a in outcome.algorithms)
    lines = [
        f"Friedman test over {outcome.n_functions} functions, {len(outcome.algorithms)} algorithms",
        f"chi-square statistic: {outcome.statistic:.6f}",
        f"Bonferroni-Dunn critical difference (alpha={outcome.alpha:g}): {outcome.critical_difference:.6f}",
        "",
        f"{'algorithm':<{width}}  avg_rank  " + "  ".join(f"{f:>10}" for f in matrix.functions),
    ]
    for i in np.argsort(outcome.average_ranks, kind="stable"):
        row = "  ".join(f"{r:>10.1f}" for r in ranks[i])
        lines.append(f"{outcome.algorithms[i]:<{width}}  {outcome.average_ranks[i]:8.4f}  {row}")
    lines.append("")
    lines.append("significantly different pairs (|rank gap| > CD):")
    pairs = [
        (a, b)
        for i, a in enumerate(outcome.algorithms)
        for b in outcome.algorithms[i + 1:]
        if outcome.significantly_different(a, b)
    ]
    lines.extend(f"  {a} vs {b}" for a, b in pairs)
    if not pairs:
        lines.append("  none")
    return "\n".join(lines) + "\n"


def render_cd_diagram(outcome: FriedmanOutcome, labels=None):
    """Rank diagram as ``(svg_text, plain_text)``.

    Every algorithm sits at its average rank with an interval of length CD
    centred on it; two algorithms differ significantly exactly when their
    intervals do not overlap. Rows are ordered by ascending rank.
    """
    labels = list(outcome.algorithms if labels is None else labels)
    ranks = np.asarray(outcome.average_ranks, dtype=np.float64)
    if len(labels) != len(ranks):
        raise ValueError("one label per algorithm required")
    cd = outcome.critical_difference
    half = cd / 2.0
    order = np.argsort(ranks, kind="stable")
    k = len(ranks)
    lo = min(1.0, float(np.min(ranks - half)))
    hi = max(float(k), float(np.max(ranks + half)))
    return _cd_svg(labels, ranks, order, half, lo, hi, outcome), _cd_text(labels, ranks, order, half, lo, hi, outcome)


def _cd_svg(labels, ranks, order, half, lo, hi, outcome) -> str:
    width, left, right, top, row_h = 640, 130, 30, 50, 28
    height = top + row_h * (len(order) + 1) + 20
    span = hi - lo

    def x(v):
        return left + (v - lo) / span * (width - left - right)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle">Average ranks with Bonferroni-Dunn '
        f'CD = {outcome.critical_difference:.3f} (alpha = {outcome.alpha:g})</text>',
        f'<line x1="{x(lo):.2f}" y1="{top:.2f}" x2="{x(hi):.2f}" y2="{top:.2f}" stroke="black"/>',
    ]
    tick = math.floor(lo)
    while tick <= math.ceil(hi):
        if lo <= tick <= hi:
            out.append(f'<line x1="{x(tick):.2f}" y1="{top - 5:.2f}" x2="{x(tick):.2f}" '
                       f'y2="{top + 5:.2f}" stroke="black"/>')
            out.append(f'<text x="{x(tick):.2f}" y="{top - 9:.2f}" text-anchor="middle">{tick}</text>')
        tick += 1
    for row, i in enumerate(order):
        y = top + row_h * (row + 1)
        out.append(f'<text x="{left - 10}" y="{y + 4:.2f}" text-anchor="end">{escape(str(labels[i]))}</text>')
        out.append(f'<line x1="{x(ranks[i] - half):.2f}" y1="{y:.2f}" x2="{x(ranks[i] + half):.2f}" '
                   f'y2="{y:.2f}" stroke="steelblue" stroke-width="3"/>')
        out.append(f'<circle cx="{x(ranks[i]):.2f}" cy="{y:.2f}" r="4" fill="black"/>')
        out.append(f'<text x="{x(ranks[i]):.2f}" y="{y - 7:.2f}" text-anchor="middle" '
                   f'font-size="10">{ranks[i]:.2f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _cd_text(labels, ranks, order, half, lo, hi, outcome, cols: int = 60) -> str:
    width = max(len(str(s)) for s in labels)

    def col(v):
        return int(round((v - lo) / (hi - lo) * (cols - 1)))

    lines = [f"average rank, interval = rank +/- CD/2, CD = {outcome.critical_difference:.3f} "
             f"(alpha = {outcome.alpha:g})",
             f"{'':<{width}}  {lo:<8.2f}{'':>{cols - 16}}{hi:>8.2f}"]
    for i in order:
        bar = [" "] * cols
        a, b = col(ranks[i] - half), col(ranks[i] + half)
        for c in range(a, b + 1):
            bar[c] = "-"
        bar[a], bar[b] = "[", "]"
        bar[col(ranks[i])] = "o"
        lines.append(f"{labels[i]:<{width}}  {''.join(bar)}  {ranks[i]:.3f}")
    return "\n".join(lines) + "\n"
