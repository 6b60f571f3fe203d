"""Model-level mixed-precision search over a discretized grid.

Matrices are ranked by their matrix-level outlier fraction. The top M4
take a 2&4-bit mixture with a fraction p4 of 4-bit columns, the next M3
take 2&3 with fraction p3, and everything else stays at plain 2-bit. All
grid combinations are enumerated; those within the size budget are scored

    score = mean_ratio(2&4 matrices) * PS4 * p4 * M4
          + mean_ratio(2&3 matrices) * PS3 * p3 * M3

and the feasible combination with the highest score wins. Ties prefer
more 2&4 matrices, then a larger p4, then fewer 2&3 matrices, then a
larger p3. Feasibility uses the realized per-matrix column counts
(ceil(p * cols)), matching what a plan built from the result would cost;
the score uses the literal grid values.

Category means are computed with plain sequential summation so an
independent enumerator reproduces the scores bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleBudgetError, ValidationError
from .outliers import top_count

DEFAULT_P_GRID = tuple(round(0.05 * i, 2) for i in range(1, 13))  # 0.05 .. 0.60


@dataclass
class MatrixStat:
    """What the search needs to know about one matrix."""

    name: str
    rows: int
    cols: int
    outlier_ratio: float  # matrix-level outlier fraction


@dataclass
class SearchConfig:
    target_bits: float
    p3_grid: tuple[float, ...] = DEFAULT_P_GRID
    p4_grid: tuple[float, ...] = DEFAULT_P_GRID
    m3_grid: tuple[int, ...] | None = None  # None: all counts 0..n
    m4_grid: tuple[int, ...] | None = None
    ps3: float = 3.0
    ps4: float = 4.0


@dataclass
class SearchResult:
    m3: int
    m4: int
    p3: float
    p4: float
    ps_total: float
    achieved_bits: float
    categories: dict[str, str] = field(default_factory=dict)
    ranked_names: list[str] = field(default_factory=list)


def rank_matrices(stats: list[MatrixStat]) -> list[int]:
    """Indices sorted by descending outlier ratio, ties by input order."""
    return sorted(range(len(stats)), key=lambda i: (-stats[i].outlier_ratio, i))


def heuristic_search(stats: list[MatrixStat], config: SearchConfig) -> SearchResult:
    """Exhaustively score the (M3, M4, p3, p4) grid under the size budget."""
    n = len(stats)
    if n == 0:
        raise ValidationError("no matrices to search over")
    if not config.p3_grid or not config.p4_grid:
        raise ValidationError("precision grids must be non-empty")
    order = rank_matrices(stats)
    ranked = [stats[i] for i in order]

    params_total = sum(s.rows * s.cols for s in stats)
    budget_bits = config.target_bits * params_total
    base_bits = sum(2 * s.rows * s.cols for s in stats)

    m3_grid = config.m3_grid if config.m3_grid is not None else tuple(range(n + 1))
    m4_grid = config.m4_grid if config.m4_grid is not None else tuple(range(n + 1))

    # Prefix tables over the ranking: extra index bits of upgrading the
    # first i matrices at each grid fraction, and prefix ratio sums.
    def prefix_extra(extra: int, grid: tuple[float, ...]) -> dict[float, list[int]]:
        table = {}
        for p in grid:
            acc, run = [0], 0
            for s in ranked:
                run += s.rows * extra * top_count(s.cols, p)
                acc.append(run)
            table[p] = acc
        return table

    extra4 = prefix_extra(2, config.p4_grid)
    extra3 = prefix_extra(1, config.p3_grid)

    best_key: tuple | None = None
    best: SearchResult | None = None
    for m4 in m4_grid:
        if not 0 <= m4 <= n:
            continue
        or4 = sum(s.outlier_ratio for s in ranked[:m4]) / m4 if m4 else 0.0
        for m3 in m3_grid:
            if m3 < 0 or m4 + m3 > n:
                continue
            or3 = (
                sum(s.outlier_ratio for s in ranked[m4 : m4 + m3]) / m3 if m3 else 0.0
            )
            for p4 in config.p4_grid:
                bits4 = extra4[p4][m4]
                for p3 in config.p3_grid:
                    bits = base_bits + bits4 + extra3[p3][m4 + m3] - extra3[p3][m4]
                    if bits > budget_bits:
                        continue
                    ps = or4 * config.ps4 * p4 * m4 + or3 * config.ps3 * p3 * m3
                    key = (ps, m4, p4, -m3, p3)
                    if best_key is None or key > best_key:
                        best_key = key
                        best = SearchResult(
                            m3=m3, m4=m4, p3=p3, p4=p4,
                            ps_total=ps, achieved_bits=bits / params_total,
                        )
    if best is None:
        raise InfeasibleBudgetError(
            f"no grid combination fits {config.target_bits} bits per parameter"
        )

    best.ranked_names = [s.name for s in ranked]
    best.categories = {}
    for pos, s in enumerate(ranked):
        if pos < best.m4:
            best.categories[s.name] = "2and4"
        elif pos < best.m4 + best.m3:
            best.categories[s.name] = "2and3"
        else:
            best.categories[s.name] = "2bit"
    return best


def matrix_stats_from_model(model, scale: float) -> list[MatrixStat]:
    """Matrix-level outlier fractions in model order (search input)."""
    stats = []
    for w in model:
        a = np.abs(w.data)
        threshold = scale * float(a.mean())
        total = int((a > threshold).sum())
        stats.append(
            MatrixStat(
                name=w.name,
                rows=w.rows,
                cols=w.cols,
                outlier_ratio=total / (w.rows * w.cols),
            )
        )
    return stats
