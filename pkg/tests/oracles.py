"""Independent reference computations used as test oracles.

These work on plain Python containers and never call into surveybench's
raking or estimation code.
"""

from __future__ import annotations

import numpy as np


def ipf_table(cells, row_targets, col_targets, tol=1e-12, max_iter=100_000):
    """Brute-force two-way IPF on the contingency table of ``cells``.

    ``cells`` is a list of (row, col) per respondent.  Returns one weight per
    respondent, normalized to mean 1.
    """
    R, C = len(row_targets), len(col_targets)
    n = len(cells)
    counts = [[0.0] * C for _ in range(R)]
    for i, j in cells:
        counts[i][j] += 1.0
    fit = [row[:] for row in counts]
    for _ in range(max_iter):
        for i in range(R):
            s = sum(fit[i])
            if s > 0:
                f = row_targets[i] * n / s
                fit[i] = [x * f for x in fit[i]]
        for j in range(C):
            s = sum(fit[i][j] for i in range(R))
            if s > 0:
                f = col_targets[j] * n / s
                for i in range(R):
                    fit[i][j] *= f
        total = sum(map(sum, fit))
        gap = max(
            max(abs(sum(fit[i]) / total - row_targets[i]) for i in range(R)),
            max(abs(sum(fit[i][j] for i in range(R)) / total - col_targets[j])
                for j in range(C)),
        )
        if gap < tol:
            break
    else:
        raise RuntimeError("oracle IPF did not converge")
    w = [fit[i][j] / counts[i][j] for i, j in cells]
    mean = sum(w) / n
    return [x / mean for x in w]


def weighted_margins(codes, weights, n_categories):
    """Per dimension, list of weighted category shares (pure Python)."""
    total = sum(weights)
    out = []
    for d, k in enumerate(n_categories):
        acc = [0.0] * k
        for row, w in zip(codes, weights):
            acc[row[d]] += w
        out.append([a / total for a in acc])
    return out


def brute_proportion(weights, indicator, denominator):
    num = sum(w for w, i, d in zip(weights, indicator, denominator) if i and d)
    den = sum(w for w, d in zip(weights, denominator) if d)
    return num / den


def random_full_table(rng, max_cats=3, max_n=30):
    """Random two-dimension fixture in which every joint cell is occupied.

    Full support guarantees the raking problem has an exact solution, so
    both the oracle and the implementation must converge.  Returns
    (cells, row_targets, col_targets).
    """
    while True:
        R = int(rng.integers(2, max_cats + 1))
        C = int(rng.integers(2, max_cats + 1))
        n = int(rng.integers(R * C, max_n + 1))
        cells = [(i, j) for i in range(R) for j in range(C)]
        cells += [(int(rng.integers(R)), int(rng.integers(C))) for _ in range(n - R * C)]
        order = rng.permutation(n)
        cells = [cells[k] for k in order]
        rt = rng.dirichlet(np.ones(R) * 2).tolist()
        ct = rng.dirichlet(np.ones(C) * 2).tolist()
        if min(rt + ct) > 0.02:
            return cells, rt, ct
