"""Independent reference implementations used to check the solvers.

These deliberately avoid the package's own code paths: brute force,
closed forms, and direct enumeration only.
"""

from __future__ import annotations

import itertools

import numpy as np


def brute_force_lasso(gram: np.ndarray, gamma: np.ndarray, lam: float):
    """Global minimum of -2 b'gamma + b'G b + lam ||b||_1 by sign enumeration.

    For each of the 3^p sign patterns, solves the stationarity system on
    the active set and keeps sign-consistent candidates. Exact for convex
    problems with nonsingular active submatrices.
    """
    p = gamma.size
    best_obj, best_beta = 0.0, np.zeros(p)  # zero vector is always feasible
    for signs in itertools.product((-1.0, 0.0, 1.0), repeat=p):
        s = np.array(signs)
        active = s != 0.0
        if not active.any():
            continue
        G = gram[np.ix_(active, active)]
        rhs = gamma[active] - lam * s[active] / 2.0
        try:
            sol = np.linalg.solve(G, rhs)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.sign(sol) == s[active]):
            continue
        beta = np.zeros(p)
        beta[active] = sol
        obj = float(-2.0 * beta @ gamma + beta @ gram @ beta + lam * np.abs(beta).sum())
        if obj < best_obj:
            best_obj, best_beta = obj, beta
    return best_obj, best_beta


def pair_counting_auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """AUROC by exhaustive pair comparison with half-credit ties."""
    pos = scores[labels]
    neg = scores[~labels]
    total = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                total += 1.0
            elif a == b:
                total += 0.5
    return total / (pos.size * neg.size)


def nearest_rank_quantile(values: np.ndarray, q: float) -> float:
    """Lower nearest-rank quantile of a sample."""
    ordered = np.sort(np.asarray(values, dtype=float))
    rank = max(1, int(np.ceil(q * ordered.size)))
    return float(ordered[rank - 1])


def random_gram_problem(rng: np.random.Generator, p: int, n_extra: int = 8):
    """A random well-conditioned Gram problem (gram, gamma)."""
    n = p + int(rng.integers(1, n_extra))
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    return X.T @ X / n, X.T @ y / n, n
