"""Reference computations that share no code with the package.

They are slow and straightforward on purpose: dense or banded linear solves
and explicit loops over all environments.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.linalg import solve_banded


def site_beta(normal_sign: int, mutant_sign: int, delta: float) -> float:
    mu = 1 + delta * mutant_sign
    nu = 1 + delta * normal_sign
    return mu / (mu + nu)


def betas(normal, mutant, delta):
    return [site_beta(a, b, delta) for a, b in zip(normal, mutant)]


def hops_from_beta(beta):
    """Up-probability from state k (k mutants on the prefix) given the site probabilities."""
    return [beta[k] / (beta[k] + 1 - beta[k - 1]) for k in range(1, len(beta))]


def tridiagonal_absorption(hops) -> float:
    """Solve ``h_k = p_k h_{k+1} + q_k h_{k-1}``, ``h_0 = 0``, ``h_n = 1``; return ``h_1``."""
    n = len(hops) + 1
    m = n - 1  # unknowns h_1..h_{n-1}
    ab = np.zeros((3, m))
    rhs = np.zeros(m)
    for i in range(m):
        p = hops[i]
        ab[1, i] = 1.0
        if i + 1 < m:
            ab[0, i + 1] = -p
        else:
            rhs[i] = p
        if i > 0:
            ab[2, i - 1] = -(1 - p)
    return float(solve_banded((1, 1), ab, rhs)[0])


def gamblers_ruin(hops) -> float:
    """Plain product formula, for short well-conditioned ladders."""
    total, prod = 1.0, 1.0
    for p in hops:
        prod *= (1 - p) / p
        total += prod
    return 1.0 / total


def line_exact(normal, mutant, delta) -> float:
    return tridiagonal_absorption(hops_from_beta(betas(normal, mutant, delta)))


def brute_annealed(n: int, delta: float) -> float:
    total = 0.0
    for normal in itertools.product((-1, 1), repeat=n):
        for mutant in itertools.product((-1, 1), repeat=n):
            total += line_exact(normal, mutant, delta)
    return total / 4**n


def brute_conditioned(n: int, delta: float) -> float:
    vals = [
        line_exact(normal, mutant, delta)
        for normal in itertools.product((-1, 1), repeat=n)
        for mutant in itertools.product((-1, 1), repeat=n)
        if sum(normal) == sum(mutant)
    ]
    return sum(vals) / len(vals)


def circle_exact(beta) -> float:
    """Fixation probability on a ring from one mutant at site 0.

    States are arcs ``(left, count)``. Of the ``2n`` directed edges only the
    four on the arc boundary can change the state; every other draw is a null
    step, so conditioning on a boundary edge gives a chain whose moves have
    probability 1/4 each.
    """
    n = len(beta)

    def idx(left, k):
        return left * (n - 1) + (k - 1)

    size = n * (n - 1)
    A = np.eye(size)
    b = np.zeros(size)
    for left in range(n):
        for k in range(1, n):
            i = idx(left, k)
            right = (left + k - 1) % n
            moves = [
                (beta[(right + 1) % n], left, k + 1),
                (1 - beta[right], left, k - 1),
                (beta[(left - 1) % n], (left - 1) % n, k + 1),
                (1 - beta[left], (left + 1) % n, k - 1),
            ]
            for p, left2, k2 in moves:
                if k2 == n:
                    b[i] += p / 4
                elif k2 > 0:
                    A[i, idx(left2, k2)] -= p / 4
            A[i, i] -= 1 - sum(m[0] for m in moves) / 4
    return float(np.linalg.solve(A, b)[idx(0, 1)])


def circle_annealed(n: int, delta: float) -> float:
    total = 0.0
    for normal in itertools.product((-1, 1), repeat=n):
        for mutant in itertools.product((-1, 1), repeat=n):
            total += circle_exact(betas(normal, mutant, delta))
    return total / 4**n


def binomial_sigma(p: float, replicates: int) -> float:
    return math.sqrt(p * (1 - p) / replicates)
