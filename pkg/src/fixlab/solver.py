"""Exact and annealed fixation probabilities for the line.

Starting from one mutant at site 0, the mutant block is always a prefix
``0..k-1``, so the dynamics reduce to a birth-death chain on ``k`` with
up-probability ``hop[k-1]``. Its absorption probability at ``n`` is

    1 / sum_{k=0}^{n-1} exp(S_k),   S_k = sum_{j<=k} log(q_j / p_j),

which is evaluated in log space so that it stays finite for long, rough ladders.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fixlab import _kernels
from fixlab.environment import (
    ENUMERATION_CAP,
    FitnessLandscape,
    HopProfile,
    _check_even,
    all_sign_arrays,
    beta_values,
    check_delta,
    conditioned_mask,
    draw_signs,
)
from fixlab.errors import DomainError, StepCapExceeded
from fixlab.rng import BLOCK_SIZE, block_sizes, check_seed, concat_blocks, map_blocks, stream
from fixlab.stats import FixationEstimate

CHAIN_STEP_CAP = 10**9
ANNEALED_TAG = "annealed-mc"
CHAIN_TAG = "chain"


@dataclass(frozen=True, eq=False)
class LogWeightLadder:
    """``partial_sums[k] = S_k``, with ``S_0 = 0``."""

    partial_sums: np.ndarray

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.partial_sums)


def ladder_increments(profile: HopProfile) -> np.ndarray:
    """``log(q_k / p_k)`` for ``k = 1..n-1``.

    With site probabilities available this is ``log(1 - beta_k) - log(beta_{k+1})``,
    which avoids rounding through the hop probabilities.
    """
    if profile.beta is not None:
        b = profile.beta
        return np.log1p(-b[:-1]) - np.log(b[1:])
    p = profile.hop
    with np.errstate(divide="ignore"):
        return np.log1p(-p) - np.log(p)


def log_weight_ladder(profile: HopProfile) -> LogWeightLadder:
    sums = np.concatenate(([0.0], np.cumsum(ladder_increments(profile))))
    return LogWeightLadder(sums)


def diagnostic_ladder(profile: HopProfile) -> LogWeightLadder:
    """Ladder with increments ``log((1 - beta_{k+1}) / beta_{k+1})``.

    For +-delta landscapes this is a lazy simple random walk on the lattice
    ``log((1 + delta) / (1 - delta)) * Z``; it differs from the true ladder by
    ``log(1 - beta_{k+1}) - log(1 - beta_1)`` at every step.
    """
    if profile.beta is None:
        raise DomainError("the diagnostic ladder needs site probabilities")
    b = profile.beta[1:]
    return LogWeightLadder(np.concatenate(([0.0], np.cumsum(np.log1p(-b) - np.log(b)))))


def ladder_gap(profile: HopProfile) -> tuple[float, float]:
    """Largest ``|S~_k - S_k|`` and the bound implied by the realized range of ``log(1 - beta)``."""
    gap = np.abs(diagnostic_ladder(profile).partial_sums - log_weight_ladder(profile).partial_sums)
    l1m = np.log1p(-profile.beta)
    return float(gap.max()), float(l1m.max() - l1m.min())


def lattice_step(delta: float) -> float:
    """Step of the diagonal ladder, ``log((1 + delta) / (1 - delta))``."""
    return math.log1p(delta) - math.log1p(-delta)


def fixation_probability_exact(profile: HopProfile) -> float:
    """Probability that the chain started at 1 reaches ``n`` before 0."""
    return float(_kernels.inverse_ladder_sum(ladder_increments(profile)))


def _log_tables(delta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # index 2 * (mutant > 0) + (normal > 0)
    mutant = np.array([-1, -1, 1, 1], dtype=np.float64)
    normal = np.array([-1, 1, -1, 1], dtype=np.float64)
    beta = beta_values(normal, mutant, delta)
    return beta, np.log(beta), np.log1p(-beta)


def fixation_batch(normal: np.ndarray, mutant: np.ndarray, delta: float) -> np.ndarray:
    """Exact fixation probability for each row of ``(m, n)`` sign arrays."""
    _, lb, l1mb = _log_tables(delta)
    return _kernels.fixation_from_signs(
        np.ascontiguousarray(normal, dtype=np.int8), np.ascontiguousarray(mutant, dtype=np.int8), lb, l1mb
    )


def _check_n(n: int) -> int:
    n = int(n)
    if n < 2:
        raise DomainError(f"need n >= 2 sites, got {n}")
    return n


def annealed_exact(n: int, delta: float, cap: int = ENUMERATION_CAP) -> FixationEstimate:
    """Average over all ``4**n`` environments.

    The weights are all ``4**-n``, so the average is an exactly rounded sum
    scaled by a power of two.
    """
    n = _check_n(n)
    delta = check_delta(delta)
    normal, mutant = all_sign_arrays(n, cap)
    values = fixation_batch(normal, mutant, delta)
    mean = math.fsum(values) / 4**n
    return FixationEstimate(mean, 0.0, 0, None, n_sites=n, delta=delta, mode="exact")


def conditioned_average(n: int, delta: float, cap: int = ENUMERATION_CAP) -> FixationEstimate:
    """Average over environments whose two sign sums agree; equals ``1/n``."""
    n = _check_even(n)
    delta = check_delta(delta)
    normal, mutant = all_sign_arrays(n, cap)
    keep = conditioned_mask(normal, mutant)
    values = fixation_batch(normal[keep], mutant[keep], delta)
    mean = math.fsum(values) / int(keep.sum())
    return FixationEstimate(mean, 0.0, 0, None, n_sites=n, delta=delta, mode="conditioned")


def annealed_samples(
    n: int, delta: float, replicates: int, seed: int, jobs: int = 1, tag: str = ANNEALED_TAG
) -> np.ndarray:
    """Per-replicate exact fixation probabilities of independently drawn environments."""
    n = _check_n(n)
    delta = check_delta(delta)
    seed = check_seed(seed)
    sizes = block_sizes(replicates)

    def run(b):
        signs = draw_signs(stream(seed, tag, b), sizes[b], n)
        return fixation_batch(signs[:, 0], signs[:, 1], delta)

    return concat_blocks(map_blocks(run, len(sizes), jobs))


def replicate_landscape(n: int, delta: float, seed: int, r: int, tag: str = ANNEALED_TAG) -> FitnessLandscape:
    """The environment used by replicate ``r`` of a seeded Monte Carlo run."""
    b, row = divmod(int(r), BLOCK_SIZE)
    signs = draw_signs(stream(seed, tag, b), row + 1, int(n))[row]
    return FitnessLandscape(int(n), delta, signs[0], signs[1])


def annealed_mc(
    n: int, delta: float, replicates: int, seed: int, jobs: int = 1, tag: str = ANNEALED_TAG
) -> FixationEstimate:
    """Monte Carlo over environments, one exact fixation probability per replicate.

    Averaging the exact per-environment probability instead of a 0/1 outcome
    of one run removes the dynamics noise entirely.
    """
    if int(replicates) < 2:
        raise DomainError("need at least two replicates")
    values = annealed_samples(n, delta, replicates, seed, jobs, tag)
    return FixationEstimate.from_samples(values, seed=seed, n_sites=int(n), delta=float(delta), mode="mc")


def chain_simulate(
    profile: HopProfile,
    rng: np.random.Generator,
    step_cap: int = CHAIN_STEP_CAP,
    return_steps: bool = False,
):
    """Run the absorbed birth-death chain from state 1; True if it reaches ``n``."""
    status, steps = _kernels.chain_run(profile.hop, rng, int(step_cap))
    if status == _kernels.CAPPED:
        raise StepCapExceeded(step_cap)
    hit = status == _kernels.FIXED
    return (hit, int(steps)) if return_steps else hit


def chain_frequency(
    profile: HopProfile,
    replicates: int,
    seed: int,
    jobs: int = 1,
    step_cap: int = CHAIN_STEP_CAP,
    delta: float = float("nan"),
    tag: str = CHAIN_TAG,
) -> FixationEstimate:
    """Fraction of chain runs (in one fixed environment) that fix."""
    seed = check_seed(seed)
    sizes = block_sizes(replicates)

    def run(b):
        status, _ = _kernels.chain_block(profile.hop, stream(seed, tag, b), sizes[b], int(step_cap))
        bad = np.flatnonzero(status == _kernels.CAPPED)
        if bad.size:
            raise StepCapExceeded(step_cap, b * BLOCK_SIZE + int(bad[0]))
        return status.astype(np.float64)

    values = concat_blocks(map_blocks(run, len(sizes), jobs))
    return FixationEstimate.from_samples(
        values, seed=seed, n_sites=profile.n_sites, delta=delta, mode="chain"
    )
