import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixlab.environment import FitnessLandscape, HopProfile, hop_profile, sample_landscape
from fixlab.errors import DomainError, InfeasibleError, StepCapExceeded
from fixlab.rng import stream
from fixlab.solver import (
    annealed_exact,
    annealed_mc,
    annealed_samples,
    chain_frequency,
    chain_simulate,
    conditioned_average,
    diagnostic_ladder,
    fixation_probability_exact,
    ladder_gap,
    lattice_step,
    log_weight_ladder,
    replicate_landscape,
)
from fixlab.stats import FixationEstimate

import oracles


def random_landscape(n, delta, seed):
    return sample_landscape(n, delta, stream(seed, "solver-test"))


@pytest.mark.parametrize("n", range(2, 51))
def test_neutral_is_exactly_one_over_n(n):
    prof = hop_profile(FitnessLandscape(n, 0.0, np.ones(n), -np.ones(n)))
    assert fixation_probability_exact(prof) == 1.0 / n


@pytest.mark.parametrize("p", [0.01, 0.3, 0.5, 0.77, 0.999])
def test_two_sites_returns_hop(p):
    assert fixation_probability_exact(HopProfile.from_hops([p])) == pytest.approx(p, rel=1e-14)


def test_fixed_seed_landscape_matches_tridiagonal_solve():
    land = random_landscape(5, 0.4, 1)
    prof = hop_profile(land)
    expected = oracles.tridiagonal_absorption(prof.hop.tolist())
    assert abs(fixation_probability_exact(prof) - expected) < 1e-12


def test_formula_matches_solver_on_random_environments():
    rng = stream(3, "agreement")
    for i in range(100):
        n = int(rng.integers(2, 13))
        delta = float(rng.uniform(0, 0.95))
        land = random_landscape(n, delta, 1000 + i)
        prof = hop_profile(land)
        expected = oracles.line_exact(land.normal_signs, land.mutant_signs, delta)
        assert abs(fixation_probability_exact(prof) - expected) < 1e-12
        assert abs(oracles.gamblers_ruin(prof.hop) - expected) < 1e-12


@settings(max_examples=60)
@given(
    st.lists(st.floats(0.02, 0.98), min_size=2, max_size=12),
    st.data(),
)
def test_raising_one_beta_never_lowers_fixation(beta, data):
    k = data.draw(st.integers(1, len(beta) - 1))
    bump = data.draw(st.floats(0.0, 0.98))
    raised = list(beta)
    raised[k] = max(beta[k], min(0.99, beta[k] + bump))
    before = fixation_probability_exact(HopProfile.from_beta(beta))
    after = fixation_probability_exact(HopProfile.from_beta(raised))
    assert after >= before * (1 - 1e-14)


@pytest.mark.parametrize("p, n", [(0.99, 10**5), (0.01, 10**5), (0.6, 10**6), (0.5, 10**6)])
def test_long_ladders_stay_finite(p, n):
    got = fixation_probability_exact(HopProfile.from_hops(np.full(n - 1, p)))
    r = (1 - p) / p
    if r == 1:
        expected = 1 / n
    elif r < 1:
        expected = (1 - r) / (1 - r**n)
    else:  # (r - 1) / (r^n - 1), negligible beyond double range
        log_expected = math.log(r - 1) - n * math.log(r)
        expected = math.exp(log_expected) if log_expected > -745 else 0.0
    assert math.isfinite(got) and 0.0 <= got <= 1.0
    assert got == pytest.approx(expected, rel=1e-9, abs=1e-300)


def test_rough_ladder_near_exponent_limit():
    # |S_k| climbs to about 700 and back; direct products would overflow
    hops = np.concatenate([np.full(350, 1 / (1 + math.e**2)), np.full(350, 1 / (1 + math.e**-2))])
    prof = HopProfile.from_hops(hops)
    assert log_weight_ladder(prof).partial_sums.max() == pytest.approx(700, rel=1e-9)
    got = fixation_probability_exact(prof)
    assert math.isfinite(got) and 0 < got < 1e-300 or got == 0.0


def test_ladder_definition():
    land = random_landscape(9, 0.6, 4)
    prof = hop_profile(land)
    ladder = log_weight_ladder(prof)
    b = prof.beta
    assert ladder.partial_sums[0] == 0.0
    assert ladder.partial_sums.size == 9
    assert np.allclose(ladder.increments, np.log((1 - b[:-1]) / b[1:]), rtol=0, atol=1e-14)
    q_over_p = (1 - prof.hop) / prof.hop
    assert np.allclose(ladder.increments, np.log(q_over_p), rtol=0, atol=1e-13)


@pytest.mark.parametrize("delta", [0.05, 0.3, 0.8])
def test_diagnostic_ladder_is_lazy_walk_close_to_true_ladder(delta):
    step = lattice_step(delta)
    for seed in range(20):
        prof = hop_profile(random_landscape(30, delta, seed))
        inc = diagnostic_ladder(prof).increments
        units = inc / step
        assert np.allclose(units, np.round(units), atol=1e-12)
        assert set(np.round(units).astype(int)) <= {-1, 0, 1}
        gap, bound = ladder_gap(prof)
        assert gap <= bound + 1e-12
        assert bound <= step + 1e-12


def test_annealed_exact_neutral():
    for n in range(2, 9):
        assert annealed_exact(n, 0.0).mean == 1.0 / n


def test_annealed_exact_two_sites_against_sixteen_terms():
    delta = 0.5
    terms = []
    for b1 in (-1, 1):
        for b2 in (-1, 1):
            for m1 in (-1, 1):
                for m2 in (-1, 1):
                    beta1 = oracles.site_beta(b1, m1, delta)
                    beta2 = oracles.site_beta(b2, m2, delta)
                    terms.append(beta2 / (beta2 + 1 - beta1))
    est = annealed_exact(2, delta)
    assert est.mean == pytest.approx(sum(terms) / 16, abs=1e-15)
    assert est.std_error == 0 and est.replicates == 0 and est.seed is None


@pytest.mark.parametrize("n, delta", [(3, 0.2), (4, 0.7), (5, 0.45)])
def test_annealed_exact_matches_brute_force(n, delta):
    assert annealed_exact(n, delta).mean == pytest.approx(oracles.brute_annealed(n, delta), abs=1e-13)


def test_small_delta_favours_invader():
    assert annealed_exact(6, 0.05).mean > 1 / 6


def test_annealed_exact_cap():
    with pytest.raises(InfeasibleError):
        annealed_exact(11, 0.1)
    with pytest.raises(InfeasibleError):
        annealed_exact(6, 0.1, cap=5)


@pytest.mark.parametrize("n", [2, 7, 40])
def test_annealed_mc_neutral_is_exact(n):
    est = annealed_mc(n, 0.0, 1000, seed=5)
    assert est.mean == 1.0 / n
    assert est.std_error == 0.0


def test_annealed_mc_agrees_with_enumeration():
    est = annealed_mc(8, 0.3, 10**5, seed=17)
    exact = annealed_exact(8, 0.3).mean
    assert est.within(exact, 4)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
@pytest.mark.parametrize("delta", [0.1, 0.5, 0.9])
def test_mc_consistency_grid(n, delta):
    est = annealed_mc(n, delta, 20000, seed=100 + n)
    assert est.within(annealed_exact(n, delta).mean, 4)


def test_mc_standard_error_definition():
    values = annealed_samples(6, 0.5, 3000, seed=9)
    est = annealed_mc(6, 0.5, 3000, seed=9)
    assert est.std_error == pytest.approx(values.std(ddof=1) / math.sqrt(values.size), rel=1e-12)
    assert est.mean == pytest.approx(values.mean(), rel=1e-14)


def test_parallel_determinism():
    results = [annealed_mc(37, 0.3, 20000, seed=2024, jobs=j) for j in (1, 4, 16)]
    assert results[0] == results[1] == results[2]
    samples = [annealed_samples(12, 0.6, 5000, seed=1, jobs=j) for j in (1, 4, 16)]
    assert all(np.array_equal(samples[0], s) for s in samples[1:])


def test_replicate_landscape_reproduces_samples():
    values = annealed_samples(10, 0.4, 3000, seed=77)
    for r in (0, 1, 1023, 1024, 2999):
        land = replicate_landscape(10, 0.4, 77, r)
        assert fixation_probability_exact(hop_profile(land)) == pytest.approx(values[r], rel=1e-13)


def test_seed_changes_result():
    a = annealed_mc(20, 0.3, 5000, seed=1)
    b = annealed_mc(20, 0.3, 5000, seed=2)
    assert a.mean != b.mean


@pytest.mark.parametrize("bad", [dict(replicates=1), dict(seed=-1), dict(delta=1.0), dict(n=1)])
def test_annealed_mc_validation(bad):
    kwargs = dict(n=5, delta=0.2, replicates=100, seed=1) | bad
    with pytest.raises(DomainError):
        annealed_mc(**kwargs)


@pytest.mark.parametrize("n, delta", [(4, 0.3), (6, 0.7)])
def test_conditioned_average_is_one_over_n(n, delta):
    est = conditioned_average(n, delta)
    assert abs(est.mean - 1 / n) < 1e-10
    assert est.mode == "conditioned"


def test_conditioned_neutral_two_sites_exact():
    assert conditioned_average(2, 0.0).mean == 0.5


@pytest.mark.parametrize("n", [2, 4, 6, 8])
@pytest.mark.parametrize("delta", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_identity_at_machine_precision(n, delta):
    assert abs(n * conditioned_average(n, delta).mean - 1) < 1e-12


@pytest.mark.parametrize("n, delta", [(2, 0.35), (4, 0.85)])
def test_conditioned_matches_brute_force(n, delta):
    assert conditioned_average(n, delta).mean == pytest.approx(oracles.brute_conditioned(n, delta), abs=1e-13)


@pytest.mark.parametrize("n", [3, 5])
def test_conditioned_odd(n):
    with pytest.raises(DomainError):
        conditioned_average(n, 0.3)


def test_unconditioned_average_differs_from_identity():
    assert abs(4 * annealed_exact(4, 0.5).mean - 1) > 1e-3


def test_chain_neutral_frequency():
    prof = HopProfile.from_hops(np.full(9, 0.5))
    est = chain_frequency(prof, 10**6, seed=8, delta=0.0)
    assert est.within(0.1, 4)
    assert est.std_error == pytest.approx(oracles.binomial_sigma(est.mean, 10**6), rel=1e-3)


def test_chain_fixed_environment():
    land = random_landscape(6, 0.6, 21)
    prof = hop_profile(land)
    exact = fixation_probability_exact(prof)
    est = chain_frequency(prof, 10**5, seed=4, delta=0.6)
    assert est.within(exact, 4)


def test_chain_deterministic_drift():
    prof = HopProfile.from_hops(np.ones(7))
    for seed in range(5):
        hit, steps = chain_simulate(prof, stream(seed, "drift"), return_steps=True)
        assert hit and steps == 7


def test_chain_step_cap():
    prof = HopProfile.from_hops(np.full(99, 0.5))
    with pytest.raises(StepCapExceeded):
        for seed in range(50):
            chain_simulate(prof, stream(seed, "cap"), step_cap=3)
    with pytest.raises(StepCapExceeded) as info:
        chain_frequency(prof, 100, seed=1, step_cap=2)
    assert info.value.replicate is not None


def test_chain_frequency_is_worker_independent():
    prof = hop_profile(random_landscape(15, 0.5, 2))
    a = chain_frequency(prof, 5000, seed=3, jobs=1)
    b = chain_frequency(prof, 5000, seed=3, jobs=4)
    assert a == b


def test_estimate_csv_row():
    est = annealed_mc(5, 0.1, 100, seed=12)
    row = est.csv_row()
    assert list(row) == ["n", "delta", "mode", "mean", "std_error", "replicates", "seed"]
    assert float(row["mean"]) == est.mean
    assert row["delta"] == "0.10000000000000001"
    assert row["seed"] == "12"


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(mean=1.2, std_error=0.0, replicates=0, seed=None),
        dict(mean=0.5, std_error=-1.0, replicates=10, seed=1),
        dict(mean=0.5, std_error=0.1, replicates=0, seed=None),
        dict(mean=0.5, std_error=0.1, replicates=10, seed=1, mode="bogus"),
    ],
)
def test_estimate_invariants(kwargs):
    with pytest.raises(ValueError):
        FixationEstimate(**kwargs)
