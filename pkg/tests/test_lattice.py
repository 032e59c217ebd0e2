import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixlab.environment import FitnessLandscape, hop_profile, sample_landscape
from fixlab.errors import DomainError, StepCapExceeded
from fixlab.lattice import (
    Configuration,
    Topology,
    apply_edge,
    estimate_fixation,
    fixed_environment_frequency,
    run_dynamics,
)
from fixlab.limits import g
from fixlab.rng import stream
from fixlab.solver import annealed_mc, fixation_probability_exact

import oracles


def z_score(a, b):
    return abs(a.mean - b.mean) / math.hypot(a.std_error, b.std_error)


def test_topology_edges():
    assert Topology("line", 3).edges() == [(0, 1), (1, 0), (1, 2), (2, 1)]
    ring = Topology("circle", 3).edges()
    assert len(ring) == 6 and (2, 0) in ring and (0, 2) in ring


@pytest.mark.parametrize("kind, n", [("line", 1), ("circle", 2), ("torus", 5)])
def test_topology_validation(kind, n):
    with pytest.raises(DomainError):
        Topology(kind, n)


def test_configuration_from_sites():
    top = Topology("circle", 6)
    cfg = Configuration.from_sites(top, [5, 0])
    assert cfg.left == 5 and cfg.count == 2
    assert Configuration.from_sites(top, [1, 3]).left is None
    with pytest.raises(DomainError):
        Configuration.from_sites(top, range(6))
    with pytest.raises(DomainError):
        Configuration.from_sites(top, [7])


@settings(max_examples=200)
@given(
    st.integers(3, 9).flatmap(
        lambda n: st.tuples(
            st.lists(st.integers(0, 1), min_size=n, max_size=n),
            st.lists(st.floats(0.01, 0.99), min_size=n, max_size=n),
            st.integers(0, 2 * n - 1),
            st.floats(0, 1, exclude_max=True),
        )
    )
)
def test_edges_between_like_sites_change_nothing(args):
    states, beta, e, u = args
    states = np.array(states, dtype=np.uint8)
    src, dst = Topology("circle", states.size).edges()[e]
    after = apply_edge(states, np.array(beta), src, dst, u)
    if states[src] == states[dst]:
        assert np.array_equal(after, states)
    else:
        changed = np.flatnonzero(after != states)
        assert set(changed) <= {dst}
        expected = beta[dst] if states[src] == 1 else 1 - beta[dst]
        assert (changed.size == 1) == (u < expected)


def test_neutral_line_estimate():
    est = estimate_fixation("line", 10, 0.0, 10**5, seed=3)
    assert est.within(0.1, 4)
    assert est.mode == "sim-line" and est.topology == "line"


def test_neutral_line_single_environment_million():
    land = FitnessLandscape(10, 0.0, np.ones(10), np.ones(10))
    est = fixed_environment_frequency(land, Topology("line", 10), 10**6, seed=5)
    assert est.within(0.1, 4)


@pytest.mark.parametrize("sampler", ["effective", "naive"])
def test_line_fixed_environment_matches_formula(sampler):
    land = sample_landscape(6, 0.7, stream(31, "env"))
    exact = fixation_probability_exact(hop_profile(land))
    est = fixed_environment_frequency(land, Topology("line", 6), 10**5, seed=6, sampler=sampler)
    assert est.within(exact, 4)


def test_reduction_equivalence_twenty_environments():
    rng = stream(42, "reduction")
    for i in range(20):
        n = int(rng.integers(2, 9))
        delta = float(rng.uniform(0.1, 0.9))
        land = sample_landscape(n, delta, stream(42, "reduction-env", i))
        exact = fixation_probability_exact(hop_profile(land))
        assert exact == pytest.approx(oracles.line_exact(land.normal_signs, land.mutant_signs, delta), abs=1e-12)
        est = fixed_environment_frequency(land, Topology("line", n), 10**5, seed=i)
        sigma = oracles.binomial_sigma(exact, 10**5)
        assert abs(est.mean - exact) <= 4 * sigma, (i, land.encode())


@pytest.mark.parametrize("n, delta", [(3, 0.5), (4, 0.8), (5, 0.3)])
def test_circle_fixed_environment_matches_arc_chain(n, delta):
    land = sample_landscape(n, delta, stream(n, "ring-env"))
    exact = oracles.circle_exact(hop_profile(land).beta)
    for sampler in ("effective", "naive"):
        est = fixed_environment_frequency(land, Topology("circle", n), 10**5, seed=2, sampler=sampler)
        assert abs(est.mean - exact) <= 4 * oracles.binomial_sigma(exact, 10**5)


@pytest.mark.parametrize("n, delta", [(3, 0.6), (4, 0.4)])
def test_circle_annealed_matches_enumerated_arc_chain(n, delta):
    exact = oracles.circle_annealed(n, delta)
    est = estimate_fixation("circle", n, delta, 10**5, seed=4)
    assert est.within(exact, 4)


@pytest.mark.parametrize("kind, n", [("line", 12), ("circle", 12), ("line", 40), ("circle", 40)])
def test_samplers_agree(kind, n):
    delta = 2 / math.sqrt(n)
    a = estimate_fixation(kind, n, delta, 10**5, seed=8, sampler="effective")
    b = estimate_fixation(kind, n, delta, 10**5, seed=9, sampler="naive")
    assert z_score(a, b) < 4


def test_prefix_invariant_in_debug_runs():
    for n in (2, 5, 11, 20):
        estimate_fixation("line", n, 0.6, 10**4, seed=n, sampler="naive", check=True)


def test_interval_invariant_from_interior_start():
    land = sample_landscape(15, 0.5, stream(1, "interior"))
    fixed_environment_frequency(land, Topology("line", 15), 10**4, seed=1, initial_mutants=[6, 7], sampler="naive", check=True)


def test_arc_invariant_in_debug_runs():
    for n in (3, 8, 20):
        estimate_fixation("circle", n, 0.6, 10**4, seed=n, sampler="naive", check=True)
    land = sample_landscape(10, 0.5, stream(2, "wrap"))
    fixed_environment_frequency(land, Topology("circle", 10), 10**4, seed=2, initial_mutants=[9, 0, 1], sampler="naive", check=True)


def test_invariant_check_catches_split_sets():
    land = sample_landscape(8, 0.3, stream(3, "split"))
    with pytest.raises(AssertionError, match="interval"):
        run_dynamics(land, Topology("line", 8), stream(0, "split"), initial_mutants=[1, 5], check=True)


def test_circle_start_site_is_irrelevant():
    n = 17
    delta = 2 / math.sqrt(n)
    a = estimate_fixation("circle", n, delta, 10**5, seed=10, start=0)
    b = estimate_fixation("circle", n, delta, 10**5, seed=11, start=math.ceil(n / 2))
    assert z_score(a, b) < 4


def test_run_dynamics_single_runs():
    land = FitnessLandscape(4, 0.0, np.ones(4), np.ones(4))
    outcomes = [run_dynamics(land, Topology("line", 4), stream(s, "one")) for s in range(2000)]
    assert abs(np.mean(outcomes) - 0.25) < 4 * math.sqrt(0.25 * 0.75 / 2000)
    hit, steps = run_dynamics(land, Topology("circle", 4), stream(0, "one"), sampler="effective", return_steps=True)
    assert isinstance(hit, bool) and steps >= 1


def test_run_dynamics_rejects_mismatch():
    land = FitnessLandscape(4, 0.0, np.ones(4), np.ones(4))
    with pytest.raises(DomainError):
        run_dynamics(land, Topology("line", 5), stream(0, "x"))
    with pytest.raises(DomainError):
        run_dynamics(land, Topology("line", 4), stream(0, "x"), initial_mutants=[0, 2], sampler="effective")


def test_step_cap_reports_replicate():
    with pytest.raises(StepCapExceeded) as info:
        estimate_fixation("line", 30, 0.1, 5000, seed=1, step_cap=5)
    assert info.value.replicate is not None and info.value.cap == 5


def test_worker_independence():
    a = estimate_fixation("circle", 30, 0.3, 5000, seed=12, jobs=1)
    b = estimate_fixation("circle", 30, 0.3, 5000, seed=12, jobs=4)
    assert a == b


@pytest.mark.slow
def test_line_simulation_matches_annealed_solver():
    n = 50
    delta = 2 / math.sqrt(n)
    sim = estimate_fixation("line", n, delta, 10**6, seed=13)
    mc = annealed_mc(n, delta, 10**6, seed=14)
    assert z_score(sim, mc) < 4


@pytest.mark.slow
def test_circle_fifty_sites_recorded(capsys):
    n = 50
    est = estimate_fixation("circle", n, 2 / math.sqrt(n), 10**6, seed=15)
    scaled, err = est.scaled
    inside = 1 < scaled < g(2).value
    with capsys.disabled():
        print(f"\n  circle N=50 c=2: N*mean = {scaled:.4f} +- {err:.4f}; inside (1, g(2)={g(2).value:.4f}): {inside}")
    # only the lower bracket is structural; the upper one is the recorded expectation
    assert scaled > 1


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_exact_small_rings_sit_above_the_line(n):
    # exact annealed values under the specified ring dynamics, no sampling involved
    ring = oracles.circle_annealed(n, 0.6)
    line = oracles.brute_annealed(n, 0.6)
    assert ring > line
