"""Site-level simulation of the invasion dynamics on a line or a ring.

Each step picks a directed nearest-neighbour edge ``(j, k)`` uniformly; if the
two sites differ, ``k`` takes the type of ``j`` with probability ``beta[k]``
(``j`` mutant) or ``1 - beta[k]`` (``j`` normal). Only the discrete-time
version is implemented: the continuous-time version with rate-1 edge clocks
has the same jump chain, hence the same absorption law.

Two samplers are provided. ``"naive"`` draws edges from the full edge set and
tracks the whole configuration. ``"effective"`` draws only among the edges on
the boundary of the mutant interval/arc, which has the same absorption law
and skips the null steps.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from fixlab import _kernels
from fixlab.environment import FitnessLandscape, beta_values, check_delta, draw_signs, hop_profile
from fixlab.errors import DomainError, StepCapExceeded
from fixlab.rng import BLOCK_SIZE, block_sizes, check_seed, concat_blocks, map_blocks, stream
from fixlab.stats import FixationEstimate

LATTICE_STEP_CAP = 10**10
SAMPLERS = ("effective", "naive")


@dataclass(frozen=True)
class Topology:
    kind: str
    n_sites: int

    def __post_init__(self):
        if self.kind not in ("line", "circle"):
            raise DomainError(f"unknown topology {self.kind!r}")
        minimum = 3 if self.kind == "circle" else 2
        if int(self.n_sites) < minimum:
            raise DomainError(f"a {self.kind} needs at least {minimum} sites")
        object.__setattr__(self, "n_sites", int(self.n_sites))

    @property
    def circle(self) -> bool:
        return self.kind == "circle"

    def edges(self) -> list[tuple[int, int]]:
        """Directed edges, in the order the naive sampler indexes them."""
        n = self.n_sites
        count = n if self.circle else n - 1
        out = []
        for i in range(count):
            j = (i + 1) % n
            out += [(i, j), (j, i)]
        return out


@dataclass(frozen=True, eq=False)
class Configuration:
    """Mutant indicator per site plus the block it forms (``left``, ``count``).

    ``left`` is ``None`` when the mutant set is not a single interval/arc.
    """

    states: np.ndarray
    left: Optional[int]
    count: int

    @classmethod
    def from_sites(cls, topology: Topology, sites: Iterable[int]) -> "Configuration":
        n = topology.n_sites
        states = np.zeros(n, dtype=np.uint8)
        for s in sites:
            if not 0 <= int(s) < n:
                raise DomainError(f"site {s} outside 0..{n - 1}")
            states[int(s)] = 1
        count = int(states.sum())
        if not 0 < count < n:
            raise DomainError("the initial mutant set must be nonempty and proper")
        return cls(states, _block_start(states, topology.circle), count)


def _block_start(states: np.ndarray, circle: bool) -> Optional[int]:
    n = states.size
    if circle:
        starts = [i for i in range(n) if states[i] == 1 and states[i - 1] == 0]
    else:
        starts = [i for i in range(n) if states[i] == 1 and (i == 0 or states[i - 1] == 0)]
    return starts[0] if len(starts) == 1 else None


def apply_edge(states: np.ndarray, beta: np.ndarray, src: int, dst: int, u: float) -> np.ndarray:
    """One reproduction event along the directed edge ``src -> dst``, as the naive sampler applies it.

    Returns the new configuration. ``u`` is the uniform draw deciding
    whether the offspring takes hold; edges between like sites change nothing.
    """
    out = np.array(states, dtype=np.uint8, copy=True)
    _kernels.apply_edge(out, np.asarray(beta, dtype=np.float64), int(src), int(dst), float(u))
    return out


def _check_sampler(sampler: str) -> bool:
    if sampler not in SAMPLERS:
        raise DomainError(f"sampler must be one of {SAMPLERS}, got {sampler!r}")
    return sampler == "naive"


def _raise_for(status: np.ndarray, offset: int, cap: int) -> None:
    bad = np.flatnonzero(status < 0)
    if not bad.size:
        return
    i = int(bad[0])
    if status[i] == _kernels.BROKEN:
        raise AssertionError(f"replicate {offset + i}: mutant set stopped being an interval")
    raise StepCapExceeded(cap, offset + i)


def run_dynamics(
    landscape: FitnessLandscape,
    topology: Topology,
    rng: np.random.Generator,
    initial_mutants: Iterable[int] = (0,),
    sampler: str = "naive",
    step_cap: int = LATTICE_STEP_CAP,
    check: bool = False,
    return_steps: bool = False,
):
    """Run one invasion to absorption; True if every site ends up mutant.

    ``check=True`` verifies after every state change that the mutant set is
    still a prefix (line started at site 0), an interval (other line starts)
    or an arc (ring). The effective sampler needs a single interval/arc start.
    """
    if landscape.n_sites != topology.n_sites:
        raise DomainError("landscape and topology disagree on the number of sites")
    naive = _check_sampler(sampler)
    config = Configuration.from_sites(topology, initial_mutants)
    beta = hop_profile(landscape).beta
    if naive:
        states = config.states.copy()
        status, steps = _kernels.lattice_naive(beta, topology.circle, states, rng, int(step_cap), bool(check))
    else:
        if config.left is None:
            raise DomainError("the effective sampler needs the mutants to form one interval")
        status, steps = _kernels.lattice_effective(
            beta, topology.circle, config.left, config.count, rng, int(step_cap)
        )
    _raise_for(np.array([status]), 0, step_cap)
    hit = status == _kernels.FIXED
    return (hit, int(steps)) if return_steps else hit


def fixed_environment_frequency(
    landscape: FitnessLandscape,
    topology: Topology,
    replicates: int,
    seed: int,
    initial_mutants: Iterable[int] = (0,),
    sampler: str = "effective",
    jobs: int = 1,
    step_cap: int = LATTICE_STEP_CAP,
    check: bool = False,
    tag: str = "lattice-fixed",
) -> FixationEstimate:
    """Fixation frequency over repeated runs in one environment."""
    seed = check_seed(seed)
    naive = _check_sampler(sampler)
    config = Configuration.from_sites(topology, initial_mutants)
    if not naive and config.left is None:
        raise DomainError("the effective sampler needs the mutants to form one interval")
    beta = hop_profile(landscape).beta
    sizes = block_sizes(replicates)

    def run(b):
        status, _ = _kernels.fixed_lattice_block(
            beta, topology.circle, naive, config.states, config.left or 0, config.count,
            stream(seed, tag, topology.kind, b), sizes[b], int(step_cap), bool(check),
        )
        _raise_for(status, b * BLOCK_SIZE, step_cap)
        return status.astype(np.float64)

    values = concat_blocks(map_blocks(run, len(sizes), jobs))
    return FixationEstimate.from_samples(
        values, seed=seed, n_sites=topology.n_sites, delta=landscape.delta,
        mode=f"sim-{topology.kind}", topology=topology.kind,
    )


def estimate_fixation(
    topology: Topology | str,
    n: int,
    delta: float,
    replicates: int,
    seed: int,
    sampler: str = "effective",
    start: int = 0,
    jobs: int = 1,
    step_cap: int = LATTICE_STEP_CAP,
    check: bool = False,
    tag: str = "lattice",
) -> FixationEstimate:
    """Annealed fixation frequency: a fresh environment and one run per replicate."""
    if isinstance(topology, str):
        topology = Topology(topology, n)
    if topology.n_sites != int(n):
        raise DomainError("topology size and n disagree")
    if int(replicates) < 2:
        raise DomainError("need at least two replicates")
    n = topology.n_sites
    delta = check_delta(delta)
    seed = check_seed(seed)
    naive = _check_sampler(sampler)
    if not 0 <= int(start) < n:
        raise DomainError(f"start site {start} outside 0..{n - 1}")
    beta_table = beta_values(
        np.array([-1, 1, -1, 1], dtype=np.float64), np.array([-1, -1, 1, 1], dtype=np.float64), delta
    )
    sizes = block_sizes(replicates)

    def run(b):
        rng = stream(seed, tag, topology.kind, b)
        signs = draw_signs(rng, sizes[b], n)
        status, _ = _kernels.lattice_block(
            np.ascontiguousarray(signs[:, 0]), np.ascontiguousarray(signs[:, 1]), beta_table,
            topology.circle, naive, int(start), rng, int(step_cap), bool(check),
        )
        _raise_for(status, b * BLOCK_SIZE, step_cap)
        return status.astype(np.float64)

    values = concat_blocks(map_blocks(run, len(sizes), jobs))
    return FixationEstimate.from_samples(
        values, seed=seed, n_sites=n, delta=delta, mode=f"sim-{topology.kind}", topology=topology.kind
    )
