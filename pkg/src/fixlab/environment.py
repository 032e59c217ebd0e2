"""Random fitness landscapes and the hop probabilities they induce.

Each site ``k`` (0-based here; site 0 is where the invader starts) carries a
normal fitness ``1 + delta * normal_signs[k]`` and a mutant fitness
``1 + delta * mutant_signs[k]`` with independent fair signs. A reproduction
attempt into site ``k`` installs the mutant type with probability

    beta[k] = mutant fitness / (mutant fitness + normal fitness).

Some texts call the normal fitness ``mu``; the annealed law is symmetric under
swapping the two sign families, so nothing averaged over environments depends
on which one is put in the numerator. Here it is always the mutant's.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from fixlab.errors import DomainError, InfeasibleError

ENUMERATION_CAP = 10


def check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 <= delta < 1.0:
        raise DomainError(f"delta must lie in [0, 1), got {delta}")
    return delta


def _signs(values, n: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int8).reshape(-1).copy()
    if arr.size != n:
        raise DomainError(f"{name} has {arr.size} entries, expected {n}")
    if not np.all((arr == 1) | (arr == -1)):
        raise DomainError(f"{name} entries must be +1 or -1")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FitnessLandscape:
    n_sites: int
    delta: float
    normal_signs: np.ndarray
    mutant_signs: np.ndarray

    def __post_init__(self):
        if int(self.n_sites) < 1:
            raise DomainError("a landscape needs at least one site")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        object.__setattr__(self, "delta", check_delta(self.delta))
        object.__setattr__(self, "normal_signs", _signs(self.normal_signs, self.n_sites, "normal_signs"))
        object.__setattr__(self, "mutant_signs", _signs(self.mutant_signs, self.n_sites, "mutant_signs"))

    @property
    def normal_fitness(self) -> np.ndarray:
        return 1.0 + self.delta * self.normal_signs

    @property
    def mutant_fitness(self) -> np.ndarray:
        return 1.0 + self.delta * self.mutant_signs

    def swapped(self) -> "FitnessLandscape":
        """Exchange the roles of the two types."""
        return FitnessLandscape(self.n_sites, self.delta, self.mutant_signs, self.normal_signs)

    def encode(self) -> str:
        return (
            f"N={self.n_sites} delta={self.delta!r} "
            f"B={_sign_string(self.normal_signs)} B'={_sign_string(self.mutant_signs)}"
        )

    __str__ = encode

    def __repr__(self):
        return f"FitnessLandscape({self.encode()!r})"

    def __eq__(self, other):
        if not isinstance(other, FitnessLandscape):
            return NotImplemented
        return self.encode() == other.encode()

    def __hash__(self):
        return hash(self.encode())


def _sign_string(signs: np.ndarray) -> str:
    return "".join("+" if s > 0 else "-" for s in signs)


_ENCODING = re.compile(r"^N=(\d+) delta=(\S+) B=([+-]+) B'=([+-]+)$")


def parse_landscape(text: str) -> FitnessLandscape:
    """Inverse of :meth:`FitnessLandscape.encode`."""
    m = _ENCODING.match(text.strip())
    if m is None:
        raise DomainError(f"not a landscape encoding: {text!r}")
    n, delta, b, bp = m.groups()
    to_arr = lambda s: np.array([1 if ch == "+" else -1 for ch in s], dtype=np.int8)
    return FitnessLandscape(int(n), float(delta), to_arr(b), to_arr(bp))


def sample_landscape(n: int, delta: float, rng: np.random.Generator) -> FitnessLandscape:
    """Draw the ``2n`` fair signs of one environment from ``rng``.

    Rows are drawn in the same layout as the batched samplers: normal signs
    first, then mutant signs.
    """
    if int(n) < 2:
        raise DomainError(f"need n >= 2 sites, got {n}")
    delta = check_delta(delta)
    signs = draw_signs(rng, 1, int(n))[0]
    return FitnessLandscape(int(n), delta, signs[0], signs[1])


def draw_signs(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    """``(m, 2, n)`` array of fair +-1 signs: ``[:, 0]`` normal, ``[:, 1]`` mutant."""
    bits = rng.integers(0, 2, size=(m, 2, n), dtype=np.int8)
    return (2 * bits - 1).astype(np.int8)


def all_sign_arrays(n: int, cap: int = ENUMERATION_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Every assignment of the ``2n`` signs, as two ``(4**n, n)`` arrays.

    Row ``i`` has normal sign ``k`` from bit ``k`` of ``i`` and mutant sign ``k``
    from bit ``n + k`` (bit set means +1).
    """
    n = int(n)
    if n < 1:
        raise DomainError(f"need n >= 1 sites, got {n}")
    if n > cap:
        raise InfeasibleError(
            f"enumerating 4**{n} environments exceeds the cap of n={cap}; use Monte Carlo instead"
        )
    idx = np.arange(4**n, dtype=np.int64)[:, None]
    k = np.arange(n, dtype=np.int64)[None, :]
    normal = (2 * ((idx >> k) & 1) - 1).astype(np.int8)
    mutant = (2 * ((idx >> (n + k)) & 1) - 1).astype(np.int8)
    return normal, mutant


def conditioned_mask(normal: np.ndarray, mutant: np.ndarray) -> np.ndarray:
    return normal.sum(axis=1, dtype=np.int64) == mutant.sum(axis=1, dtype=np.int64)


def enumerate_landscapes(
    n: int, delta: float, cap: int = ENUMERATION_CAP
) -> Iterator[tuple[FitnessLandscape, Fraction]]:
    """All ``4**n`` environments, each with weight ``4**-n``."""
    delta = check_delta(delta)
    normal, mutant = all_sign_arrays(n, cap)
    w = Fraction(1, 4 ** int(n))
    for b, bp in zip(normal, mutant):
        yield FitnessLandscape(int(n), delta, b, bp), w


def _check_even(n: int) -> int:
    n = int(n)
    if n < 2 or n % 2:
        raise DomainError(
            f"conditioning on equal sign sums needs an even number of sites (n = 2k), got {n}"
        )
    return n


def enumerate_conditioned(
    n: int, delta: float, cap: int = ENUMERATION_CAP
) -> Iterator[tuple[FitnessLandscape, Fraction]]:
    """Environments with ``sum(normal_signs) == sum(mutant_signs)``, uniformly weighted."""
    n = _check_even(n)
    delta = check_delta(delta)
    normal, mutant = all_sign_arrays(n, cap)
    keep = conditioned_mask(normal, mutant)
    w = Fraction(1, int(keep.sum()))
    for b, bp in zip(normal[keep], mutant[keep]):
        yield FitnessLandscape(n, delta, b, bp), w


def beta_values(normal_signs, mutant_signs, delta: float) -> np.ndarray:
    """``(1 + delta a) / (2 + delta (a + b))`` with ``a`` the mutant sign, ``b`` the normal sign.

    Only the side with the larger numerator is divided out; the other is
    ``1 - x``, exact for ``x >= 1/2``. This keeps the role swap an exact
    complement in floating point, and ties give exactly 1/2.
    """
    a = np.asarray(mutant_signs, dtype=np.float64)
    b = np.asarray(normal_signs, dtype=np.float64)
    upper = (1.0 + delta * np.maximum(a, b)) / (2.0 + delta * (a + b))
    return np.where(a >= b, upper, 1.0 - upper)


@dataclass(frozen=True, eq=False)
class HopProfile:
    """Site success probabilities and the induced birth-death hop probabilities.

    ``hop[i]`` is the probability that the right-most mutant moves from
    ``i + 1`` to ``i + 2`` (states count mutants, so state ``i + 1`` means
    sites ``0..i`` are mutant). ``beta`` is ``None`` for profiles built
    directly from hop probabilities.
    """

    n_sites: int
    hop: np.ndarray
    beta: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        n = int(self.n_sites)
        if n < 2:
            raise DomainError("a hop profile needs at least two sites")
        hop = np.asarray(self.hop, dtype=np.float64).reshape(-1).copy()
        if hop.size != n - 1:
            raise DomainError(f"expected {n - 1} hop probabilities, got {hop.size}")
        if not np.all((hop >= 0.0) & (hop <= 1.0)):
            raise DomainError("hop probabilities must lie in [0, 1]")
        hop.setflags(write=False)
        object.__setattr__(self, "n_sites", n)
        object.__setattr__(self, "hop", hop)
        if self.beta is not None:
            beta = np.asarray(self.beta, dtype=np.float64).reshape(-1).copy()
            if beta.size != n:
                raise DomainError(f"expected {n} site probabilities, got {beta.size}")
            if not np.all((beta > 0.0) & (beta < 1.0)):
                raise DomainError("site probabilities must lie in (0, 1)")
            beta.setflags(write=False)
            object.__setattr__(self, "beta", beta)

    @classmethod
    def from_beta(cls, beta) -> "HopProfile":
        beta = np.asarray(beta, dtype=np.float64)
        hop = beta[1:] / (beta[1:] + (1.0 - beta[:-1]))
        return cls(beta.size, hop, beta)

    @classmethod
    def from_hops(cls, hop) -> "HopProfile":
        hop = np.asarray(hop, dtype=np.float64)
        return cls(hop.size + 1, hop)


def hop_profile(landscape: FitnessLandscape) -> HopProfile:
    return HopProfile.from_beta(
        beta_values(landscape.normal_signs, landscape.mutant_signs, landscape.delta)
    )
