from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

CSV_FIELDS = ("n", "delta", "mode", "mean", "std_error", "replicates", "seed")
SIM_CSV_FIELDS = CSV_FIELDS + ("topology",)
MODES = ("exact", "mc", "conditioned", "chain", "sim-line", "sim-circle")


def fmt_float(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def sample_mean_se(values: np.ndarray) -> tuple[float, float]:
    """Mean and standard error with a fixed reduction order.

    ``math.fsum`` makes the mean independent of how the samples were produced,
    and a constant sample returns its value and zero error exactly.
    """
    values = np.asarray(values, dtype=np.float64)
    m = values.size
    if m == 0:
        raise ValueError("no samples")
    lo, hi = values.min(), values.max()
    if lo == hi:
        return float(lo), 0.0
    mean = math.fsum(values) / m
    if m < 2:
        return mean, math.nan
    dev = values - mean
    var = math.fsum(dev * dev) / (m - 1)
    return mean, math.sqrt(var / m)


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo average: point value, standard error, replicate count, seed."""

    mean: float
    std_error: float
    replicates: int
    seed: Optional[int]

    @property
    def exact(self) -> bool:
        return self.replicates == 0

    def within(self, target: float, k: float = 4.0) -> bool:
        return abs(self.mean - target) <= k * self.std_error


@dataclass(frozen=True)
class FixationEstimate(Estimate):
    n_sites: int = 0
    delta: float = 0.0
    mode: str = "mc"
    topology: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.mean <= 1.0:
            raise ValueError(f"fixation probability {self.mean} outside [0, 1]")
        if self.std_error < 0:
            raise ValueError("negative standard error")
        if self.exact and self.std_error != 0:
            raise ValueError("exact estimates carry zero standard error")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def from_samples(cls, values, *, seed, n_sites, delta, mode, topology=None):
        mean, se = sample_mean_se(values)
        return cls(
            mean=mean,
            std_error=se,
            replicates=int(np.asarray(values).size),
            seed=seed,
            n_sites=n_sites,
            delta=delta,
            mode=mode,
            topology=topology,
        )

    @property
    def scaled(self) -> tuple[float, float]:
        """``N * mean`` and its standard error."""
        return self.n_sites * self.mean, self.n_sites * self.std_error

    def csv_row(self) -> dict[str, str]:
        row = {
            "n": str(self.n_sites),
            "delta": fmt_float(self.delta),
            "mode": self.mode,
            "mean": fmt_float(self.mean),
            "std_error": fmt_float(self.std_error),
            "replicates": str(self.replicates),
            "seed": "" if self.seed is None else str(self.seed),
        }
        if self.topology is not None:
            row["topology"] = self.topology
        return row

    def to_dict(self) -> dict:
        return asdict(self)
