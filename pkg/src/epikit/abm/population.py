"""Synthetic population with age structure and multi-layer contact graphs."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ..errors import InvalidDistribution

N_AGE_BINS = 10
SCHOOL_AGES = (6, 21)
WORK_AGES = (22, 65)


class LayerKind(enum.Enum):
    HOUSEHOLD = "household"
    SCHOOL = "school"
    WORK = "work"
    COMMUNITY = "community"


@dataclass(frozen=True)
class LayerConfig:
    """Contact structure knobs: per-layer transmission weights and mean
    numbers of daily contacts for the random-graph layers."""

    household_weight: float = 3.0
    school_weight: float = 0.6
    work_weight: float = 0.6  # paper-silent; same as school (structured daytime)
    community_weight: float = 0.3
    school_contacts: float = 20.0
    work_contacts: float = 16.0
    community_contacts: float = 20.0
    community_resampled_daily: bool = True


@dataclass(frozen=True)
class Csr:
    """Compressed adjacency: neighbors of agent i are
    indices[indptr[i]:indptr[i+1]]."""

    indptr: np.ndarray
    indices: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2


@dataclass(frozen=True)
class Population:
    """Static structure shared by all runs: ages and contact graphs.

    Disease state lives in the simulation, not here, so ensemble runs can
    share one Population without copying.
    """

    size: int
    ages: np.ndarray  # exact age in years
    age_bins: np.ndarray  # age // 10, capped at 9
    household_id: np.ndarray
    household: Csr
    school: Csr
    work: Csr
    layers: LayerConfig
    seed: int

    def age_bin_counts(self) -> np.ndarray:
        return np.bincount(self.age_bins, minlength=N_AGE_BINS)

    def mean_household_size(self) -> float:
        return self.size / (self.household_id.max() + 1)


def _empty_csr(n: int) -> Csr:
    return Csr(indptr=np.zeros(n + 1, dtype=np.int64), indices=np.empty(0, dtype=np.int32))


def _csr_from_edges(n: int, a: np.ndarray, b: np.ndarray) -> Csr:
    """Undirected edge list -> CSR with both directions stored."""
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return Csr(indptr=indptr, indices=dst.astype(np.int32))


def _random_graph(eligible: np.ndarray, mean_degree: float, n: int, rng) -> Csr:
    """Seeded random graph over the eligible agents with the given mean degree."""
    ne = len(eligible)
    if ne < 2 or mean_degree <= 0:
        return _empty_csr(n)
    n_edges = int(round(ne * mean_degree / 2.0))
    a = eligible[rng.integers(0, ne, n_edges)]
    b = eligible[rng.integers(0, ne, n_edges)]
    keep = a != b
    a, b = a[keep], b[keep]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    uniq = np.unique(np.stack([lo, hi], axis=1), axis=0)
    return _csr_from_edges(n, uniq[:, 0], uniq[:, 1])


def _truncated_poisson_lambda(mean: float) -> float:
    """Rate of a zero-truncated Poisson with the given mean."""
    if mean <= 1.0 + 1e-9:
        return 0.0
    return brentq(lambda lam: lam / (1.0 - np.exp(-lam)) - mean, 1e-9, 50.0)


def synthesize_population(
    size: int,
    age_distribution,
    mean_household_size: float = 3.0,
    layer_config: LayerConfig | None = None,
    seed: int = 0,
) -> Population:
    """Build a seeded synthetic population.

    Ages follow the 10-bin histogram (exact age uniform within a bin);
    household sizes follow a zero-truncated Poisson matched to the target
    mean; school/work edges are seeded random graphs over the eligible age
    ranges.  Identical arguments produce a byte-identical Population.
    """
    if size < 100:
        raise InvalidDistribution("population size must be >= 100")
    hist = np.asarray(age_distribution, dtype=float)
    if hist.shape != (N_AGE_BINS,) or np.any(hist < 0):
        raise InvalidDistribution("age distribution must be 10 non-negative bins")
    if abs(hist.sum() - 1.0) > 1e-6:
        raise InvalidDistribution(f"age distribution sums to {hist.sum():.8f}, not 1")
    if not 1.0 <= mean_household_size <= 10.0:
        raise InvalidDistribution("mean household size must be in [1, 10]")
    layers = layer_config or LayerConfig()
    rng = np.random.default_rng(seed)

    counts = rng.multinomial(size, hist / hist.sum())
    ages = np.repeat(np.arange(N_AGE_BINS) * 10, counts) + rng.integers(
        0, 10, size, dtype=np.int64
    )
    rng.shuffle(ages)
    age_bins = np.minimum(ages // 10, N_AGE_BINS - 1).astype(np.int8)

    lam = _truncated_poisson_lambda(mean_household_size)
    if lam == 0.0:
        sizes = np.ones(size, dtype=np.int64)
    else:
        # oversample, keep non-zero draws until the population is covered
        sizes = []
        need = size
        while need > 0:
            draw = rng.poisson(lam, max(64, int(1.2 * need / mean_household_size)))
            draw = draw[draw > 0]
            sizes.append(draw)
            need -= int(draw.sum())
        sizes = np.concatenate(sizes)
        cum = np.cumsum(sizes)
        last = int(np.searchsorted(cum, size))
        sizes = sizes[: last + 1]
        sizes[-1] -= int(cum[last] - size)
        sizes = sizes[sizes > 0]
    household_id = np.repeat(np.arange(len(sizes)), sizes).astype(np.int32)

    # household cliques as CSR
    order = np.argsort(household_id, kind="stable")
    indptr = np.zeros(size + 1, dtype=np.int64)
    hh_sizes = np.bincount(household_id)
    indptr[1:] = np.cumsum(hh_sizes[household_id] - 1)
    neigh = np.empty(indptr[-1], dtype=np.int32)
    start = 0
    for s in hh_sizes:
        members = order[start : start + s]
        for j in range(s):
            at = indptr[members[j]]
            neigh[at : at + j] = members[:j]
            neigh[at + j : at + s - 1] = members[j + 1 :]
        start += s
    household = Csr(indptr=indptr, indices=neigh)

    school = _random_graph(
        np.flatnonzero((ages >= SCHOOL_AGES[0]) & (ages <= SCHOOL_AGES[1])).astype(np.int32),
        layers.school_contacts,
        size,
        rng,
    )
    work = _random_graph(
        np.flatnonzero((ages >= WORK_AGES[0]) & (ages <= WORK_AGES[1])).astype(np.int32),
        layers.work_contacts,
        size,
        rng,
    )
    return Population(
        size=size,
        ages=ages,
        age_bins=age_bins,
        household_id=household_id,
        household=household,
        school=school,
        work=work,
        layers=layers,
        seed=seed,
    )
