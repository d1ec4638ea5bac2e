"""Finite-support distributions over types and type-action pairs."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import rel_entr

MASS_ATOL = 1e-12


def check_type_distribution(lam, num_types: int | None = None) -> np.ndarray:
    """Validate a type distribution and return it as a read-only float array."""
    arr = np.array(lam, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError("type distribution is empty")
    if num_types is not None and arr.size != num_types:
        raise ValueError(f"type distribution has {arr.size} entries, expected {num_types}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("type distribution has negative or non-finite weights")
    if abs(arr.sum() - 1.0) > MASS_ATOL * max(1, arr.size):
        raise ValueError(f"type distribution sums to {arr.sum()!r}, not 1")
    arr.setflags(write=False)
    return arr


class TypeActionDistribution:
    """A probability measure on the finite grid ``types x actions``.

    ``mass[w, x]`` is the weight of the pair (w, x). Empirical
    distributions of ``n`` players also carry the integer ``counts``
    matrix, so that ``mass == counts / n`` holds exactly and loads can be
    computed without float drift.
    """

    __slots__ = ("mass", "counts")

    def __init__(self, mass, counts=None, *, validate: bool = True):
        mass = np.array(mass, dtype=float)
        if mass.ndim != 2:
            raise ValueError("mass must be a (types, actions) matrix")
        if counts is not None:
            counts = np.array(counts, dtype=np.int64)
            if counts.shape != mass.shape:
                raise ValueError("counts and mass shapes differ")
            counts.setflags(write=False)
        if validate:
            if not np.all(np.isfinite(mass)) or np.any(mass < 0):
                raise ValueError("mass has negative or non-finite entries")
            if abs(mass.sum() - 1.0) > MASS_ATOL * max(1, mass.size):
                raise ValueError(f"total mass is {mass.sum()!r}, not 1")
            if counts is not None and np.any(counts < 0):
                raise ValueError("negative counts")
        mass.setflags(write=False)
        self.mass = mass
        self.counts = counts

    @classmethod
    def from_counts(cls, counts) -> "TypeActionDistribution":
        counts = np.asarray(counts, dtype=np.int64)
        n = int(counts.sum())
        if n <= 0:
            raise ValueError("counts must contain at least one player")
        return cls(counts / n, counts)

    @classmethod
    def point_mass(cls, shape: tuple[int, int], w: int, x: int) -> "TypeActionDistribution":
        counts = np.zeros(shape, dtype=np.int64)
        counts[w, x] = 1
        return cls.from_counts(counts)

    @property
    def denominator(self) -> int | None:
        return None if self.counts is None else int(self.counts.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.mass.shape

    @property
    def num_types(self) -> int:
        return self.mass.shape[0]

    @property
    def num_actions(self) -> int:
        return self.mass.shape[1]

    def key(self) -> bytes:
        """Exact identity used for deduplication on the empirical lattice."""
        if self.counts is not None:
            return self.counts.tobytes()
        return self.mass.tobytes()

    def __eq__(self, other):
        if not isinstance(other, TypeActionDistribution):
            return NotImplemented
        if self.counts is not None and other.counts is not None:
            return np.array_equal(self.counts, other.counts)
        return self.shape == other.shape and np.array_equal(self.mass, other.mass)

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        extra = "" if self.counts is None else f", n={self.denominator}"
        return f"TypeActionDistribution({np.round(self.mass, 6).tolist()}{extra})"


def marginal_type(m: TypeActionDistribution) -> np.ndarray:
    return m.mass.sum(axis=1)


def marginal_action(m: TypeActionDistribution) -> np.ndarray:
    return m.mass.sum(axis=0)


def relative_entropy(lam, lam0) -> float:
    """Kullback-Leibler divergence H(lam | lam0) in nats.

    Returns ``inf`` when ``lam`` puts mass where ``lam0`` does not.
    """
    lam = np.asarray(lam, dtype=float)
    lam0 = np.asarray(lam0, dtype=float)
    if lam.shape != lam0.shape:
        raise ValueError("distributions have different dimensions")
    value = float(np.sum(rel_entr(lam, lam0)))
    # rel_entr sums can dip a hair below zero near lam == lam0
    return max(value, 0.0)


def empirical_distribution(types: Sequence[int], actions: Sequence[int],
                           shape: tuple[int, int] | None = None) -> TypeActionDistribution:
    """Empirical type-action distribution (1/n) sum_i delta_(w_i, x_i)."""
    types = np.asarray(types, dtype=np.int64).reshape(-1)
    actions = np.asarray(actions, dtype=np.int64).reshape(-1)
    if types.size != actions.size:
        raise ValueError(f"length mismatch: {types.size} types vs {actions.size} actions")
    if types.size == 0:
        raise ValueError("empirical distribution of zero players")
    if np.any(types < 0) or np.any(actions < 0):
        raise ValueError("indices must be non-negative")
    if shape is None:
        shape = (int(types.max()) + 1, int(actions.max()) + 1)
    counts = np.zeros(shape, dtype=np.int64)
    np.add.at(counts, (types, actions), 1)
    return TypeActionDistribution.from_counts(counts)


def tv_distance(m1: TypeActionDistribution, m2: TypeActionDistribution) -> float:
    a = m1.mass if isinstance(m1, TypeActionDistribution) else np.asarray(m1)
    b = m2.mass if isinstance(m2, TypeActionDistribution) else np.asarray(m2)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


def set_distance(m: TypeActionDistribution, candidates) -> float:
    """Distance from ``m`` to the closest member of a finite set."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("distance to an empty set is undefined")
    return min(tv_distance(m, s) for s in candidates)
