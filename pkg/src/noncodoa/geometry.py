"""Sparse linear array geometries and difference-coarray analysis.

Positions are non-negative integers in units of the minimum inter-sensor
spacing d. Two families of subarray layouts are supported:

* type-1: an existing sparse array split into order-preserving segments;
* type-2: a reference subarray replicated by translation, each copy placed
  a gap of ``mu`` grid cells beyond the previous copy's last sensor.

The module also computes coarray weight functions, degrees of freedom (DoF)
and the analytic DoF bound for translated-subarray (type-2) layouts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

__all__ = [
    "ArrayGeometry",
    "SubarrayPartition",
    "WeightFunction",
    "BoundResult",
    "DofBoundReport",
    "UnsupportedSizeError",
    "make_ula",
    "make_nested",
    "make_mra",
    "type1_split",
    "type2_build",
    "weight_function",
    "dof",
    "dof_bound_type2",
    "check_dof_bound",
]


class UnsupportedSizeError(ValueError):
    """Requested array size is outside the built-in lookup table."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Sensor positions of a linear array, as integer multiples of d.

    Positions must be unique, non-negative and strictly increasing. A
    *normalized* geometry starts at 0; constructors return normalized
    geometries, while subarrays inside a partition may start anywhere.
    """

    positions: tuple[int, ...]

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        if len(pos) == 0:
            raise ValueError("geometry needs at least one sensor")
        if pos[0] < 0:
            raise ValueError("positions must be non-negative")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("positions must be strictly increasing")
        object.__setattr__(self, "positions", pos)

    @property
    def n_sensors(self) -> int:
        return len(self.positions)

    @property
    def aperture(self) -> int:
        """Largest minus smallest position."""
        return self.positions[-1] - self.positions[0]

    @property
    def is_normalized(self) -> bool:
        return self.positions[0] == 0

    def translate(self, delta: int) -> "ArrayGeometry":
        """Shift every sensor by ``delta`` grid cells (result must stay >= 0)."""
        return ArrayGeometry(tuple(p + int(delta) for p in self.positions))

    def normalized(self) -> "ArrayGeometry":
        """Shift so that the first sensor sits at 0."""
        return self.translate(-self.positions[0])

    def as_array(self) -> np.ndarray:
        return np.array(self.positions, dtype=np.int64)


Kind = Literal["type1", "type2"]


@dataclass(frozen=True)
class SubarrayPartition:
    """Ordered, pairwise-disjoint subarrays whose union is the full array.

    ``kind`` records how the partition was built. For ``"type1"`` the
    subarrays are consecutive segments (every position of subarray i is
    below every position of subarray j for i < j); ``"type2"`` partitions
    are translated copies of a reference subarray.
    """

    subarrays: tuple[ArrayGeometry, ...]
    kind: Kind

    def __post_init__(self):
        subs = tuple(self.subarrays)
        if len(subs) == 0:
            raise ValueError("partition needs at least one subarray")
        if self.kind not in ("type1", "type2"):
            raise ValueError(f"unknown partition kind {self.kind!r}")
        seen: set[int] = set()
        for s in subs:
            overlap = seen.intersection(s.positions)
            if overlap:
                raise ValueError(f"subarrays share sensors {sorted(overlap)}")
            seen.update(s.positions)
        if self.kind == "type1":
            for a, b in zip(subs, subs[1:]):
                if a.positions[-1] >= b.positions[0]:
                    raise ValueError("type1 subarrays must be in segment order")
        object.__setattr__(self, "subarrays", subs)

    @property
    def n_subarrays(self) -> int:
        return len(self.subarrays)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(s.n_sensors for s in self.subarrays)

    @property
    def n_sensors(self) -> int:
        return sum(self.sizes)

    @property
    def full_array(self) -> ArrayGeometry:
        """Union of the subarrays as a single geometry."""
        merged = sorted(p for s in self.subarrays for p in s.positions)
        return ArrayGeometry(tuple(merged))

    @property
    def is_multiple_invariant(self) -> bool:
        """True when all subarrays are translated copies of the first one."""
        ref = self.subarrays[0].normalized().positions
        return all(s.normalized().positions == ref for s in self.subarrays)


@dataclass(frozen=True)
class WeightFunction:
    """Coarray weight function: number of sensor pairs at each lag.

    ``counts[k]`` holds w(k - max_lag) for k in 0..2*max_lag, i.e. a dense
    table over lags -max_lag..max_lag. w is even, w(0) equals the sensor
    count and the counts sum to (sensor count)^2.
    """

    counts: np.ndarray
    max_lag: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (2 * self.max_lag + 1,):
            raise ValueError("counts must cover lags -max_lag..max_lag")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    def w(self, lag: int) -> int:
        """Pair count at an arbitrary integer lag (0 outside the table)."""
        if abs(lag) > self.max_lag:
            return 0
        return int(self.counts[lag + self.max_lag])

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.max_lag, self.max_lag + 1)

    def support(self) -> np.ndarray:
        """Lags with at least one sensor pair."""
        return self.lags[self.counts > 0]

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.counts))


def make_ula(n: int) -> ArrayGeometry:
    """Uniform linear array with ``n`` sensors at 0..n-1."""
    if n < 1:
        raise ValueError("ULA needs at least one sensor")
    return ArrayGeometry(tuple(range(n)))


def make_nested(n1: int, n2: int) -> ArrayGeometry:
    """Two-level nested array: dense ULA stage plus sparse outer stage.

    Positions are {0..n1-1} followed by {k*(n1+1)-1 : k=1..n2}, giving
    n1+n2 sensors with a hole-free difference coarray.

    References:
        P. Pal and P. P. Vaidyanathan, "Nested arrays: A novel approach to
        array processing with enhanced degrees of freedom," IEEE Trans.
        Signal Process., vol. 58, no. 8, 2010.
    """
    if n1 < 1 or n2 < 1:
        raise ValueError("both nested stages need at least one sensor")
    inner = list(range(n1))
    outer = [k * (n1 + 1) - 1 for k in range(1, n2 + 1)]
    return ArrayGeometry(tuple(inner + outer))


# Restricted minimum-redundancy arrays: hole-free difference coarray with
# the largest aperture known for the given sensor count. Entries up to 9
# follow the classical tables; 10..12 are Wichmann-type sparse rulers.
#
# References:
#   A. Moffet, "Minimum-redundancy linear arrays," IEEE Trans. Antennas
#   Propag., vol. 16, no. 2, 1968.
#   B. Wichmann, "A note on restricted difference bases," J. London Math.
#   Soc., vol. 38, 1963.
_MRA_TABLE: dict[int, tuple[int, ...]] = {
    1: (0,),
    2: (0, 1),
    3: (0, 1, 3),
    4: (0, 1, 4, 6),
    5: (0, 1, 4, 7, 9),
    6: (0, 1, 6, 9, 11, 13),
    7: (0, 1, 8, 11, 13, 15, 17),
    8: (0, 1, 4, 10, 16, 18, 21, 23),
    9: (0, 1, 4, 10, 16, 22, 24, 27, 29),
    10: (0, 1, 3, 6, 13, 20, 27, 31, 35, 36),
    11: (0, 1, 3, 6, 13, 20, 27, 34, 38, 42, 43),
    12: (0, 1, 3, 6, 13, 20, 27, 34, 41, 45, 49, 50),
}


def make_mra(n: int) -> ArrayGeometry:
    """Restricted minimum-redundancy array with ``n`` sensors.

    Looked up from published tables (n in 1..12); larger sizes raise
    UnsupportedSizeError since the underlying search is exponential.
    """
    if n not in _MRA_TABLE:
        raise UnsupportedSizeError(
            f"no minimum-redundancy table entry for n={n} (supported: 1..{max(_MRA_TABLE)})"
        )
    return ArrayGeometry(_MRA_TABLE[n])


def type1_split(s: ArrayGeometry, sizes: Sequence[int]) -> SubarrayPartition:
    """Split an array into consecutive segments of the given sizes.

    Segment boundaries follow index order, so the segment-order condition
    (all of subarray i below all of subarray j for i < j) holds by
    construction.
    """
    sizes = [int(k) for k in sizes]
    if any(k < 1 for k in sizes):
        raise ValueError("segment sizes must be positive")
    if sum(sizes) != s.n_sensors:
        raise ValueError(
            f"segment sizes sum to {sum(sizes)}, array has {s.n_sensors} sensors"
        )
    subs = []
    start = 0
    for k in sizes:
        subs.append(ArrayGeometry(s.positions[start : start + k]))
        start += k
    return SubarrayPartition(tuple(subs), kind="type1")


def type2_build(s1: ArrayGeometry, l: int, mu: int) -> SubarrayPartition:
    """Union of ``l`` translated copies of a reference subarray.

    Copy i is copy i-1 shifted by mu + (aperture of copy i-1), so
    consecutive copies are separated by a gap of ``mu`` grid cells. With a
    single reference geometry all copies share one aperture and the
    partition is multiple invariant.
    """
    if not s1.is_normalized:
        raise ValueError("reference subarray must be normalized (start at 0)")
    if l < 1:
        raise ValueError("need at least one subarray")
    if mu < 1:
        raise ValueError("subarray gap mu must be >= 1")
    subs = [s1]
    for _ in range(1, l):
        prev = subs[-1]
        subs.append(prev.translate(mu + prev.aperture))
    return SubarrayPartition(tuple(subs), kind="type2")


def weight_function(s: ArrayGeometry) -> WeightFunction:
    """Count sensor pairs at every lag: w(n) = #{(p,q) : p - q = n}."""
    pos = s.as_array()
    kappa = s.aperture
    diffs = (pos[:, None] - pos[None, :]).ravel()
    counts = np.bincount(diffs + kappa, minlength=2 * kappa + 1)
    return WeightFunction(counts.astype(np.int64), kappa)


def dof(s: ArrayGeometry) -> int:
    """Degrees of freedom: number of distinct lags in the difference coarray."""
    return weight_function(s).support_size


@dataclass(frozen=True)
class BoundResult:
    """DoF bound for a type-2 layout: an exact value or an upper bound."""

    kind: Literal["upper_bound", "exact"]
    value: int


def dof_bound_type2(sdof: int, l: int, mu: int) -> BoundResult:
    """Analytic DoF bound for ``l`` translated copies of one subarray.

    ``sdof`` is the (odd) DoF of a single subarray, assumed hole-free so
    its aperture is (sdof-1)/2. Beyond that aperture the copies' coarrays
    cannot overlap and the total DoF is exactly (2l-1)*sdof; for smaller
    gaps the support is bounded by l*(sdof-1) + 2*(l-1)*mu + 1, attained
    when the subarray coarray is hole-free.
    """
    if sdof < 1 or sdof % 2 == 0:
        raise ValueError("subarray DoF must be a positive odd integer")
    if l < 1:
        raise ValueError("need at least one subarray")
    if mu < 1:
        raise ValueError("subarray gap mu must be >= 1")
    kappa = (sdof - 1) // 2
    if mu > kappa:
        return BoundResult("exact", (2 * l - 1) * sdof)
    return BoundResult("upper_bound", l * (sdof - 1) + 2 * (l - 1) * mu + 1)


def _shift_identity_holds(full: WeightFunction, sub: WeightFunction, deltas: Sequence[int]) -> bool:
    """Check that the full weight function is the sum of pairwise-shifted
    copies of the subarray weight function (shifts delta_i - delta_j)."""
    max_lag = full.max_lag
    acc = np.zeros(2 * max_lag + 1, dtype=np.int64)
    for di, dj in itertools.product(deltas, repeat=2):
        shift = di - dj
        lo = -sub.max_lag + shift
        hi = sub.max_lag + shift
        if lo < -max_lag or hi > max_lag:
            return False
        acc[lo + max_lag : hi + max_lag + 1] += sub.counts
    return bool(np.array_equal(acc, full.counts))


@dataclass(frozen=True)
class DofBoundReport:
    """Brute-force DoF of a type-2 layout checked against the analytic bound."""

    bruteforce_dof: int
    bound: BoundResult
    subarray_holefree: bool
    shift_identity_ok: bool
    satisfied: bool
    partition: SubarrayPartition = field(repr=False)


def check_dof_bound(s1: ArrayGeometry, l: int, mu: int) -> DofBoundReport:
    """Build the type-2 layout for (s1, l, mu) and verify its DoF bound.

    The brute-force DoF comes from the full array's weight function. For a
    hole-free subarray coarray the bound must be met with equality (and
    exactly (2l-1)*sdof once mu exceeds the subarray aperture); for a holey
    subarray only the inequality is required, and the report carries both
    numbers. The translation-shift identity of the weight function is
    checked exactly in integer arithmetic.
    """
    if not s1.is_normalized:
        raise ValueError("reference subarray must be normalized (start at 0)")
    partition = type2_build(s1, l, mu)
    w_full = weight_function(partition.full_array)
    w_sub = weight_function(s1)
    sdof = w_sub.support_size
    kappa = s1.aperture
    holefree = sdof == 2 * kappa + 1

    if mu > kappa:
        # No coarray overlap between copies regardless of holes.
        bound = BoundResult("exact", (2 * l - 1) * sdof)
    elif holefree:
        bound = dof_bound_type2(sdof, l, mu)
    else:
        # Holey subarray: the support still fits inside the widest
        # reachable lag interval, parametrized by the true aperture.
        delta = mu + kappa
        bound = BoundResult("upper_bound", 2 * ((l - 1) * delta + kappa) + 1)

    bf = w_full.support_size
    if bound.kind == "exact":
        bound_ok = bf == bound.value
    elif holefree:
        bound_ok = bf == bound.value
    else:
        bound_ok = bf <= bound.value

    deltas = [sub.positions[0] for sub in partition.subarrays]
    identity_ok = _shift_identity_holds(w_full, w_sub, deltas)
    return DofBoundReport(
        bruteforce_dof=bf,
        bound=bound,
        subarray_holefree=holefree,
        shift_identity_ok=identity_ok,
        satisfied=bound_ok and identity_ok,
        partition=partition,
    )
