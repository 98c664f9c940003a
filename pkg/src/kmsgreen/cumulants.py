"""Set partitions, the moment-cumulant transform and Wick sums.

Index sets are ``{0, ..., n-1}``; a moment family maps every nonempty
``frozenset`` of indices to a (complex) value.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import factorial
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

MAX_PARTITION_ORDER = 12
MAX_CUMULANT_ORDER = 8
MAX_WICK_ORDER = 12

MomentFamily = Mapping[frozenset, complex]


@dataclass(frozen=True)
class SetPartition:
    """Blocks of a partition of ``{0..n-1}``, ordered by least element."""

    blocks: tuple

    @classmethod
    def from_rgs(cls, rgs: Sequence[int]) -> "SetPartition":
        blocks: list[list[int]] = []
        for i, b in enumerate(rgs):
            if b == len(blocks):
                blocks.append([])
            blocks[b].append(i)
        return cls(tuple(tuple(b) for b in blocks))

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)


def restricted_growth_strings(n: int) -> Iterator[list[int]]:
    """All restricted growth strings of length ``n`` in lexicographic order.

    ``a[0] = 0`` and ``a[i] <= 1 + max(a[:i])``.  The yielded list is reused;
    copy it if you keep it.
    """
    if n == 0:
        yield []
        return
    a = [0] * n
    m = [0] * n  # m[i] = max(a[:i+1])
    while True:
        yield a
        i = n - 1
        while i > 0 and a[i] > m[i - 1]:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        m[i] = max(m[i - 1], a[i])
        for j in range(i + 1, n):
            a[j] = 0
            m[j] = m[i]


def enumerate_partitions(n: int) -> Iterator[SetPartition]:
    """Every partition of ``{0..n-1}`` once, in restricted-growth-string order."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_PARTITION_ORDER:
        raise ValueError(f"n must be an integer in 1..{MAX_PARTITION_ORDER}, got {n!r}")
    for rgs in restricted_growth_strings(n):
        yield SetPartition.from_rgs(rgs)


def _lookup(family: MomentFamily, block) -> complex:
    key = frozenset(block)
    try:
        return family[key]
    except KeyError:
        raise ValueError(f"moment family has no value for subset {sorted(key)}") from None


def truncate(moments: MomentFamily, n: int) -> complex:
    """Connected part ``sum_pi (|pi|-1)! (-1)^(|pi|-1) prod_B G(B)``."""
    total = 0j
    for part in enumerate_partitions(n):
        k = len(part)
        term = complex(factorial(k - 1) * (-1) ** (k - 1))
        for block in part:
            term *= _lookup(moments, block)
        total += term
    return total


def untruncate(cumulants: MomentFamily, n: int) -> complex:
    """Moment ``sum_pi prod_B G^T(B)``; inverse of :func:`truncate`."""
    total = 0j
    for part in enumerate_partitions(n):
        term = 1 + 0j
        for block in part:
            term *= _lookup(cumulants, block)
        total += term
    return total


def subsets(n: int):
    """Nonempty subsets of ``{0..n-1}`` as sorted tuples, by size."""
    for r in range(1, n + 1):
        yield from combinations(range(n), r)


def matchings(items: Sequence[int], singletons: bool = False) -> Iterator[list[tuple]]:
    """Pairings of ``items``; with ``singletons`` also blocks of size one.

    Perfect matchings of ``2m`` items number ``(2m-1)!!``.
    """
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    if singletons:
        for tail in matchings(rest, True):
            yield [(first,)] + tail
    for i, other in enumerate(rest):
        for tail in matchings(rest[:i] + rest[i + 1:], singletons):
            yield [(first, other)] + tail


def gaussian_moment(cov: np.ndarray, mean: np.ndarray | None = None) -> complex:
    """``E prod_i X_i`` for a Gaussian vector with covariance ``cov`` and mean ``mean``.

    Isserlis/Wick: sum over pairings (and singletons when a mean is present).
    """
    cov = np.asarray(cov)
    n = cov.shape[0]
    if n > MAX_WICK_ORDER:
        raise ValueError(f"Wick sums are enumerated only up to n = {MAX_WICK_ORDER}")
    if n == 0:
        return 1 + 0j
    with_mean = mean is not None and np.any(np.asarray(mean) != 0)
    if not with_mean and n % 2:
        return 0j
    total = 0j
    for pairing in matchings(range(n), singletons=with_mean):
        term = 1 + 0j
        for block in pairing:
            term *= mean[block[0]] if len(block) == 1 else cov[block[0], block[1]]
        total += term
    return total


def double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def moment_family(moment: Callable[[tuple], complex], n: int) -> dict:
    """``{frozenset(B): moment(B)}`` over all nonempty ``B``; ``moment`` takes a sorted index tuple."""
    return {frozenset(sub): moment(sub) for sub in subsets(n)}


def cumulant(model, points) -> complex:
    """Connected n-point Schwinger function of ``model`` at ``points`` (n <= 8).

    All subset moments come from Wick sums, then :func:`truncate` is applied.
    """
    from .greens import subset_moments

    n = len(points)
    if not 1 <= n <= MAX_CUMULANT_ORDER:
        raise ValueError(f"cumulants are computed for 1 <= n <= {MAX_CUMULANT_ORDER}, got {n}")
    return truncate(subset_moments(model, points), n)


def mixture_cumulant(measure, kind: str, circle, points) -> complex:
    """Cumulant of the mixture ``sum_i w_i G_i`` of free functionals at sharp-time ``points``."""
    from .greens import Mixture

    return cumulant(Mixture(measure, kind, circle), points)
