"""Permutations of ``{0, ..., N-1}`` and tuples of them.

A permutation is stored as its image array: ``p.mapping[j]`` is the image
of ``j``. Tuples ``(sigma_1, ..., sigma_M)`` index the rows and columns of
every matrix built in this package. Their order is the mixed-radix Lehmer
order with ``sigma_1`` the most significant digit, so the identity tuple has
rank 0.

Operator indices ``m`` are 1-based throughout (``1 <= m <= M``) and use
clock arithmetic, so ``sigma_0`` means ``sigma_M``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_DEGREE = 6
MAX_DENSE_DIM = 20_000


class GuardError(ValueError):
    """Raised when a degree or matrix dimension is outside the supported range."""


@dataclass(frozen=True)
class Permutation:
    mapping: tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(v) for v in self.mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError(f"not a bijection on 0..{len(mapping) - 1}: {mapping}")
        object.__setattr__(self, "mapping", mapping)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @property
    def degree(self) -> int:
        return len(self.mapping)

    def __call__(self, j: int) -> int:
        return self.mapping[j]

    def __matmul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def is_identity(self) -> bool:
        return all(v == j for j, v in enumerate(self.mapping))

    def __repr__(self) -> str:
        return f"Permutation{self.mapping}"


@dataclass(frozen=True)
class PermTuple:
    """An element of ``(S_N)^M``."""

    parts: tuple[Permutation, ...]

    def __post_init__(self):
        parts = tuple(p if isinstance(p, Permutation) else Permutation(p) for p in self.parts)
        if not parts:
            raise ValueError("a tuple needs at least one part (M >= 1)")
        if len({p.degree for p in parts}) != 1:
            raise ValueError("all parts must have the same degree")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def of(cls, *parts: Sequence[int] | Permutation) -> "PermTuple":
        return cls(tuple(parts))

    @classmethod
    def identity(cls, n: int, m: int) -> "PermTuple":
        return cls((Permutation.identity(n),) * m)

    @property
    def N(self) -> int:
        return self.parts[0].degree

    @property
    def M(self) -> int:
        return len(self.parts)

    def __getitem__(self, m: int) -> Permutation:
        """1-based access with clock arithmetic: ``t[0] is t[M]``."""
        return self.parts[(m - 1) % self.M]

    def __repr__(self) -> str:
        return "PermTuple(" + ", ".join(str(p.mapping) for p in self.parts) + ")"


def _check_degree(n: int) -> None:
    if not 1 <= n <= MAX_DEGREE:
        raise GuardError(f"degree N={n} outside supported range 1..{MAX_DEGREE}")


def enumerate_group(n: int) -> list[Permutation]:
    """All ``n!`` permutations in lexicographic order of their image arrays."""
    _check_degree(n)
    return [Permutation(p) for p in itertools.permutations(range(n))]


def compose(a: Permutation, b: Permutation) -> Permutation:
    """``(a o b)(j) = a(b(j))``."""
    if a.degree != b.degree:
        raise ValueError(f"degree mismatch: {a.degree} vs {b.degree}")
    return Permutation(tuple(a.mapping[j] for j in b.mapping))


def invert(a: Permutation) -> Permutation:
    inv = [0] * a.degree
    for j, v in enumerate(a.mapping):
        inv[v] = j
    return Permutation(tuple(inv))


def _same_shape(s: PermTuple, t: PermTuple) -> None:
    if (s.N, s.M) != (t.N, t.M):
        raise ValueError(f"shape mismatch: (N, M) = {(s.N, s.M)} vs {(t.N, t.M)}")


def transition(t: PermTuple, m: int) -> Permutation:
    """The ``m-1 -> m`` transition ``sigma_m^{-1} sigma_{m-1}`` (``sigma_0 = sigma_M``)."""
    if not 1 <= m <= t.M:
        raise IndexError(f"transition index m={m} outside 1..{t.M}")
    return compose(invert(t[m]), t[m - 1])


def _require_even(M: int) -> None:
    if M % 2:
        raise ValueError(f"defined only for even M (got M={M})")


def equiv_even(s: PermTuple, t: PermTuple) -> bool:
    """True iff ``s`` and ``t`` share every even-indexed transition."""
    _same_shape(s, t)
    _require_even(s.M)
    return all(transition(s, m) == transition(t, m) for m in range(2, s.M + 1, 2))


def equiv_odd(s: PermTuple, t: PermTuple) -> bool:
    """True iff ``s`` and ``t`` share every odd-indexed transition."""
    _same_shape(s, t)
    _require_even(s.M)
    return all(transition(s, m) == transition(t, m) for m in range(1, s.M + 1, 2))


def weaves(s: PermTuple, t: PermTuple) -> bool:
    """Closed-loop condition between ``s`` and ``t``.

    The loop product interleaves the odd transitions of ``s`` with the even
    transitions of ``t``::

        (s_1^-1 s_M)(t_M^-1 t_{M-1})(s_{M-1}^-1 s_{M-2}) ... (t_2^-1 t_1) = e

    For ``M = 2`` this is ``s_1^-1 s_2 = t_1^-1 t_2``. The relation holds
    exactly when some tuple has the odd transitions of ``s`` and the even
    transitions of ``t``.
    """
    _same_shape(s, t)
    _require_even(s.M)
    prod = transition(s, 1)
    for m in range(s.M, 1, -1):
        prod = compose(prod, transition(t if m % 2 == 0 else s, m))
    return prod.is_identity()


def cycle_shift(s: PermTuple) -> PermTuple:
    """Left rotation ``(s_1, ..., s_M) -> (s_2, ..., s_M, s_1)``."""
    return PermTuple(s.parts[1:] + s.parts[:1])


def hamming(s: PermTuple, t: PermTuple) -> int:
    """Number of sites ``(m, j)`` with ``s_m(j) != t_m(j)``."""
    _same_shape(s, t)
    return sum(a != b for p, q in zip(s.parts, t.parts) for a, b in zip(p.mapping, q.mapping))


def lehmer_rank(p: Permutation) -> int:
    """Rank of ``p`` in lexicographic order (Lehmer code read as factorial base)."""
    n = p.degree
    rank = 0
    remaining = list(range(n))
    for j, v in enumerate(p.mapping):
        idx = remaining.index(v)
        rank += idx * math.factorial(n - 1 - j)
        remaining.pop(idx)
    return rank


def lehmer_unrank(rank: int, n: int) -> Permutation:
    if not 0 <= rank < math.factorial(n):
        raise ValueError(f"rank {rank} out of range for degree {n}")
    remaining = list(range(n))
    out = []
    for j in range(n):
        f = math.factorial(n - 1 - j)
        idx, rank = divmod(rank, f)
        out.append(remaining.pop(idx))
    return Permutation(tuple(out))


def tuple_rank(s: PermTuple) -> int:
    _check_degree(s.N)
    base = math.factorial(s.N)
    rank = 0
    for p in s.parts:
        rank = rank * base + lehmer_rank(p)
    return rank


def tuple_unrank(rank: int, n: int, m: int) -> PermTuple:
    _check_degree(n)
    base = math.factorial(n)
    if not 0 <= rank < base**m:
        raise ValueError(f"rank {rank} out of range for (N, M) = ({n}, {m})")
    digits = []
    for _ in range(m):
        rank, d = divmod(rank, base)
        digits.append(d)
    return PermTuple(tuple(lehmer_unrank(d, n) for d in reversed(digits)))


def dense_dimension(n: int, m: int) -> int:
    """``D = (N!)^M``, refusing sizes beyond the dense-matrix guard."""
    _check_degree(n)
    if m < 1:
        raise ValueError("M must be >= 1")
    D = math.factorial(n) ** m
    if D > MAX_DENSE_DIM:
        raise GuardError(f"D = ({n}!)^{m} = {D} exceeds dense guard {MAX_DENSE_DIM}")
    return D


# ---------------------------------------------------------------------------
# Vectorised group tables. Group elements are referred to by their Lehmer
# rank; tuples by their tuple rank.
# ---------------------------------------------------------------------------


class SymmetricGroup:
    """Multiplication and inverse tables for ``S_n`` indexed by Lehmer rank."""

    def __init__(self, n: int):
        _check_degree(n)
        self.n = n
        self.order = math.factorial(n)
        self.elements = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(
            self.order, n
        )
        weights = np.array([n**(n - 1 - j) for j in range(n)], dtype=np.int64)
        codes = self.elements @ weights
        lookup = {int(c): i for i, c in enumerate(codes)}
        # mul[a, b] = index of a o b, i.e. j -> a(b(j))
        composed = np.take_along_axis(
            self.elements[:, None, :].repeat(self.order, axis=1),
            self.elements[None, :, :].repeat(self.order, axis=0),
            axis=2,
        )
        self.mul = np.vectorize(lookup.__getitem__)(composed @ weights).astype(np.int64)
        self.inv = np.argmax(self.mul == 0, axis=1)
        # number of points moved differently by a and b
        self.distance = (self.elements[:, None, :] != self.elements[None, :, :]).sum(axis=2)

    def permutation(self, idx: int) -> Permutation:
        return Permutation(tuple(self.elements[idx]))


@lru_cache(maxsize=None)
def symmetric_group(n: int) -> SymmetricGroup:
    return SymmetricGroup(n)


class TupleSpace:
    """All of ``(S_N)^M`` in rank order, with per-tuple transitions.

    ``parts[r, m-1]`` is the group index of ``sigma_m`` for the tuple of rank
    ``r``; ``transitions[r, m-1]`` is the group index of its ``m``-th
    transition.
    """

    def __init__(self, n: int, m: int, *, guard: bool = True):
        self.N, self.M = n, m
        self.group = symmetric_group(n)
        if guard:
            self.D = dense_dimension(n, m)
        else:
            self.D = self.group.order**m
        ranks = np.arange(self.D, dtype=np.int64)
        base = self.group.order
        self.parts = np.empty((self.D, m), dtype=np.int64)
        for col in range(m - 1, -1, -1):
            ranks, self.parts[:, col] = np.divmod(ranks, base)
        g = self.group
        prev = np.roll(self.parts, 1, axis=1)  # column m-1 holds sigma_{m-1}
        self.transitions = g.mul[g.inv[self.parts], prev]
        shifted = np.roll(self.parts, -1, axis=1)
        self.shift = self.rank_parts(shifted)

    def rank_parts(self, parts: np.ndarray) -> np.ndarray:
        base = self.group.order
        r = np.zeros(parts.shape[0], dtype=np.int64)
        for col in range(self.M):
            r = r * base + parts[:, col]
        return r

    def tuple(self, r: int) -> PermTuple:
        return PermTuple(tuple(self.group.permutation(i) for i in self.parts[r]))

    def class_labels(self, parity: str) -> np.ndarray:
        """Equivalence-class label of every tuple under ``~ev`` or ``~odd``."""
        _require_even(self.M)
        cols = {"even": slice(1, None, 2), "odd": slice(0, None, 2)}[parity]
        _, labels = np.unique(self.transitions[:, cols], axis=0, return_inverse=True)
        return labels.reshape(-1)

    def weave_matrix(self) -> np.ndarray:
        """Boolean ``D x D`` array with entry ``(s, t)`` true iff ``s`` weaves ``t``."""
        _require_even(self.M)
        g = self.group
        tr = self.transitions
        prod = np.broadcast_to(tr[:, 0][:, None], (self.D, self.D)).copy()
        for m in range(self.M, 1, -1):
            if m % 2 == 0:
                nxt = tr[:, m - 1][None, :]
            else:
                nxt = tr[:, m - 1][:, None]
            prod = g.mul[prod, nxt]
        return prod == 0

    def weaving_partners(self, t: int) -> np.ndarray:
        """Boolean vector over ``mu``: does ``mu`` weave with tuple ``t``."""
        _require_even(self.M)
        g = self.group
        tr = self.transitions
        prod = tr[:, 0].copy()
        for m in range(self.M, 1, -1):
            if m % 2 == 0:
                prod = g.mul[prod, tr[t, m - 1]]
            else:
                prod = g.mul[prod, tr[:, m - 1]]
        return prod == 0

    def hamming_to(self, t: int) -> np.ndarray:
        d = self.group.distance
        return d[self.parts, self.parts[t][None, :]].sum(axis=1)


def iter_tuples(n: int, m: int) -> Iterable[PermTuple]:
    group = enumerate_group(n)
    for parts in itertools.product(group, repeat=m):
        yield PermTuple(parts)
