"""Sparse storage for uncertain networks.

An uncertain network on ``n`` nodes is a symmetric matrix ``Q`` of per-pair
edge probabilities.  Only the nonzero entries are stored, once per unordered
pair with ``i < j``, sorted lexicographically.  A CSR adjacency index holds
both orientations of every stored pair; entry ``e`` of row ``i`` is the
directed half-edge ``i -> indices[e]``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicatePair,
    NodeIdOutOfRange,
    ProbabilityOutOfRange,
    SelfEdge,
    TooFewNodes,
)


@dataclass(frozen=True)
class Partition:
    """Hard group assignment: ``g[i]`` in ``{0, ..., k-1}``."""

    g: np.ndarray
    k: int

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.int64)
        if g.ndim != 1:
            raise ValueError("partition labels must be one-dimensional")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if g.size and (g.min() < 0 or g.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @property
    def n(self):
        return self.g.size

    def sizes(self):
        return np.bincount(self.g, minlength=self.k)


@dataclass(frozen=True)
class DegreeVector:
    d: np.ndarray
    mode: str  # "exact-binary" or "expected"


class UncertainNetwork:
    """Immutable sparse uncertain network.

    Build instances with :func:`validate` (or :meth:`from_pairs`); the
    constructor assumes canonical, already checked arrays.
    """

    def __init__(self, n, i, j, q):
        self.n = int(n)
        self.i = np.ascontiguousarray(i, dtype=np.int64)
        self.j = np.ascontiguousarray(j, dtype=np.int64)
        self.q = np.ascontiguousarray(q, dtype=np.float64)
        self._build_index()
        for a in (self.i, self.j, self.q, self.indptr, self.indices,
                  self.values, self.pair_of, self.reverse):
            a.setflags(write=False)

    @classmethod
    def from_pairs(cls, pairs, n):
        return validate(pairs, n)

    def _build_index(self):
        n, m = self.n, self.i.size
        src = np.concatenate([self.i, self.j])
        dst = np.concatenate([self.j, self.i])
        pair = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((dst, src))
        self.indices = dst[order]
        self.values = np.concatenate([self.q, self.q])[order]
        self.pair_of = pair[order]
        counts = np.bincount(src, minlength=n)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=self.indptr[1:])
        # reverse[e] is the half-edge pointing the other way
        position = np.empty(2 * m, dtype=np.int64)
        position[order] = np.arange(2 * m)
        reverse = np.empty(2 * m, dtype=np.int64)
        reverse[position[:m]] = position[m:]
        reverse[position[m:]] = position[:m]
        self.reverse = reverse
        # row of each half-edge (its source node)
        self.rows = np.repeat(np.arange(n), counts)
        self.rows.setflags(write=False)

    @property
    def num_pairs(self):
        return self.q.size

    @property
    def num_half_edges(self):
        return self.indices.size

    def neighbors(self, node):
        lo, hi = self.indptr[node], self.indptr[node + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    def degree_counts(self):
        return np.diff(self.indptr)

    def density(self):
        return estimate_density(self)

    def expected_degrees(self):
        return expected_degrees(self)

    def pair_index(self, i, j):
        """Position of the stored pair ``{i, j}``, or -1 when ``Q_ij = 0``."""
        a, b = (i, j) if i < j else (j, i)
        nbrs = self.indices[self.indptr[a]:self.indptr[a + 1]]
        pos = np.searchsorted(nbrs, b)
        if pos < nbrs.size and nbrs[pos] == b:
            return int(self.pair_of[self.indptr[a] + pos])
        return -1

    def to_dense(self):
        Q = np.zeros((self.n, self.n))
        Q[self.i, self.j] = self.q
        Q[self.j, self.i] = self.q
        return Q

    def is_binary(self):
        return bool(np.all(self.q == 1.0))

    def relabel(self, perm):
        """Network with node ``v`` renamed ``perm[v]``."""
        perm = np.asarray(perm)
        return validate((perm[self.i], perm[self.j], self.q), self.n)

    def __eq__(self, other):
        if not isinstance(other, UncertainNetwork):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.i, other.i)
                and np.array_equal(self.j, other.j)
                and np.array_equal(self.q, other.q))

    __hash__ = None

    def __repr__(self):
        return f"UncertainNetwork(n={self.n}, pairs={self.num_pairs})"


def _as_arrays(pairs):
    if isinstance(pairs, tuple) and len(pairs) == 3 and all(
        isinstance(a, np.ndarray) for a in pairs
    ):
        return pairs
    rows = list(pairs)
    if not rows:
        return (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
    i, j, q = zip(*rows)
    return np.asarray(i), np.asarray(j), np.asarray(q, dtype=np.float64)


def validate(pairs, n, lines=None):
    """Check raw ``(i, j, q)`` records and build an :class:`UncertainNetwork`.

    ``pairs`` is an iterable of triples or a tuple of three arrays.  Either
    orientation of a pair is accepted.  ``lines`` optionally maps each record
    to a source line number used in error messages.
    """
    i, j, q = _as_arrays(pairs)
    i = np.asarray(i)
    j = np.asarray(j)
    q = np.asarray(q, dtype=np.float64)
    n = int(n)

    def line_of(idx):
        return None if lines is None else lines[idx]

    if i.size:
        if not (np.issubdtype(i.dtype, np.integer) and np.issubdtype(j.dtype, np.integer)):
            if not (np.all(i == np.round(i)) and np.all(j == np.round(j))):
                raise ValueError("node ids must be integers")
        i = i.astype(np.int64)
        j = j.astype(np.int64)
        bad = np.flatnonzero((i < 0) | (i >= n) | (j < 0) | (j >= n))
        if bad.size:
            b = bad[0]
            node = i[b] if not 0 <= i[b] < n else j[b]
            raise NodeIdOutOfRange(int(node), n, line_of(b))
        bad = np.flatnonzero(i == j)
        if bad.size:
            raise SelfEdge(int(i[bad[0]]), line_of(bad[0]))
        bad = np.flatnonzero(~((q > 0.0) & (q <= 1.0)))
        if bad.size:
            b = bad[0]
            raise ProbabilityOutOfRange(int(i[b]), int(j[b]), float(q[b]), line_of(b))
    lo = np.minimum(i, j).astype(np.int64)
    hi = np.maximum(i, j).astype(np.int64)
    order = np.lexsort((hi, lo))
    lo, hi, q = lo[order], hi[order], q[order]
    if lo.size > 1:
        dup = np.flatnonzero((lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1]))
        if dup.size:
            d = dup[0] + 1
            raise DuplicatePair(int(lo[d]), int(hi[d]), line_of(order[d]))
    return UncertainNetwork(n, lo, hi, q)


def estimate_density(net):
    """Expected-edge estimate of the density: sum of ``Q_ij`` over ``C(n, 2)``."""
    if net.n < 2:
        raise TooFewNodes(f"density needs at least 2 nodes, got {net.n}")
    total = net.n * (net.n - 1) / 2
    return float(np.sum(net.q) / total)


def expected_degrees(net):
    d = np.bincount(net.i, weights=net.q, minlength=net.n)
    d += np.bincount(net.j, weights=net.q, minlength=net.n)
    mode = "exact-binary" if net.is_binary() else "expected"
    return DegreeVector(d, mode)
