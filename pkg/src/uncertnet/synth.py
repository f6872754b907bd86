"""Planted-partition benchmark generator for uncertain networks.

A partition and a binary network are drawn from a stochastic block model,
then every edge is replaced by a probability drawn from ``Beta(a1, b1)`` and
every non-edge by zero (with probability ``1 - c``) or a draw from
``Beta(a0, b0)``.  The shape parameters and ``c`` are tied together so that
among all pairs observed at probability ``Q`` a fraction ``Q`` are true
edges.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln

from .errors import InfeasibleNoise, InvalidShape, InvalidSimplex, DegenerateRho
from .network import Partition, UncertainNetwork, validate

MIN_SHAPE = 1e-6
NON_EDGE_CEILING = 1.0 - 1e-12
CONSISTENCY_RTOL = 1e-9


def _check_simplex(gamma, tol=1e-12):
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.ndim != 1 or gamma.size == 0:
        raise InvalidSimplex("gamma must be a non-empty vector")
    if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
        raise InvalidSimplex(f"gamma has negative or non-finite entries: {gamma}")
    if abs(gamma.sum() - 1.0) > tol:
        raise InvalidSimplex(f"gamma sums to {gamma.sum()!r}, not 1")
    return gamma


@dataclass(frozen=True)
class BlockParams:
    """Group prior ``gamma`` and symmetric block edge-probability matrix ``omega``."""

    gamma: np.ndarray
    omega: np.ndarray
    check_range: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        gamma = _check_simplex(self.gamma)
        omega = np.array(self.omega, dtype=np.float64, ndmin=2)
        if omega.shape != (gamma.size, gamma.size):
            raise ValueError(f"omega must be {gamma.size}x{gamma.size}, got {omega.shape}")
        if not np.array_equal(omega, omega.T):
            raise ValueError("omega must be symmetric")
        if np.any(omega < 0) or (self.check_range and np.any(omega > 1)):
            raise ValueError("omega entries must lie in [0, 1]")
        gamma = gamma.copy()
        gamma.setflags(write=False)
        omega.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "omega", omega)

    @property
    def k(self):
        return self.gamma.size

    @classmethod
    def planted(cls, k, omega_in, omega_out, gamma=None):
        """Equal-size (by default) assortative model with two levels of omega."""
        omega = np.full((k, k), float(omega_out))
        np.fill_diagonal(omega, float(omega_in))
        if gamma is None:
            gamma = np.full(k, 1.0 / k)
        return cls(gamma, omega)

    def permuted(self, perm):
        perm = np.asarray(perm)
        return BlockParams(self.gamma[perm], self.omega[np.ix_(perm, perm)],
                           self.check_range)


@dataclass(frozen=True)
class NoiseSpec:
    """Beta-plus-spike noise.  ``noiseless`` bypasses sampling so that Q = A."""

    a1: float
    b1: float
    a0: float
    b0: float
    c: float
    rho: float
    noiseless: bool = False

    @classmethod
    def exact(cls, rho=float("nan")):
        return cls(math.inf, 0.0, math.inf, 1.0, 0.0, rho, noiseless=True)

    def consistency_error(self, grid=None):
        """Max relative error of ``beta1/beta0`` against ``(Q/rho)/((1-Q)/(1-rho))``."""
        if grid is None:
            grid = np.arange(0.05, 0.951, 0.05)
        Q = np.asarray(grid, dtype=np.float64)
        log_b1 = (self.a1 - 1) * np.log(Q) + (self.b1 - 1) * np.log1p(-Q) - betaln(self.a1, self.b1)
        log_b0 = (math.log(self.c) + (self.a0 - 1) * np.log(Q)
                  + (self.b0 - 1) * np.log1p(-Q) - betaln(self.a0, self.b0))
        target = np.log(Q / self.rho) - np.log((1 - Q) / (1 - self.rho))
        return float(np.max(np.abs(np.expm1(log_b1 - log_b0 - target))))


@dataclass(frozen=True)
class NoiseRequest:
    """What the caller fixes; the remaining noise parameter is solved for."""

    b1: float = 1.0
    a1: float = None
    c: float = None
    noiseless: bool = False


@dataclass(frozen=True)
class PlantedInstance:
    network: UncertainNetwork
    truth_partition: Partition
    truth_edges: np.ndarray  # (m, 2), rows (u, v) with u < v, sorted
    params: BlockParams
    noise: NoiseSpec
    seed: object

    @property
    def n(self):
        return self.network.n


def solve_noise(b1, rho, a1=None, c=None):
    """Complete a consistent :class:`NoiseSpec` from ``b1``, ``rho`` and one of ``a1``/``c``.

    Substituting the two beta densities into the consistency ratio forces
    ``a0 = a1 - 1``, ``b0 = b1 + 1`` and ``c = rho/(1-rho) * b1/(a1-1)``.
    """
    if (a1 is None) == (c is None):
        raise ValueError("give exactly one of a1 and c")
    if not b1 > 0:
        raise InvalidShape(f"b1 must be positive, got {b1!r}")
    if not 0 < rho < 1:
        raise DegenerateRho(f"rho must lie in (0, 1), got {rho!r}")
    odds = rho / (1 - rho)
    if a1 is not None:
        if not a1 > 1:
            raise InvalidShape(f"a1 must exceed 1, got {a1!r}")
        if a1 - 1 < MIN_SHAPE:
            raise InvalidShape(f"a0 = a1 - 1 = {a1 - 1!r} is below {MIN_SHAPE}")
        c = odds * b1 / (a1 - 1)
        if not 0 < c <= 1:
            raise InfeasibleNoise(c)
    else:
        if not 0 < c <= 1:
            raise InfeasibleNoise(c)
        a1 = 1 + odds * b1 / c
        if a1 - 1 < MIN_SHAPE:
            raise InvalidShape(f"solved a1 = {a1!r} leaves a0 below {MIN_SHAPE}")
    spec = NoiseSpec(float(a1), float(b1), float(a1 - 1), float(b1 + 1), float(c), float(rho))
    err = spec.consistency_error()
    if not err < CONSISTENCY_RTOL:
        raise InfeasibleNoise(c, f"noise spec fails the consistency check (rel. error {err:.3g})")
    return spec


def sample_partition(n, gamma, rng):
    gamma = _check_simplex(gamma)
    g = rng.choice(gamma.size, size=n, p=gamma / gamma.sum())
    return Partition(g, gamma.size)


def _bernoulli_positions(total, p, rng):
    """Sorted positions in ``range(total)``, each kept independently with probability p.

    Uses geometric gaps, so the cost is proportional to the number kept.
    """
    if total <= 0 or p <= 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(total, dtype=np.int64)
    out = []
    start = -1
    while True:
        mean = total * p
        chunk = int(mean + 6 * math.sqrt(mean) + 16)
        pos = start + np.cumsum(rng.geometric(p, size=chunk))
        keep = pos[pos < total]
        out.append(keep)
        if keep.size < pos.size:
            break
        start = int(pos[-1])
    return np.concatenate(out)


def _unrank_pairs(t):
    """Invert ``t = j*(j-1)/2 + i`` for ``0 <= i < j``."""
    t = np.asarray(t, dtype=np.int64)
    j = np.floor((1 + np.sqrt(1 + 8 * t.astype(np.float64))) / 2).astype(np.int64)
    j -= (j * (j - 1) // 2 > t)
    j += ((j + 1) * j // 2 <= t)
    i = t - j * (j - 1) // 2
    return i, j


def _rank_pairs(i, j):
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    return hi * (hi - 1) // 2 + lo


def _canonical_edges(u, v):
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    order = np.lexsort((hi, lo))
    return np.stack([lo[order], hi[order]], axis=1).astype(np.int64)


def sample_network(partition, omega, rng):
    """Draw SBM edges; returns an ``(m, 2)`` array of pairs ``u < v``, sorted."""
    omega = np.asarray(omega, dtype=np.float64)
    g = partition.g
    members = [np.flatnonzero(g == r) for r in range(partition.k)]
    us, vs = [], []
    for r in range(partition.k):
        for s in range(r, partition.k):
            p = omega[r, s]
            if r == s:
                size = members[r].size
                pos = _bernoulli_positions(size * (size - 1) // 2, p, rng)
                a, b = _unrank_pairs(pos)
                us.append(members[r][a])
                vs.append(members[r][b])
            else:
                ns = members[s].size
                pos = _bernoulli_positions(members[r].size * ns, p, rng)
                us.append(members[r][pos // ns])
                vs.append(members[s][pos % ns])
    if not us:
        return np.zeros((0, 2), dtype=np.int64)
    return _canonical_edges(np.concatenate(us), np.concatenate(vs))


def _sample_distinct(total, count, excluded, rng):
    """Uniform random ``count``-subset of ``range(total)`` minus sorted ``excluded``."""
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    if count > (total - excluded.size) // 4:
        pool = np.setdiff1d(np.arange(total, dtype=np.int64), excluded, assume_unique=True)
        return rng.choice(pool, size=count, replace=False)
    picked = np.zeros(0, dtype=np.int64)
    while picked.size < count:
        need = count - picked.size
        draw = rng.integers(0, total, size=int(need * 1.2) + 64)
        draw = draw[~np.isin(draw, excluded)]
        allc = np.concatenate([picked, draw])
        # keep first occurrences in draw order: sequential sampling without replacement
        _, first = np.unique(allc, return_index=True)
        picked = allc[np.sort(first)]
    return picked[:count]


def apply_noise(edges, n, noise, rng):
    """Replace a binary edge set by observed probabilities drawn from ``noise``."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    m = edges.shape[0]
    if noise.noiseless:
        return validate((edges[:, 0], edges[:, 1], np.ones(m)), n)
    q_edge = rng.beta(noise.a1, noise.b1, size=m)
    q_edge = np.maximum(q_edge, np.finfo(np.float64).tiny)

    total = n * (n - 1) // 2
    edge_rank = np.sort(_rank_pairs(edges[:, 0], edges[:, 1]))
    count = int(rng.binomial(total - m, noise.c)) if noise.c > 0 else 0
    chosen = np.sort(_sample_distinct(total, count, edge_rank, rng))
    q_non = rng.beta(noise.a0, noise.b0, size=chosen.size)
    q_non = np.minimum(q_non, NON_EDGE_CEILING)
    keep = q_non > 0
    ni, nj = _unrank_pairs(chosen[keep])

    i = np.concatenate([edges[:, 0], ni])
    j = np.concatenate([edges[:, 1], nj])
    q = np.concatenate([q_edge, q_non[keep]])
    return validate((i, j, q), n)


def generate_benchmark(n, params, request, seed):
    """Partition, SBM network and noise in one reproducible draw.

    The noise is solved against the realized density of the sampled
    network, so the consistency ratio holds for this instance exactly.
    """
    rng = np.random.default_rng(seed)
    partition = sample_partition(n, params.gamma, rng)
    edges = sample_network(partition, params.omega, rng)
    total = n * (n - 1) // 2
    rho = edges.shape[0] / total
    if request.noiseless:
        noise = NoiseSpec.exact(rho)
    else:
        noise = solve_noise(request.b1, rho, a1=request.a1, c=request.c)
    network = apply_noise(edges, n, noise, rng)
    return PlantedInstance(network, partition, edges, params, noise, seed)
