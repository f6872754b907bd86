"""Brute-force posterior over all ``k**n`` group assignments.

Every pair enters the likelihood, including pairs with ``Q_ij = 0`` (factor
``(1 - omega)/(1 - rho)``), so this is the reference the sparse and
leading-order approximations are checked against.  Assignments are ordered
lexicographically with node 0 as the most significant digit.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._model import bracket, check_mode, check_rho, edge_prob, resolve_degrees
from .errors import InstanceTooLarge

MAX_ASSIGNMENTS = 2 ** 24
BLOCK = 2 ** 15


@dataclass
class PosteriorTable:
    n: int
    k: int
    log_joint: np.ndarray  # log P(Q, g) for every assignment, lexicographic order
    log_marginal_likelihood: float
    node: np.ndarray  # (n, k)
    pair: np.ndarray  # (n, n, k, k); pair[i, j, r, s] = P(g_i = r, g_j = s), zero on the diagonal

    @property
    def posterior(self):
        return np.exp(self.log_joint - self.log_marginal_likelihood)

    def index_of(self, g):
        idx = 0
        for label in g:
            idx = idx * self.k + int(label)
        return idx

    def probability(self, g):
        return float(np.exp(self.log_joint[self.index_of(g)] - self.log_marginal_likelihood))


def _guard(n, k):
    if k ** n > MAX_ASSIGNMENTS:
        raise InstanceTooLarge(f"{k}**{n} assignments exceed the limit of {MAX_ASSIGNMENTS}")


def _log_pair_table(net, params, mode, degrees, zero_pairs):
    """``L[i, j, r, s]``: log of pair (i, j)'s factor when ``g_i = r, g_j = s``."""
    if zero_pairs not in ("exact", "omit"):
        raise ValueError("zero_pairs must be 'exact' or 'omit'")
    rho = check_rho(net.density())
    d = resolve_degrees(net, mode, degrees)
    Q = net.to_dense()
    dd = np.outer(d, d)
    p = edge_prob(np.asarray(params.omega)[None, None], dd[:, :, None, None], mode == "dc")
    with np.errstate(divide="ignore"):
        L = np.log(bracket(Q[:, :, None, None], p, rho))
    if zero_pairs == "omit":
        L[Q == 0] = 0.0
    idx = np.arange(net.n)
    L[idx, idx] = 0.0
    return L


def _assignments(start, stop, n, k):
    codes = np.arange(start, stop, dtype=np.int64)
    G = np.empty((codes.size, n), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        G[:, pos] = codes % k
        codes //= k
    return G


def _log_joint_block(G, log_gamma, L, pairs):
    out = log_gamma[G].sum(axis=1)
    for i, j in pairs:
        out += L[i, j][G[:, i], G[:, j]]
    return out


def joint_likelihood(net, g, params, mode="plain", degrees=None, zero_pairs="exact"):
    """``log P(Q, g | gamma, omega)`` with the data-only prefactor dropped."""
    check_mode(mode)
    g = np.asarray(g, dtype=np.int64)
    k = params.k
    _guard(net.n, k)
    L = _log_pair_table(net, params, mode, degrees, zero_pairs)
    with np.errstate(divide="ignore"):
        log_gamma = np.log(np.asarray(params.gamma))
    iu, ju = np.triu_indices(net.n, 1)
    return float(log_gamma[g].sum() + L[iu, ju, g[iu], g[ju]].sum())


def enumerate_posterior(net, k, params, mode="plain", degrees=None, zero_pairs="exact"):
    check_mode(mode)
    if params.k != k:
        raise ValueError(f"params have {params.k} groups, expected {k}")
    n = net.n
    _guard(n, k)
    L = _log_pair_table(net, params, mode, degrees, zero_pairs)
    with np.errstate(divide="ignore"):
        log_gamma = np.log(np.asarray(params.gamma))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    total = k ** n

    log_joint = np.empty(total)
    for start in range(0, total, BLOCK):
        stop = min(start + BLOCK, total)
        log_joint[start:stop] = _log_joint_block(_assignments(start, stop, n, k),
                                                 log_gamma, L, pairs)
    lml = float(logsumexp(log_joint))
    post = np.exp(log_joint - lml)

    node = np.zeros((n, k))
    pair = np.zeros((n, n, k, k))
    for start in range(0, total, BLOCK):
        stop = min(start + BLOCK, total)
        G = _assignments(start, stop, n, k)
        w = post[start:stop]
        for i in range(n):
            node[i] += np.bincount(G[:, i], weights=w, minlength=k)
        for i, j in pairs:
            pair[i, j] += np.bincount(G[:, i] * k + G[:, j], weights=w,
                                      minlength=k * k).reshape(k, k)
    for i, j in pairs:
        pair[j, i] = pair[i, j].T
    return PosteriorTable(n, k, log_joint, lml, node, pair)
