"""Belief propagation for the uncertain-network block model.

Messages live on the directed half-edges of the nonzero-Q graph, in the CSR
order of :class:`~uncertnet.network.UncertainNetwork`: row ``i``, entry ``e``
holds ``eta^{i -> indices[e]}``.  Pairs with ``Q_ij = 0`` enter only through
the leading-order external field ``exp(-d_i sum_{k,s} d_k q_s^k omega_rs)``.

Sweeps are asynchronous: nodes are visited in a fixed permutation and all of
a node's outgoing messages are refreshed together from its current incoming
messages, after which its marginal and the field totals are updated in place.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._model import DC_CEILING, bracket, check_mode, check_rho, edge_prob, resolve_degrees
from .errors import NotConverged, NumericalUnderflow


@dataclass
class MessageSet:
    """``values[e]`` is the length-k message on half-edge ``e``."""

    values: np.ndarray

    @property
    def k(self):
        return self.values.shape[1]

    def copy(self):
        return MessageSet(self.values.copy())

    def simplex_error(self):
        if self.values.size == 0:
            return 0.0
        return float(np.max(np.abs(self.values.sum(axis=1) - 1.0)))


@dataclass
class Marginals:
    """One-node marginals ``node[i, r]`` and stored-pair tables ``pair[p, r, s]``.

    ``pair[p]`` belongs to the stored pair ``(net.i[p], net.j[p])`` with the
    first index for the lower node; the table for ``(j, i)`` is its transpose.
    """

    node: np.ndarray
    pair: np.ndarray

    def pair_table(self, net, i, j):
        p = net.pair_index(i, j)
        if p < 0:
            raise KeyError(f"pair ({i}, {j}) is not stored")
        return self.pair[p] if i < j else self.pair[p].T


@dataclass
class BPResult:
    messages: MessageSet
    marginals: Marginals
    converged: bool
    sweeps: int
    max_delta: float
    bethe: float = float("nan")


# --------------------------------------------------------------------------
# kernels


@njit(cache=True, nogil=True)
def _half_edge_brackets(rows, indices, qvals, d, omega, rho, clamp):
    """``B[e, r, s]``: factor of half-edge ``e = (i -> j)`` when ``g_i = r, g_j = s``."""
    k = omega.shape[0]
    out = np.empty((indices.size, k, k))
    for e in range(indices.size):
        q = qvals[e]
        dd = d[rows[e]] * d[indices[e]]
        for r in range(k):
            for s in range(k):
                p = dd * omega[r, s]
                if clamp and p > DC_CEILING:
                    p = DC_CEILING
                out[e, r, s] = q * p / rho + (1.0 - q) * (1.0 - p) / (1.0 - rho)
    return out


@njit(cache=True, nogil=True)
def _incoming_logs(lo, hi, reverse, brackets, msgs, lf):
    k = msgs.shape[1]
    for e in range(lo, hi):
        inc = reverse[e]
        for r in range(k):
            f = 0.0
            for s in range(k):
                f += msgs[inc, s] * brackets[e, r, s]
            lf[e - lo, r] = np.log(f) if f > 0.0 else -np.inf


@njit(cache=True, nogil=True)
def _field_base(i, d, log_gamma, omega, totals, use_field, out):
    k = log_gamma.size
    for r in range(k):
        h = 0.0
        if use_field:
            for s in range(k):
                h += omega[r, s] * totals[s]
            h *= d[i]
        out[r] = log_gamma[r] - h


@njit(cache=True, nogil=True)
def _normalize_log(logv, out):
    """Write softmax(logv) into out; return False when every entry is -inf."""
    k = logv.size
    mx = -np.inf
    for r in range(k):
        if logv[r] > mx:
            mx = logv[r]
    if mx == -np.inf or np.isnan(mx):
        return False
    z = 0.0
    for r in range(k):
        out[r] = np.exp(logv[r] - mx)
        z += out[r]
    for r in range(k):
        out[r] /= z
    return True


@njit(cache=True, nogil=True)
def _sweep(indptr, reverse, brackets, d, order, log_gamma, omega,
           msgs, node, totals, use_field, damping, lf, pre, suf):
    k = log_gamma.size
    max_delta = 0.0
    cand = np.empty(k)
    new = np.empty(k)
    for idx in range(order.size):
        i = order[idx]
        lo = indptr[i]
        hi = indptr[i + 1]
        deg = hi - lo
        _field_base(i, d, log_gamma, omega, totals, use_field, pre[0])
        _incoming_logs(lo, hi, reverse, brackets, msgs, lf)
        for t in range(deg):
            for r in range(k):
                pre[t + 1, r] = pre[t, r] + lf[t, r]
        for r in range(k):
            suf[deg, r] = 0.0
        for t in range(deg - 1, -1, -1):
            for r in range(k):
                suf[t, r] = suf[t + 1, r] + lf[t, r]
        for t in range(deg):
            e = lo + t
            for r in range(k):
                cand[r] = pre[t, r] + suf[t + 1, r]
            if not _normalize_log(cand, new):
                return max_delta, i
            for r in range(k):
                v = (1.0 - damping) * new[r] + damping * msgs[e, r]
                delta = abs(v - msgs[e, r])
                if delta > max_delta:
                    max_delta = delta
                msgs[e, r] = v
        if not _normalize_log(pre[deg], new):
            return max_delta, i
        for r in range(k):
            totals[r] += d[i] * (new[r] - node[i, r])
            node[i, r] = new[r]
    return max_delta, -1


@njit(cache=True, nogil=True)
def _node_pass(indptr, reverse, brackets, d, log_gamma, omega,
               msgs, node, totals, use_field, lf, acc):
    """Recompute every node marginal from the messages with the field held fixed."""
    n = indptr.size - 1
    k = log_gamma.size
    new = np.empty((n, k))
    for i in range(n):
        lo = indptr[i]
        hi = indptr[i + 1]
        _field_base(i, d, log_gamma, omega, totals, use_field, acc)
        _incoming_logs(lo, hi, reverse, brackets, msgs, lf)
        for t in range(hi - lo):
            for r in range(k):
                acc[r] += lf[t, r]
        if not _normalize_log(acc, new[i]):
            return i
    for i in range(n):
        for r in range(k):
            node[i, r] = new[i, r]
    for r in range(k):
        totals[r] = 0.0
    for i in range(n):
        for r in range(k):
            totals[r] += d[i] * node[i, r]
    return -1


@njit(cache=True, nogil=True)
def _pair_pass(fwd, reverse, brackets, msgs, out):
    k = msgs.shape[1]
    for p in range(fwd.size):
        e = fwd[p]
        b = reverse[e]
        z = 0.0
        for r in range(k):
            for s in range(k):
                v = msgs[e, r] * msgs[b, s] * brackets[e, r, s]
                out[p, r, s] = v
                z += v
        if not z > 0.0:
            return p
        for r in range(k):
            for s in range(k):
                out[p, r, s] /= z
    return -1


# --------------------------------------------------------------------------
# engine state


class _Engine:
    """Arrays and workspaces for one (network, parameters, mode) combination."""

    def __init__(self, net, params, degrees, mode, field=True):
        check_mode(mode)
        self.net = net
        self.rho = check_rho(net.density())
        self.k = params.k
        self.d = resolve_degrees(net, mode, degrees)
        self.clamp = mode == "dc"
        self.field = bool(field)
        with np.errstate(divide="ignore"):
            self.log_gamma = np.log(np.asarray(params.gamma, dtype=np.float64))
        self.omega = np.ascontiguousarray(params.omega, dtype=np.float64)
        maxdeg = int(net.degree_counts().max()) if net.n else 0
        self.lf = np.empty((max(maxdeg, 1), self.k))
        self.pre = np.empty((maxdeg + 1, self.k))
        self.suf = np.empty((maxdeg + 1, self.k))
        self.acc = np.empty(self.k)
        self.fwd = np.flatnonzero(net.rows < net.indices)
        self.brackets = _half_edge_brackets(net.rows, net.indices, net.values, self.d,
                                            self.omega, self.rho, self.clamp)

    def node_pass(self, msgs, node, totals):
        net = self.net
        bad = _node_pass(net.indptr, net.reverse, self.brackets, self.d,
                         self.log_gamma, self.omega, msgs, node, totals,
                         self.field, self.lf, self.acc)
        if bad >= 0:
            raise NumericalUnderflow(f"all group weights vanish at node {bad}")

    def sweep(self, msgs, node, totals, order, damping):
        net = self.net
        delta, bad = _sweep(net.indptr, net.reverse, self.brackets, self.d, order,
                            self.log_gamma, self.omega, msgs, node, totals,
                            self.field, float(damping), self.lf, self.pre, self.suf)
        if bad >= 0:
            raise NumericalUnderflow(
                f"message normalizer vanished at node {bad}; parameters are degenerate"
            )
        return delta

    def pairs(self, msgs):
        net = self.net
        out = np.empty((net.num_pairs, self.k, self.k))
        bad = _pair_pass(self.fwd, net.reverse, self.brackets, msgs, out)
        if bad >= 0:
            raise NumericalUnderflow(f"pair normalizer vanished at stored pair {bad}")
        return out

    def totals(self, node):
        return self.d @ node

    def bethe(self, node, pair):
        """Bethe estimate of the log marginal likelihood at these marginals."""
        net = self.net
        tiny = 1e-300
        gamma = np.exp(self.log_gamma)
        dd = self.d[net.i] * self.d[net.j]
        p = edge_prob(self.omega[None], dd[:, None, None], self.clamp)
        logB = np.log(np.maximum(bracket(net.q[:, None, None], p, self.rho), tiny))
        energy = float(np.sum(node * np.log(np.maximum(gamma, tiny))))
        energy += float(np.sum(pair * logB))
        if self.field:
            tot = self.totals(node)
            energy -= 0.5 * float(tot @ self.omega @ tot)
            zero_pairs = net.n * (net.n - 1) / 2 - net.num_pairs
            energy -= zero_pairs * np.log1p(-self.rho)
        deg = net.degree_counts()
        with np.errstate(divide="ignore", invalid="ignore"):
            node_ent = np.where(node > 0, node * np.log(node), 0.0).sum(axis=1)
            pair_ent = np.where(pair > 0, pair * np.log(pair), 0.0).sum()
        entropy = -float(pair_ent) + float(np.sum((deg - 1) * node_ent))
        return energy + entropy


# --------------------------------------------------------------------------
# public API


def uniform_messages(net, gamma):
    gamma = np.asarray(gamma, dtype=np.float64)
    return MessageSet(np.tile(gamma, (net.num_half_edges, 1)))


def random_messages(net, gamma, rng, jitter=0.5):
    """``(1 - jitter) * gamma + jitter * Dirichlet(1, ..., 1)`` on every half-edge."""
    gamma = np.asarray(gamma, dtype=np.float64)
    noise = rng.dirichlet(np.ones(gamma.size), size=net.num_half_edges)
    return MessageSet((1.0 - jitter) * gamma + jitter * noise)


def messages_from_partition(net, partition, strength=1.0, gamma=None):
    """Messages ``eta^{i->j}`` pointing at ``partition.g[i]``.

    ``strength`` 1 gives one-hot messages; smaller values mix in ``gamma``.
    """
    k = partition.k
    onehot = np.eye(k)[partition.g[net.rows]]
    base = np.full(k, 1.0 / k) if gamma is None else np.asarray(gamma, dtype=np.float64)
    return MessageSet(strength * onehot + (1.0 - strength) * base)


def _initial_node(net, msgs, gamma):
    """Average of each node's outgoing messages (gamma for isolated nodes)."""
    k = msgs.shape[1]
    node = np.empty((net.n, k))
    node[:] = gamma
    if net.num_half_edges:
        sums = np.zeros((net.n, k))
        np.add.at(sums, net.rows, msgs)
        deg = net.degree_counts()
        has = deg > 0
        node[has] = sums[has] / deg[has, None]
    return node


def bp_sweep(net, params, degrees=None, mode="plain", messages=None, *,
             node_marginals=None, damping=0.0, order=None, field=True):
    """One asynchronous sweep.  Returns ``(new MessageSet, max absolute change)``."""
    eng = _Engine(net, params, degrees, mode, field)
    msgs = (messages or uniform_messages(net, params.gamma)).values.copy()
    if node_marginals is None:
        node = _initial_node(net, msgs, params.gamma)
        totals = eng.totals(node)
        eng.node_pass(msgs, node, totals)
    else:
        node = np.array(node_marginals, dtype=np.float64)
        totals = eng.totals(node)
    if order is None:
        order = np.arange(net.n)
    delta = eng.sweep(msgs, node, totals, np.asarray(order, dtype=np.int64), damping)
    return MessageSet(msgs), delta


def bp_run(net, params, degrees=None, mode="plain", init=None, tol=1e-6, max_sweeps=500,
           *, damping=0.0, order=None, seed=0, field=True, strict=False):
    """Iterate sweeps until the largest message change drops below ``tol``.

    ``init`` is a :class:`MessageSet` (default: every message equal to gamma).
    The node visiting order is ``order`` if given, else a permutation drawn
    from ``seed``.  With ``strict=True`` a run that hits ``max_sweeps`` raises
    :class:`NotConverged` carrying the result; otherwise ``converged`` is
    False on the returned result.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    eng = _Engine(net, params, degrees, mode, field)
    if init is None:
        init = uniform_messages(net, params.gamma)
    msgs = np.array(init.values, dtype=np.float64, order="C")
    if msgs.shape != (net.num_half_edges, params.k):
        raise ValueError(f"init messages must have shape {(net.num_half_edges, params.k)}")
    node = _initial_node(net, msgs, params.gamma)
    totals = eng.totals(node)
    eng.node_pass(msgs, node, totals)
    if order is None:
        order = np.random.default_rng(seed).permutation(net.n)
    order = np.asarray(order, dtype=np.int64)

    sweeps = 0
    delta = np.inf
    converged = not np.isfinite(tol)
    if not converged:
        while sweeps < max_sweeps:
            delta = eng.sweep(msgs, node, totals, order, damping)
            sweeps += 1
            if delta < tol:
                converged = True
                break
        eng.node_pass(msgs, node, totals)
    pair = eng.pairs(msgs)
    result = BPResult(MessageSet(msgs), Marginals(node, pair), converged, sweeps,
                      float(delta), eng.bethe(node, pair))
    if strict and not converged:
        raise NotConverged(f"BP did not reach tol={tol} in {max_sweeps} sweeps", result)
    return result


def pair_marginals(messages, params, net, mode="plain", degrees=None):
    """Two-node marginals of every stored pair from (converged) messages."""
    eng = _Engine(net, params, degrees, mode)
    return eng.pairs(np.ascontiguousarray(messages.values, dtype=np.float64))


def node_marginals(messages, params, net, mode="plain", degrees=None, field=True):
    """Node marginals from messages.

    The field is evaluated at each node's average outgoing message, as at the
    start of :func:`bp_run`.
    """
    eng = _Engine(net, params, degrees, mode, field)
    msgs = np.ascontiguousarray(messages.values, dtype=np.float64)
    node = _initial_node(net, msgs, params.gamma)
    totals = eng.totals(node)
    eng.node_pass(msgs, node, totals)
    return node


def bethe_bound(net, params, marginals, degrees=None, mode="plain", field=True):
    """Bethe approximation to the log marginal likelihood at the given marginals."""
    eng = _Engine(net, params, degrees, mode, field)
    return eng.bethe(marginals.node, marginals.pair)
