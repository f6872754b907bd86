"""Expectation-maximization fit of the uncertain-network block model.

Each iteration runs belief propagation at the current parameters (E-step),
then sets ``gamma`` to the mean node marginal and ``omega`` by alternating
the edge-posterior update ``t`` with the ratio update for ``omega`` until
they agree (M-step).  Several independently seeded restarts are run and the
one with the highest Bethe bound is kept.
"""

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from ._model import DC_CEILING, check_mode, check_rho, edge_prob, resolve_degrees
from .bp import Marginals, bp_run, messages_from_partition, random_messages
from .errors import AllRestartsDegenerate, DegenerateRho
from .network import Partition
from .oracle import enumerate_posterior
from .synth import BlockParams

log = logging.getLogger(__name__)

THREADS_ENV = "UNCERTNET_THREADS"
# Starting contrast between diagonal and off-diagonal omega, expressed as
# the start's own signal-to-noise ratio.  EM started below the detectability
# threshold (ratio < 1) stays at the structureless point even on detectable
# data, so the first attempt starts above it.  On undetectable data such a
# start throws BP into its non-convergent glassy phase; when the first E-step
# fails to converge the restart falls back to a start below the threshold.
INIT_SNR = 1.5
FALLBACK_SNR = 0.5
MAX_CONTRAST = 0.5


@dataclass(frozen=True)
class EMOptions:
    restarts: int = 10
    seed: object = None
    tol_em: float = 1e-6
    tol_bp: float = 1e-6
    tol_inner: float = 1e-8
    max_iters: int = 200
    max_inner: int = 200
    max_sweeps: int = 300
    damping: float = 0.0
    jitter: float = 0.5
    init: object = None  # None, a BlockParams, or a Partition to seed messages
    e_step: str = "bp"  # "bp" or "exact"
    threads: int = None

    def __post_init__(self):
        for name in ("tol_em", "tol_bp", "tol_inner"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.restarts < 1 or self.max_iters < 1:
            raise ValueError("restarts and max_iters must be at least 1")
        if self.e_step not in ("bp", "exact"):
            raise ValueError("e_step must be 'bp' or 'exact'")


@dataclass
class FitResult:
    params: BlockParams
    marginals: Marginals
    t: np.ndarray  # (pairs, k, k) edge posteriors given the groups
    bound_trace: list
    hard_partition: Partition
    restarts_used: int
    converged: bool
    seed: object
    mode: str = "plain"
    iterations: int = 0
    degenerate: bool = False
    restart_bounds: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def bound(self):
        return self.bound_trace[-1] if self.bound_trace else float("nan")


def compute_t(q, omega_rs, rho, dd=1.0, clamp=False):
    """Posterior probability of an edge given the pair's groups.

    ``(q p / rho) / (q p / rho + (1 - q)(1 - p)/(1 - rho))`` with
    ``p = dd * omega_rs``; ``dd`` is ``d_i d_j`` in the degree-corrected model.
    """
    if not 0.0 < rho < 1.0:
        raise DegenerateRho(f"density must lie strictly inside (0, 1), got {rho!r}")
    q = np.asarray(q, dtype=np.float64)
    p = edge_prob(omega_rs, dd, clamp)
    num = q * p / rho
    den = num + (1.0 - q) * (1.0 - p) / (1.0 - rho)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return t if t.ndim else float(t)


def edge_posterior_table(net, omega, rho, degrees, mode="plain"):
    """``t[p, r, s]`` for every stored pair."""
    d = np.asarray(degrees, dtype=np.float64)
    dd = (d[net.i] * d[net.j])[:, None, None]
    return compute_t(net.q[:, None, None], np.asarray(omega)[None], rho, dd, mode == "dc")


def update_gamma(node):
    node = np.asarray(node, dtype=np.float64)
    gamma = node.mean(axis=0)
    return gamma / gamma.sum()


def update_omega(pair, node, net, rho, degrees=None, mode="plain", omega_init=None,
                 tol=1e-8, max_iter=200, denominator=None):
    """Fixed point of the ``t`` / ``omega`` alternation.

    The numerator runs over stored pairs only (``t = 0`` when ``Q = 0``),
    counting both orientations.  The denominator is the factorized
    ``sum_i d_i q_r^i * sum_j d_j q_s^j`` unless an exact ``denominator``
    (``sum_{i != j} q_rs^{ij}``) is supplied.  Returns ``(omega, converged)``.
    """
    mode = check_mode(mode)
    d = resolve_degrees(net, mode, degrees)
    node = np.asarray(node, dtype=np.float64)
    k = node.shape[1]
    if denominator is None:
        totals = d @ node
        denominator = np.outer(totals, totals)
    denominator = np.asarray(denominator, dtype=np.float64)
    omega = np.full((k, k), rho) if omega_init is None else np.array(omega_init, dtype=np.float64)
    dd = (d[net.i] * d[net.j])[:, None, None]
    q = net.q[:, None, None]
    pair = np.asarray(pair, dtype=np.float64)
    for _ in range(max_iter):
        t = compute_t(q, omega[None], rho, dd, mode == "dc")
        weighted = np.einsum("prs,prs->rs", pair, t)
        num = weighted + weighted.T
        with np.errstate(invalid="ignore", divide="ignore"):
            new = np.where(denominator > 0, num / np.where(denominator > 0, denominator, 1.0), 0.0)
        new = 0.5 * (new + new.T)
        change = float(np.max(np.abs(new - omega)))
        omega = new
        if change < tol:
            return omega, True
    return _omega_by_bracketing(pair, q[:, 0, 0], dd[:, 0, 0], rho, denominator, mode, omega, tol)


def _omega_by_bracketing(pair, q, dd, rho, denominator, mode, omega, tol):
    """Solve each entry's one-dimensional fixed point with a bracketing root finder.

    ``t`` for a pair depends on ``omega_rs`` alone, so ``omega_rs = F(omega_rs)``
    decouples by entry.  ``F(x)/x`` is decreasing, so the positive root is unique
    when it exists.  Used when plain iteration crawls because ``F'`` is near 1.
    """
    k = omega.shape[0]
    out = omega.copy()
    ok = True
    for r in range(k):
        for s in range(r, k):
            w = pair[:, r, s] + pair[:, s, r]
            if denominator[r, s] <= 0 or not np.any(w > 0):
                out[r, s] = out[s, r] = 0.0
                continue
            if mode == "dc":
                hi = DC_CEILING / float(np.min(dd[w > 0]))
            else:
                hi = 1.0

            def excess(x, w=w, r=r, s=s):
                return float(np.dot(w, compute_t(q, x, rho, dd, mode == "dc"))) / denominator[r, s] - x

            top = excess(hi)
            if top >= 0:
                # F is flat beyond hi (t saturates), so the root is F(hi)
                root = hi + top
            elif excess(tol * 1e-3) <= 0:
                root = 0.0
            else:
                root, info = brentq(excess, tol * 1e-3, hi, xtol=tol * 1e-3, full_output=True,
                                    disp=False)
                ok &= info.converged
            out[r, s] = out[s, r] = root
    return out, ok


def _omega_scale(net, mode, d):
    # DC omega multiplies d_i d_j; compare changes in edge-probability units
    if mode == "dc":
        return float(np.mean(d)) ** 2
    return 1.0


def _coupling_moment(net):
    """Mean over nodes of ``sum_j ((Q_ij - rho) / (1 - rho))^2``.

    To first order a start ``omega = rho (1 +- delta)`` couples the messages
    across pair ``(i, j)`` with strength ``delta (Q_ij - rho) / (1 - rho)``, so
    ``delta^2`` times this moment is the start's own signal-to-noise ratio.
    """
    rho = net.density()
    return 2.0 / net.n * float(np.sum(((net.q - rho) / (1.0 - rho)) ** 2))


def _initial_params(net, k, mode, d, rng, assortative, snr=None):
    """Uniform ``gamma``; ``omega`` a small perturbation of the mean density.

    Even restarts tilt the diagonal up (assortative start), odd restarts use
    a random symmetric perturbation of the same size.  The size is set so
    the start's signal-to-noise ratio is ``snr`` (capped at MAX_CONTRAST).
    """
    rho = net.density()
    n = net.n
    snr = INIT_SNR if snr is None else snr
    gamma = np.full(k, 1.0 / k)
    delta = min(MAX_CONTRAST, float(np.sqrt(snr / max(_coupling_moment(net), 1e-12))))
    if assortative:
        shape = np.full((k, k), 1.0 - delta)
        shape[np.diag_indices(k)] = 1.0 + (k - 1) * delta
        eps = rng.uniform(-0.1, 0.1, size=(k, k)) * delta
    else:
        shape = np.ones((k, k))
        eps = rng.uniform(-1.0, 1.0, size=(k, k)) * delta
    eps = 0.5 * (eps + eps.T)
    base = rho
    if mode == "dc":
        base = rho * n ** 2 / float(np.sum(d)) ** 2
    omega = base * shape * (1.0 + eps)
    if mode == "plain":
        omega = np.clip(omega, 0.0, 1.0)
    return BlockParams(gamma, omega, check_range=(mode == "plain"))


def _is_degenerate(gamma, n):
    return bool(np.any(gamma < 1.0 / n ** 2))


class _ExactEStep:
    def __init__(self, net, k, mode, d):
        self.net, self.k, self.mode, self.d = net, k, mode, d

    def __call__(self, params):
        post = enumerate_posterior(self.net, self.k, params, self.mode, degrees=self.d)
        pair = post.pair[self.net.i, self.net.j]
        denom = post.pair.sum(axis=(0, 1))
        return Marginals(post.node, pair), denom, post.log_marginal_likelihood


def _run_restart(net, k, mode, d, opts, rng, assortative):
    n = net.n
    rho = net.density()
    params = _initial_params(net, k, mode, d, rng, assortative)
    init = opts.init
    if isinstance(init, BlockParams):
        params = init
    if isinstance(init, Partition):
        messages = messages_from_partition(net, init, strength=1.0 - opts.jitter,
                                           gamma=params.gamma)
    else:
        messages = random_messages(net, params.gamma, rng, opts.jitter)
    start_messages = messages
    order = rng.permutation(n)
    exact = _ExactEStep(net, k, mode, d) if opts.e_step == "exact" else None
    scale = _omega_scale(net, mode, d)

    trace = []
    notes = []
    converged = False

    def e_step(params, messages):
        if exact is not None:
            marg, denom, bound = exact(params)
            return marg, denom, bound, messages, True
        res = bp_run(net, params, d, mode, messages, tol=opts.tol_bp,
                     max_sweeps=opts.max_sweeps, damping=opts.damping, order=order)
        log.debug("BP: %d sweeps, max delta %.2e", res.sweeps, res.max_delta)
        return res.marginals, None, res.bethe, res.messages, res.converged

    pending = None
    if exact is None and not isinstance(init, BlockParams):
        pending = e_step(params, messages)
        if not pending[4]:
            log.info("BP did not converge from the strong start; restarting from a weak one")
            params = _initial_params(net, k, mode, d, rng, assortative, FALLBACK_SNR)
            messages, pending = start_messages, None

    it = 0
    bp_ok = True
    for it in range(1, opts.max_iters + 1):
        if pending is not None:
            marg, denom, bound, messages, ok = pending
            pending = None
        else:
            marg, denom, bound, messages, ok = e_step(params, messages)
        bp_ok &= ok
        trace.append(float(bound))
        gamma = update_gamma(marg.node)
        omega, inner_ok = update_omega(marg.pair, marg.node, net, rho, d, mode,
                                       params.omega, opts.tol_inner, opts.max_inner, denom)
        if not inner_ok:
            notes.append(f"iteration {it}: omega inner loop hit its cap")
        if mode == "plain":
            omega = np.clip(omega, 0.0, 1.0)
        new = BlockParams(gamma, omega, check_range=(mode == "plain"))
        change = max(float(np.max(np.abs(new.gamma - params.gamma))),
                     float(np.max(np.abs(new.omega - params.omega))) * scale)
        params = new
        log.debug("EM iteration %d: bound %.6f, parameter change %.2e", it, bound, change)
        if change < opts.tol_em:
            converged = True
            break
    marg, denom, bound, messages, ok = e_step(params, messages)
    bp_ok &= ok
    trace.append(float(bound))
    if not bp_ok:
        notes.append("at least one BP E-step stopped at the sweep cap")
    t = edge_posterior_table(net, params.omega, rho, d, mode)
    hard = Partition(np.argmax(marg.node, axis=1), k)
    return FitResult(params, marg, t, trace, hard, 1, converged, None, mode, it,
                     _is_degenerate(params.gamma, n), [], notes)


def _thread_count(opts):
    if opts.threads is not None:
        return max(1, int(opts.threads))
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def em_fit(net, k, mode="plain", options=None, **kwargs):
    """Fit ``k`` groups to ``net`` by EM with BP (or exact) E-steps.

    Keyword arguments override fields of :class:`EMOptions`.
    """
    opts = replace(options or EMOptions(), **kwargs) if kwargs else (options or EMOptions())
    mode = check_mode(mode)
    if k < 1:
        raise ValueError("k must be at least 1")
    if net.num_pairs == 0:
        raise DegenerateRho("network has no nonzero pairs")
    check_rho(net.density())
    if opts.e_step == "exact" and mode != "plain":
        raise ValueError("the exact E-step supports the plain model only")
    d = resolve_degrees(net, mode)

    seq = np.random.SeedSequence(opts.seed)
    children = seq.spawn(opts.restarts)
    jobs = [(np.random.default_rng(c), r % 2 == 0) for r, c in enumerate(children)]

    def run(job):
        return _run_restart(net, k, mode, d, opts, *job)

    threads = _thread_count(opts)
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    bounds = [res.bound for res in results]
    usable = [r for r in range(len(results)) if not results[r].degenerate]
    if not usable:
        raise AllRestartsDegenerate(
            f"all {len(results)} restarts left a group with gamma < 1/n^2"
        )
    best = max(usable, key=lambda r: (bounds[r], -r))
    res = results[best]
    res.restarts_used = len(results)
    res.restart_bounds = bounds
    res.seed = seq.entropy
    for msg in res.warnings:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    log.debug("em_fit: best restart %d of %d, bound %.6f", best, len(results), bounds[best])
    return res


def posterior_at(net, params, mode="plain", *, seed=None, restarts=1, tol_bp=1e-6,
                 max_sweeps=300, jitter=0.5, init=None):
    """Single E-step at fixed parameters, as if the true parameters were known.

    Restarts only vary the initial messages; the one with the best Bethe
    bound is returned as a :class:`FitResult` without parameter updates.
    """
    mode = check_mode(mode)
    d = resolve_degrees(net, mode)
    rho = check_rho(net.density())
    seq = np.random.SeedSequence(seed)
    best = None
    for child in seq.spawn(restarts):
        rng = np.random.default_rng(child)
        if isinstance(init, Partition):
            msgs = messages_from_partition(net, init, 1.0 - jitter, params.gamma)
        else:
            msgs = random_messages(net, params.gamma, rng, jitter)
        res = bp_run(net, params, d, mode, msgs, tol=tol_bp, max_sweeps=max_sweeps,
                     order=rng.permutation(net.n))
        if best is None or res.bethe > best.bethe:
            best = res
    t = edge_posterior_table(net, params.omega, rho, d, mode)
    hard = Partition(np.argmax(best.marginals.node, axis=1), params.k)
    return FitResult(params, best.marginals, t, [best.bethe], hard, restarts, best.converged,
                     seq.entropy, mode)

