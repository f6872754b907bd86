"""Edge recovery, ROC scoring, partition accuracy and the thresholding baseline."""

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .em import EMOptions, em_fit
from .errors import (
    AllRestartsDegenerate,
    DegenerateRho,
    EmptyTruth,
    FullTruth,
    MismatchedFit,
    SizeMismatch,
    TooManyGroups,
)
from .network import Partition, validate

log = logging.getLogger(__name__)

DEFAULT_TAUS = tuple(round(0.05 * s, 2) for s in range(1, 20))
MAX_PERMUTATION_K = 8


@dataclass(frozen=True)
class EdgeScoreList:
    """One score per stored pair; pairs not listed score 0."""

    i: np.ndarray
    j: np.ndarray
    score: np.ndarray
    method: str = "posterior"

    def __len__(self):
        return self.score.size


@dataclass(frozen=True)
class ROCCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def edge_posterior(t, pair, net, method="posterior"):
    """``P(A_ij = 1) = sum_rs t_rs^ij q_rs^ij`` for every stored pair."""
    t = np.asarray(t)
    pair = np.asarray(pair)
    if t.shape != pair.shape or t.shape[0] != net.num_pairs:
        raise MismatchedFit(f"edge table {t.shape} and pair marginals {pair.shape} "
                            f"do not match a network with {net.num_pairs} pairs")
    score = np.einsum("prs,prs->p", t, pair)
    return EdgeScoreList(net.i, net.j, np.clip(score, 0.0, 1.0), method)


def fit_scores(fit, net):
    return edge_posterior(fit.t, fit.marginals.pair, net)


def raw_scores(net):
    return EdgeScoreList(net.i, net.j, net.q.copy(), "raw")


def _rank(i, j):
    lo = np.minimum(i, j).astype(np.int64)
    hi = np.maximum(i, j).astype(np.int64)
    return hi * (hi - 1) // 2 + lo


def roc(scores, truth_edges, n):
    """ROC of ``scores`` against the true edge set over all ``C(n, 2)`` pairs.

    Unlisted pairs join the score-0 group without being materialized.  Tied
    scores form a single step, i.e. a diagonal segment.
    """
    truth = np.asarray(truth_edges, dtype=np.int64).reshape(-1, 2)
    total = n * (n - 1) // 2
    truth_rank = np.unique(_rank(truth[:, 0], truth[:, 1]))
    n_pos = truth_rank.size
    n_neg = total - n_pos
    if n_pos == 0:
        raise EmptyTruth("truth edge set is empty; ROC is undefined")
    if n_neg == 0:
        raise FullTruth("truth edge set is complete; ROC is undefined")

    s = np.asarray(scores.score, dtype=np.float64)
    label = np.isin(_rank(scores.i, scores.j), truth_rank)
    pos_w = label.astype(np.float64)
    neg_w = 1.0 - pos_w
    unlisted_pos = n_pos - pos_w.sum()
    unlisted_neg = (total - s.size) - unlisted_pos
    if unlisted_pos + unlisted_neg > 0:
        s = np.append(s, 0.0)
        pos_w = np.append(pos_w, unlisted_pos)
        neg_w = np.append(neg_w, unlisted_neg)

    order = np.argsort(-s, kind="stable")
    s, pos_w, neg_w = s[order], pos_w[order], neg_w[order]
    last_of_group = np.append(np.flatnonzero(np.diff(s) != 0), s.size - 1)
    tp = np.cumsum(pos_w)[last_of_group]
    fp = np.cumsum(neg_w)[last_of_group]
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    return ROCCurve(fpr, tpr, auc)


def threshold_network(net, tau):
    """Binary network keeping the pairs with ``Q > tau``."""
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must lie in [0, 1), got {tau!r}")
    keep = net.q > tau
    return validate((net.i[keep], net.j[keep], np.ones(int(keep.sum()))), net.n)


def _labels(p):
    return p.g if isinstance(p, Partition) else np.asarray(p, dtype=np.int64)


def _confusion(pred, truth):
    k = max(getattr(pred, "k", 1), getattr(truth, "k", 1))
    pred, truth = _labels(pred), _labels(truth)
    if pred.size != truth.size:
        raise SizeMismatch(f"partitions have {pred.size} and {truth.size} nodes")
    if pred.size:
        k = max(k, int(pred.max()) + 1, int(truth.max()) + 1)
    C = np.zeros((k, k), dtype=np.int64)
    np.add.at(C, (pred, truth), 1)
    return C


def aligned_accuracy(pred, truth):
    """Best fraction of agreeing labels over all relabelings of ``pred``."""
    C = _confusion(pred, truth)
    k = C.shape[0]
    if k > MAX_PERMUTATION_K:
        raise TooManyGroups(f"{k} groups; use aligned_accuracy_hungarian")
    n = C.sum()
    if n == 0:
        return 1.0
    rows = np.arange(k)
    best = max(C[rows, perm].sum() for perm in itertools.permutations(range(k)))
    return float(best / n)


def aligned_accuracy_hungarian(pred, truth):
    C = _confusion(pred, truth)
    n = C.sum()
    if n == 0:
        return 1.0
    r, c = linear_sum_assignment(C, maximize=True)
    return float(C[r, c].sum() / n)


def mean_and_stderr(values):
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def _accuracy_of_fit(net, truth, k, options):
    try:
        fit = em_fit(net, k, "plain", options)
    except (AllRestartsDegenerate, DegenerateRho) as exc:
        # nothing to fit: score the all-in-one-group guess
        log.info("baseline fit unavailable (%s); scoring a constant partition", exc)
        return aligned_accuracy(np.zeros(truth.n, dtype=np.int64), truth)
    return aligned_accuracy(fit.hard_partition, truth)


def threshold_sweep(instances, taus=DEFAULT_TAUS, k=2, options=None):
    """Accuracy of threshold-then-fit at every ``tau``, averaged over instances.

    Returns rows ``(tau, mean accuracy, standard error, per-instance list)``.
    """
    if not isinstance(instances, (list, tuple)):
        instances = [instances]
    options = options or EMOptions()
    rows = []
    for tau in taus:
        accs = [_accuracy_of_fit(threshold_network(inst.network, tau), inst.truth_partition,
                                 k, options) for inst in instances]
        mean, err = mean_and_stderr(accs)
        rows.append((float(tau), mean, err, accs))
    return rows
