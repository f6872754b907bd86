"""End-to-end synthetic experiments built from the library pieces.

Instance ``r`` of a benchmark seeded with ``seed`` is generated with seed
``seed + r``, so single instances can be regenerated in isolation.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .em import EMOptions, em_fit, posterior_at
from .evaluation import (
    DEFAULT_TAUS,
    aligned_accuracy,
    edge_posterior,
    mean_and_stderr,
    raw_scores,
    roc,
    threshold_sweep,
)
from .synth import BlockParams, NoiseRequest, generate_benchmark

log = logging.getLogger(__name__)


@dataclass
class CommunityBenchmark:
    """Accuracy of the uncertain-network fit and of threshold-then-fit."""

    accuracies: list  # per instance, uncertain-network fit
    baseline: list  # rows (tau, mean, stderr, per-instance accuracies)
    seeds: list = field(default_factory=list)

    @property
    def mean(self):
        return mean_and_stderr(self.accuracies)[0]

    @property
    def stderr(self):
        return mean_and_stderr(self.accuracies)[1]

    def baseline_best(self):
        """``(tau, mean accuracy)`` of the best threshold."""
        tau, mean, _, _ = max(self.baseline, key=lambda row: row[1])
        return tau, mean

    def table(self):
        """Rows ``(tau, baseline mean, baseline stderr, fit mean, fit stderr)``."""
        mean, err = mean_and_stderr(self.accuracies)
        return [(tau, b_mean, b_err, mean, err) for tau, b_mean, b_err, _ in self.baseline]


@dataclass
class RecoveryBenchmark:
    """AUC per scoring method; each entry lists one value per instance."""

    aucs: dict
    seeds: list = field(default_factory=list)
    c: float = float("nan")

    def summary(self):
        return {method: mean_and_stderr(values) for method, values in self.aucs.items()}


def _instances(n_instances, seed, n, params, request):
    seeds = [int(seed) + r for r in range(n_instances)]
    return seeds, [generate_benchmark(n, params, request, s) for s in seeds]


def community_benchmark(n_instances=5, seed=0, *, n=4000, omega_in=0.02, omega_out=0.014,
                        a1=1.4, b1=2.0, k=2, taus=DEFAULT_TAUS, options=None):
    """Planted two-group instances with beta noise: fit versus thresholding.

    The same ``options`` drive both the direct fit and every baseline fit.
    """
    options = options or EMOptions()
    params = BlockParams.planted(k, omega_in, omega_out)
    seeds, instances = _instances(n_instances, seed, n, params, NoiseRequest(b1=b1, a1=a1))
    accs = []
    for s, inst in zip(seeds, instances):
        fit = em_fit(inst.network, k, "plain", options)
        accs.append(aligned_accuracy(fit.hard_partition, inst.truth_partition))
        log.info("instance seed %d: fit accuracy %.4f", s, accs[-1])
    rows = threshold_sweep(instances, taus, k, options)
    return CommunityBenchmark(accs, rows, seeds)


def recovery_benchmark(n_instances=5, seed=0, *, n=4000, omega_in=0.05, omega_out=0.001,
                       b1=4.0, c=None, k=2, options=None, ideal_restarts=3):
    """Edge-recovery AUC of the fitted posterior, the known-parameter posterior and raw ``Q``.

    ``c`` (the fraction of non-edges with nonzero ``Q``) defaults to ``1/(4n)``.
    """
    options = options or EMOptions()
    c = 1.0 / (4 * n) if c is None else float(c)
    params = BlockParams.planted(k, omega_in, omega_out)
    seeds, instances = _instances(n_instances, seed, n, params, NoiseRequest(b1=b1, c=c))
    aucs = {"em": [], "ideal": [], "raw": []}
    for s, inst in zip(seeds, instances):
        net = inst.network
        fit = em_fit(net, k, "plain", options)
        ideal = posterior_at(net, inst.params, "plain", seed=s, restarts=ideal_restarts)
        for method, scores in (("em", edge_posterior(fit.t, fit.marginals.pair, net)),
                               ("ideal", edge_posterior(ideal.t, ideal.marginals.pair, net)),
                               ("raw", raw_scores(net))):
            aucs[method].append(roc(scores, inst.truth_edges, n).auc)
        log.info("instance seed %d: AUC em %.4f ideal %.4f raw %.4f", s,
                 aucs["em"][-1], aucs["ideal"][-1], aucs["raw"][-1])
    return RecoveryBenchmark(aucs, seeds, c)


def noise_sweep(b1_levels, *, c, seeds=(0, 1, 2), n=1000, omega_in=0.05, omega_out=0.005,
                k=2, options=None):
    """Mean fit accuracy as the true-edge noise ``Beta(a1, b1)`` widens.

    ``c`` is held fixed and ``a1`` is solved at each ``b1``, so larger ``b1``
    means noisier observations.  Returns rows ``(b1, mean, stderr, accuracies)``.
    """
    options = options or EMOptions()
    params = BlockParams.planted(k, omega_in, omega_out)
    rows = []
    for b1 in b1_levels:
        accs = []
        for s in seeds:
            inst = generate_benchmark(n, params, NoiseRequest(b1=b1, c=c), s)
            fit = em_fit(inst.network, k, "plain", options)
            accs.append(aligned_accuracy(fit.hard_partition, inst.truth_partition))
        mean, err = mean_and_stderr(accs)
        rows.append((float(b1), mean, err, accs))
    return rows
