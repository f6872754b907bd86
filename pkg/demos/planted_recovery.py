"""Recovering planted groups from a noisy edge-probability network.

We plant two groups of 500 nodes, draw a true network from a block model,
then hide it: every true edge is reported with a probability drawn from
Beta(a1, b1) and a fraction ``c`` of the non-edges leak in with probabilities
from Beta(a0, b0).  The fit only ever sees those probabilities.

Run with ``python demos/planted_recovery.py``; it takes about a minute.
"""

import numpy as np

from uncertnet import BlockParams, EMOptions, NoiseRequest, aligned_accuracy, em_fit, generate_benchmark

N = 1000
TRUTH = BlockParams.planted(2, 0.04, 0.008)

inst = generate_benchmark(N, TRUTH, NoiseRequest(b1=1.0, c=0.2), seed=11)
net = inst.network
noise = inst.noise
print(f"{N} nodes, {len(inst.truth_edges)} hidden true edges, {net.num_pairs} observed pairs")
print(f"noise: true edges ~ Beta({noise.a1:.3f}, {noise.b1:g}), "
      f"non-edges ~ {noise.c:g} * Beta({noise.a0:.3f}, {noise.b0:g})")

# Most observed pairs are leaked non-edges, so the raw probabilities alone
# look like a dense, nearly structureless graph.
true_q = net.q[np.isin(net.i * N + net.j, inst.truth_edges[:, 0] * N + inst.truth_edges[:, 1])]
print(f"mean reported probability: true edges {true_q.mean():.3f}, all pairs {net.q.mean():.3f}")

fit = em_fit(net, 2, "plain", EMOptions(restarts=4, seed=0))
print(f"\nfitted after {fit.iterations} EM iterations (bound {fit.bound:.2f})")
print("gamma", np.round(fit.params.gamma, 3), " truth", TRUTH.gamma)
print("omega\n", np.round(fit.params.omega, 4), "\ntruth\n", TRUTH.omega)

acc = aligned_accuracy(fit.hard_partition, inst.truth_partition)
print(f"\naligned accuracy {acc:.3f}")

# Marginals are soft: the least certain nodes sit near 0.5.
confidence = fit.marginals.node.max(axis=1)
print(f"nodes assigned with >0.9 confidence: {np.mean(confidence > 0.9):.1%}")
