"""Why not just threshold?

The common shortcut turns probabilities into a binary network by keeping
pairs with ``Q > tau`` and then runs ordinary community detection.  A low
threshold keeps the leaked non-edges; a high one throws away most of the
true edges.  Fitting the probabilities directly avoids choosing at all.

Run with ``python demos/thresholding_vs_uncertain.py``; a few minutes.
"""

from uncertnet import (
    BlockParams,
    EMOptions,
    NoiseRequest,
    aligned_accuracy,
    em_fit,
    generate_benchmark,
    threshold_sweep,
)

N = 1000
inst = generate_benchmark(N, BlockParams.planted(2, 0.04, 0.008), NoiseRequest(b1=4.0, c=0.2), seed=5)
options = EMOptions(restarts=3, seed=0)

fit = em_fit(inst.network, 2, "plain", options)
direct = aligned_accuracy(fit.hard_partition, inst.truth_partition)

rows = threshold_sweep([inst], (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8), 2, options)
print("  tau  accuracy")
for tau, mean, _, _ in rows:
    print(f"{tau:5.2f}  {mean:.3f}")
print(f"\nfitting the probabilities directly: {direct:.3f}")
