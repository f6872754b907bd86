"""Community detection and edge recovery on uncertain networks."""

from .bp import Marginals, MessageSet, bethe_bound, bp_run, bp_sweep, pair_marginals
from .em import EMOptions, FitResult, compute_t, em_fit, posterior_at, update_gamma, update_omega
from .evaluation import (
    EdgeScoreList,
    ROCCurve,
    aligned_accuracy,
    aligned_accuracy_hungarian,
    edge_posterior,
    raw_scores,
    roc,
    threshold_network,
    threshold_sweep,
)
from .network import DegreeVector, Partition, UncertainNetwork, estimate_density, expected_degrees, validate
from .oracle import enumerate_posterior, joint_likelihood
from .synth import (
    BlockParams,
    NoiseRequest,
    NoiseSpec,
    PlantedInstance,
    apply_noise,
    generate_benchmark,
    sample_network,
    sample_partition,
    solve_noise,
)

__version__ = "0.1.0"
