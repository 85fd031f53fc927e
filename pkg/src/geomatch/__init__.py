"""Point-cloud matching from pairwise data: estimators, theory oracles, sweep harness."""

from geomatch.models import Instance, Observation, Permutation, observe, sample_instance
from geomatch.estimators import EstimateResult, EstimatorConfig, overlap, run_estimator
from geomatch.harness import SweepConfig, SweepRecord, run_sweep, summarize

__version__ = "0.1.0"

__all__ = [
    "Instance",
    "Observation",
    "Permutation",
    "observe",
    "sample_instance",
    "EstimateResult",
    "EstimatorConfig",
    "overlap",
    "run_estimator",
    "SweepConfig",
    "SweepRecord",
    "run_sweep",
    "summarize",
    "__version__",
]
