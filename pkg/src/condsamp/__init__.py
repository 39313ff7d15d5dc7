"""Distribution property testing with conditional-sampling oracles."""

from .adaptive import (
    AdaptiveParams,
    amplify,
    identity_primitive,
    test_identity_adaptive,
    test_near_uniformity,
)
from .adversarial import (
    ReductionFailed,
    ReductionSampler,
    balanced_extend,
    gen_uniblock,
    string_distribution,
    u_distribution,
)
from .bucketing import (
    BucketPartition,
    bucket,
    bucket_prime,
    coarsen,
    coarsened_oracle,
    restrict,
    restricted_oracle,
)
from .core import (
    CondOracle,
    Decision,
    Distribution,
    DomainMismatchError,
    PreconditionError,
    RecordingOracle,
    SampleAccount,
    SimulatedOracle,
    Verdict,
    ZeroMassError,
    halfheavy,
    linf_distance,
    point_mass,
    simulated_oracle,
    smooth,
    tv_distance,
    uniform,
    zipf,
)
from .learner import (
    GridCounts,
    LearnResult,
    bucketize,
    learn_distribution,
    min_permutation_tv,
    tentative_distribution,
    test_identity_up_to_relabeling,
    test_label_invariant,
)
from .nonadaptive import NonAdaptivePlan, test_identity_nonadaptive, test_near_uniformity_nonadaptive
from .sampler import (
    ExplicitSample,
    PersistentSampler,
    TrimmingSampler,
    estimate_ratio,
    exact_alpha,
    reconstitute,
    trim_exact,
)
from .specs import parse_distribution

__version__ = "0.1.0"
