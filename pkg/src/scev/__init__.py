"""Semi-supervised clustering ensembles combined by relabeling and weighted voting."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    MISSING,
    UNRESOLVED,
    AlignmentMap,
    ConsensusResult,
    Dataset,
    Ensemble,
    Partition,
    PartitionWeights,
    Provenance,
    SupervisionBundle,
    canonicalize,
    must_link_closure,
    validate_supervision,
)
from .alignment import (  # noqa: E402
    ContingencyTable,
    apply_alignment,
    brute_force_alignment,
    contingency_table,
    optimal_alignment,
)
from .consensus import (  # noqa: E402
    ReferencePolicy,
    TiePolicy,
    combine_weights,
    consensus_from_ensemble,
    scev_run,
    select_reference,
    weighted_vote,
)
from .clusterers import (  # noqa: E402
    ClustererConfig,
    EnsembleEntry,
    EnsembleSpec,
    constrained_kmeans,
    cop_kmeans,
    generate_ensemble,
    lloyd_kmeans,
    seeded_kmeans,
    spherical_kmeans,
)
from .metrics import (  # noqa: E402
    MetricReport,
    adjusted_rand_index,
    constraint_violation_count,
    normalized_mutual_information,
    purity,
)
from .io import load_dataset, load_partitions, load_supervision, make_gaussians  # noqa: E402
