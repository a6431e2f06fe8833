"""Read clustering, anchor-only mapping and alignment recovery for
high-throughput sequencing libraries, with a cluster-count forecaster and a
simulation/evaluation kit."""

__version__ = "0.1.0"

from .align import (
    DEFAULT_SCHEME,
    AlignmentResult,
    ScoreScheme,
    hamming,
    min_score,
    smith_waterman,
)
from .cluster_engine import (
    Assignment,
    ClusterParams,
    ClusterTable,
    SubOptimalEdges,
    cluster_paired_end,
    cluster_single_end,
    overlap_similarity,
    read_clusters,
    read_edges,
    reassign_optimal,
    record_suboptimal,
    try_assign,
    write_clusters,
    write_edges,
)
from .clustered_mapper import (
    InsertModel,
    estimate_insert,
    load_genome_fasta,
    map_all,
    parse_anchor_sam,
)
from .kmer_index import PostingArray, kmer_code
from .predictor import (
    ClusterForecast,
    PredictorInputs,
    binom_pmf,
    binom_tail,
    expected_clusters,
    step_probability,
    suggest_beta,
)
from .readio import ReadLibrary, load_library, parse_fastq
from .samio import SamRecord, read_sam
from .simkit import (
    SimParams,
    Truth,
    accuracy,
    alternate_mapping_rate,
    concordance,
    generate_genome,
    sample_reads,
)

__all__ = [
    "AlignmentResult",
    "Assignment",
    "ClusterForecast",
    "ClusterParams",
    "ClusterTable",
    "DEFAULT_SCHEME",
    "InsertModel",
    "PostingArray",
    "PredictorInputs",
    "ReadLibrary",
    "SamRecord",
    "ScoreScheme",
    "SimParams",
    "SubOptimalEdges",
    "Truth",
    "accuracy",
    "alternate_mapping_rate",
    "binom_pmf",
    "binom_tail",
    "cluster_paired_end",
    "cluster_single_end",
    "concordance",
    "estimate_insert",
    "expected_clusters",
    "generate_genome",
    "hamming",
    "kmer_code",
    "load_genome_fasta",
    "load_library",
    "map_all",
    "min_score",
    "overlap_similarity",
    "parse_anchor_sam",
    "parse_fastq",
    "read_clusters",
    "read_edges",
    "read_sam",
    "reassign_optimal",
    "record_suboptimal",
    "sample_reads",
    "smith_waterman",
    "step_probability",
    "suggest_beta",
    "try_assign",
    "write_clusters",
    "write_edges",
]
