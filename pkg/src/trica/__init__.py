"""Transfer of latent structure features across networks for collective classification."""

from .classify import IcaConfig, LogisticConfig, PipelineConfig, run_ica, tr_ica
from .experiment import ExperimentConfig, accuracy, pica_features, run_experiment
from .factorization import FitConfig, FactorizationState, fit_joint, quality_score, select_k
from .graph import LabeledSplit, Network, binarize_labels, largest_class, neighbors, split_labeled
from .ingest import LinqsDataset, PlantedPartitionParams, generate_planted_partition, load_linqs
from .propagation import AffinityConfig, affinity_matrix, normalized_operator, propagate_labels, propagation_matrix

__version__ = "0.1.0"
