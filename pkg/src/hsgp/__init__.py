"""Hierarchical signed-graph pooling with contrastive training.

The package turns multivariate signals into signed correlation networks,
embeds them with balanced/unbalanced attention layers interleaved with
information-score pooling, and trains the stack with a joint supervised
plus contrastive objective.  Node-level saliency maps attribute a trained
model's decisions back to the original nodes.
"""

from hsgp.augmentation import (
    AugmentConfig,
    ContrastivePair,
    augment_pair,
    pair_similarity_stats,
)
from hsgp.errors import ConfigError, DataError, HsgpError, NumericError
from hsgp.hgp_layer import PoolConfig
from hsgp.model_training import (
    ModelParams,
    Sample,
    TrainingConfig,
    evaluate,
    fold_split,
    forward_embed,
    load_checkpoint,
    save_checkpoint,
    train,
)
from hsgp.saliency import SaliencyMap, class_average_map, saliency_map, top_regions
from hsgp.signal_io import (
    BoldMatrix,
    FunctionalNetwork,
    load_bold_csv,
    pearson_network,
)
from hsgp.synthetic import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "BoldMatrix",
    "ConfigError",
    "ContrastivePair",
    "DataError",
    "FunctionalNetwork",
    "HsgpError",
    "ModelParams",
    "NumericError",
    "PoolConfig",
    "SaliencyMap",
    "Sample",
    "SyntheticSpec",
    "TrainingConfig",
    "augment_pair",
    "class_average_map",
    "evaluate",
    "fold_split",
    "forward_embed",
    "generate_synthetic",
    "load_bold_csv",
    "load_checkpoint",
    "pair_similarity_stats",
    "pearson_network",
    "saliency_map",
    "save_checkpoint",
    "top_regions",
    "train",
    "__version__",
]
