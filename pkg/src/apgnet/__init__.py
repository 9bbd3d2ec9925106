"""Two-stage prior-guided Siamese segmentation for underwater camouflage."""

from .apg import ApgConfig, CombinedAttention, DeformableRefine, PriorGuidedBlock
from .backbone import BackboneConfig, FeaturePyramid, TinyBackbone, build_backbone
from .config import ExperimentConfig, build_config, config_from_dict, config_to_dict
from .data import Batch, SampleRecord, index_dataset, load_sample, make_batch
from .erf import ErfConfig, ExtendedReceptiveField
from .fixtures import generate_fixtures
from .losses import SiameseTrainer, alignment_loss, pixel_weight_map, weighted_bce_iou
from .metrics import (
    MetricConfig,
    MetricReport,
    e_measure,
    evaluate_dataset,
    mae,
    miou,
    s_measure,
    weighted_f_measure,
)
from .model import APGNet, ModelConfig, PredictionSet
from .mpd import (
    PlainDecoder,
    ProgressiveDecoder,
    RoughPrediction,
    boundary_from_position,
    derive_position_prior,
    derive_priors,
    progressive_gate,
)
from .msrcr import MsrcrConfig, gaussian_surround, msrcr

__version__ = "0.1.0"
