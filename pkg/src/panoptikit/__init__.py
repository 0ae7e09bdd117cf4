"""Silhouette features, mask losses, blend composition, panoptic fusion and PQ evaluation."""

from .blend import BlendParams, InstanceMask, attention_scores, blend_logits, compose_instance
from .config import ToolConfig, make_config
from .fusion import FusionParams, PanopticResult, fuse_panoptic, fuse_roundtrip_check
from .grids import BBox, bilinear_sample, paste_mask, resize_bilinear, roi_align_crop
from .losses import (
    IGNORE_LABEL,
    mse,
    mse_grad,
    pixel_cross_entropy,
    pixel_cross_entropy_grad,
    soft_iou_grad,
    soft_iou_loss,
)
from .metrics import PQReport, PQStats, image_stats, match_segments, pq_evaluate, pq_reduce
from .panoptic_io import (
    PanopticFileBundle,
    decode_panoptic,
    encode_panoptic,
    read_bundle,
    write_bundle,
)
from .scoring import (
    Detection,
    ScoredInstance,
    box_iou,
    confidence_targets,
    mask_iou,
    mask_score,
    nms,
    rank_instances,
)
from .silhouette import (
    SegmentInfo,
    SegmentTable,
    SilhouettePair,
    dice_grad,
    dice_score,
    extract_silhouette,
    mask_silhouette,
    silhouette_loss,
    silhouette_pair,
)
from .synth import SceneSpec, SyntheticScene, synth_scene

__version__ = "0.1.0"
