from .dataset import (RGBTFrame, Sequence, detect_layout, find_sequences, load_gtot_sequence,
                      load_rgbt234_sequence, load_sequence, parse_annotation_file, read_image,
                      save_gtot)
from .patches import (GroundTruthMask, SamplePair, crop_pair_patches, crop_patch, crop_patches,
                      make_mask)
from .synthetic import SyntheticSpec, motion_position, synthesize_sequence

__all__ = [
    "GroundTruthMask", "RGBTFrame", "SamplePair", "Sequence", "SyntheticSpec",
    "crop_pair_patches", "crop_patch", "crop_patches", "detect_layout", "find_sequences",
    "load_gtot_sequence", "load_rgbt234_sequence", "load_sequence", "make_mask",
    "motion_position", "parse_annotation_file", "read_image", "save_gtot", "synthesize_sequence",
]
