"""Stereo sound event localisation and detection: features, augmentation, targets, scoring."""
from .augment import AugmentConfig, acs, compose_pipeline, filter_augment, freq_shift, itfm
from .dsp_core import StftParams, build_mel_filterbank, log_mel, stft
from .labels import DistanceNormalizer, encode_targets, fit_normalizer
from .metrics import MetricsReport, ScoredFrame, angular_error, e_seld, match_frame, score
from .stereo_features import (
    CoherenceEstimator,
    FeatureParams,
    assemble_stack,
    mid_side,
    ms_intensity,
    msc,
)
from .wave_io import (
    Event,
    StereoClip,
    read_metadata_csv,
    read_tensor,
    read_wav,
    resample_if_needed,
    write_tensor,
    write_wav,
)

__version__ = "0.1.0"
