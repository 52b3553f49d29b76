"""Hierarchical transformer EEG emotion classifier, from the tensors up.

A small reverse-mode autodiff engine, transformer encoder blocks, a
two-level (electrode -> brain region) spatial hierarchy over weight-
shared temporal extractors, the standard EEG preprocessing chain, and a
leave-one-subject-out training harness.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import (EegRecording, FoldPlan, Sample, batch_iter, binarize, collate,
                   labeled, load_dataset, loso_split, preprocess_recording,
                   read_recording, write_recording)
from .model import (ModelConfig, TsertModel, build_variant, classify, forward,
                    param_count, region_readout, spatial_hierarchy,
                    temporal_extract)
from .montage import CHANNELS_32, RegionPartition, parse_partition_file
from .optim import Adam, EarlyStopping, cosine_lr
from .signal import (BandSet, FilterSpec, bandpass, psd_features, psd_patches,
                     resample, synth_generate, window)
from .tensor import Tensor, backward, gradcheck, no_grad
from .train import (FoldResult, TrainConfig, bce_loss, evaluate, metrics,
                    profile_configs, run_loso, train_fold)

__version__ = "0.1.0"

__all__ = [
    "Adam", "BandSet", "CHANNELS_32", "EarlyStopping", "EegRecording",
    "FilterSpec", "FoldPlan", "FoldResult", "ModelConfig", "RegionPartition",
    "Sample", "Tensor", "TrainConfig", "TsertModel", "backward", "bandpass",
    "batch_iter", "bce_loss", "binarize", "build_variant", "classify",
    "collate", "cosine_lr", "evaluate", "forward", "gradcheck", "labeled",
    "load_checkpoint", "load_dataset", "loso_split", "metrics", "no_grad",
    "param_count", "parse_partition_file", "preprocess_recording",
    "profile_configs", "psd_features", "psd_patches", "read_recording",
    "region_readout", "resample", "run_loso", "save_checkpoint", "spatial_hierarchy",
    "synth_generate", "temporal_extract", "train_fold", "window",
    "write_recording",
]
