"""Phone classification with boosted spectro-temporal patch features.

Submodules:
  ingest      audio, segmentations, phone sets, synthetic corpora
  dsp         spectrograms, mel rescaling, normalization, warping, MFCC
  haar        rectangle difference features over integral images
  hog         gradient orientation histograms with per-patch linear SVMs
  boost       decision stumps, Discrete and Gentle AdaBoost
  multiclass  pairwise classifiers composed by voting schemes
  evaluate    equivalence-aware scoring, confusion tables, experiments
  plots       figure rendering for reports (CLI report path)
  cli         the `phoneboost` command
"""

from . import boost, dsp, evaluate, haar, hog, ingest, multiclass, pipeline
from .ingest import PhoneSegment, PhoneSet, Recording
from .multiclass import MulticlassModel, load_model, save_model, train_model
from .pipeline import Featurizer, PipelineConfig

__version__ = "0.1.0"

__all__ = [
    "boost", "dsp", "evaluate", "haar", "hog", "ingest", "multiclass",
    "pipeline", "Recording", "PhoneSegment", "PhoneSet", "MulticlassModel",
    "train_model", "save_model", "load_model", "Featurizer", "PipelineConfig",
    "__version__",
]
