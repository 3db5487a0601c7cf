"""Cross-patient seizure detection from EEG via domain-adversarial
two-stage training of a CNN-BiLSTM detector.

The public surface groups into:

- tensor/optim/gradcheck: the reverse-mode autodiff engine and Adam
- layers/networks: the model components
- preprocessing: montage, bandpass, standardization, windowing
- training: losses, schedules, and the two training stages
- estimator: the sklearn-style SeizureDetector
- metrics/evaluation: thresholded detection metrics and LOPO harness
- io/synthesis: file formats and the synthetic cohort generator
"""

from .data import EegRecording, WindowedSequence
from .estimator import SeizureDetector
from .exceptions import (
    ConfigError,
    DataError,
    NumericError,
    SeizDannError,
)
from .metrics import auc_pr, auc_roc, confusion_metrics, detect, select_threshold
from .preprocessing import make_preprocessing_pipeline, preprocess_recording
from .synthesis import CohortSpec, synthesize_cohort
from .tensor import Tensor, no_grad
from .training import (
    ClassWeights,
    SourceDataset,
    Stage1Config,
    Stage2Config,
    class_weights,
    domain_loss,
    label_loss,
    lambda_schedule,
    stage1_train,
    stage2_train,
)

__version__ = "0.1.0"

__all__ = [
    "EegRecording",
    "WindowedSequence",
    "SeizureDetector",
    "SeizDannError",
    "ConfigError",
    "DataError",
    "NumericError",
    "detect",
    "select_threshold",
    "confusion_metrics",
    "auc_roc",
    "auc_pr",
    "preprocess_recording",
    "make_preprocessing_pipeline",
    "CohortSpec",
    "synthesize_cohort",
    "Tensor",
    "no_grad",
    "ClassWeights",
    "class_weights",
    "label_loss",
    "domain_loss",
    "lambda_schedule",
    "SourceDataset",
    "Stage1Config",
    "Stage2Config",
    "stage1_train",
    "stage2_train",
    "__version__",
]
