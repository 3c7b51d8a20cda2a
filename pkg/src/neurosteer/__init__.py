"""Steering-intention EEG pipeline.

Synthetic 64-channel/512 Hz data generation, trigger-aligned epoching with
outlier pruning and normalization, SMOTE class balancing, a from-scratch
1D convolutional classifier with exact backpropagation and Adam, spectral
and topographic reporting, and a real-time TCP streaming classifier.
"""

__version__ = "0.1.0"

from .balance import SmoteConfig, knn_same_class, smote_balance
from .cnn import (
    Architecture,
    Model,
    TrainConfig,
    TrainHistory,
    forward,
    gradient_check,
    init_model,
    load_model,
    loss_ce,
    predict,
    save_model,
    train,
    train_step,
)
from .dsp import (
    BandpassSpec,
    IcaDecomposition,
    Psd,
    band_power,
    bandpass,
    baseline_correct,
    car,
    collect_viz_epochs,
    evoked_average,
    fast_ica,
    reject_eog,
    topo_means,
    welch_psd,
)
from .epochs import (
    Epoch,
    EpochSet,
    WindowSpec,
    extract_epochs,
    load_epochs,
    normalize,
    reject_outliers,
    save_epochs,
    split_shuffle,
)
from .metrics import ClassMetrics, ConfusionMatrix, class_metrics, confusion
from .montage import CHANNELS_64, MontageMeta, validate_montage
from .pipeline import PipelineConfig, PipelineResult, prepare_epochs, run_pipeline
from .recording import (
    LABELS,
    Recording,
    TriggerEvent,
    load_recording,
    load_triggers,
    save_recording,
    save_triggers,
    validate_triggers,
)
from .stream import PredictionEvent, StreamServer, StreamSummary, classify_stream
from .synth import ScenarioConfig, SignalConfig, gen_recording, gen_scenario
