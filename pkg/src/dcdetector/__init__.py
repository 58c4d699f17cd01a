"""Dual-attention contrastive anomaly detection for multivariate time series."""

from .data import TimeSeriesDataset, WindowBatch, WindowSpec, instance_normalize, load_csv, slide_windows
from .metrics import MetricsReport, compute_metrics, point_adjust
from .model import DCDetector, DetectorConfig
from .objective import LossReport, ScoreSeries, anomaly_score, apply_threshold, discrepancy_loss
from .synth import AnomalyInjection, SynthSpec, generate
from .trainer import PRESETS, RunLog, TrainConfig, checkpoint_load, checkpoint_save, score_series, train

__version__ = "0.1.0"
