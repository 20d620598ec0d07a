"""Flow-based intrusion detection with an LSTM + additive self-attention
classifier trained from scratch in numpy."""

from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import FlowTable, ProcessedDataset, ScalerParams, SplitSpec, preprocess
from .metrics import ConfusionCounts, MetricsReport, confusion, report
from .model import LstmAttentionModel, ModelConfig, build
from .training import TrainConfig, evaluate, train

__version__ = "0.1.0"
