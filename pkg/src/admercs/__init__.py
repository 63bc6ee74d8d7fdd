"""Tree-ensemble anomaly detection that scores instances and the contexts they live in."""

from admercs.data import Dataset, DataError, load_csv, normalize_minmax, save_csv
from admercs.evaluation import auc_roc, average_precision, evaluate
from admercs.explain import explain_instance, list_anomalous_contexts, render, render_context
from admercs.model import ADMercs
from admercs.persistence import load_model, save_model
from admercs.scoring import ScoringParams
from admercs.trees import TreeParams

__version__ = "0.1.0"

__all__ = [
    "ADMercs", "Dataset", "DataError", "ScoringParams", "TreeParams", "auc_roc", "average_precision",
    "evaluate", "explain_instance", "list_anomalous_contexts", "load_csv", "load_model",
    "normalize_minmax", "render", "render_context", "save_csv", "save_model",
]
