"""Metrics and analyses over ingested classifier outputs."""

from .analysis import (
    CROSS_DOMAIN,
    IN_DOMAIN,
    NoiseAudit,
    WorthCurve,
    WorthEstimate,
    audit_sample,
    curve_csv,
    load_worth_curve,
    wilson_interval,
    worth_estimate,
)
from .metrics import (
    AP_DEFINITION,
    ApResult,
    ConfusionMatrix,
    confusion_matrix,
    mean_ap,
    top1_accuracy,
)
from .predictions import (
    PredictionRow,
    PredictionSet,
    load_predictions,
    save_predictions,
)
from .taxonomy import (
    RANK_ORDER,
    TaxonNode,
    Taxonomy,
    histogram_csv,
    lca_histogram,
    load_taxonomy,
)

__all__ = [
    "AP_DEFINITION",
    "ApResult",
    "CROSS_DOMAIN",
    "ConfusionMatrix",
    "IN_DOMAIN",
    "NoiseAudit",
    "PredictionRow",
    "PredictionSet",
    "RANK_ORDER",
    "TaxonNode",
    "Taxonomy",
    "WorthCurve",
    "WorthEstimate",
    "audit_sample",
    "confusion_matrix",
    "curve_csv",
    "histogram_csv",
    "lca_histogram",
    "load_predictions",
    "load_taxonomy",
    "load_worth_curve",
    "mean_ap",
    "save_predictions",
    "top1_accuracy",
    "wilson_interval",
    "worth_estimate",
]
