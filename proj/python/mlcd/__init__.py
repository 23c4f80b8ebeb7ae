"""Multi-label cluster discrimination: clustering, pseudo-labels, losses and training."""

from ._mlcd import (
    MlcdError,
    assign_threshold,
    assign_top_l,
    batch_loss,
    embed,
    kmeans,
    knn_eval,
    linear_probe,
    loss,
    make_multi_concept,
    margin_cosine,
    sample_classes,
    selftest,
    similarity_stats,
    train,
)

__all__ = [
    "MlcdError",
    "assign_threshold",
    "assign_top_l",
    "batch_loss",
    "embed",
    "kmeans",
    "knn_eval",
    "linear_probe",
    "loss",
    "make_multi_concept",
    "margin_cosine",
    "sample_classes",
    "selftest",
    "similarity_stats",
    "train",
]
