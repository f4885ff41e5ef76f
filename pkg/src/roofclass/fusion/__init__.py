"""Feature- and decision-level fusion plus the downstream classifier search."""

from roofclass.fusion.combine import (
    FusionRecord,
    concat_features,
    concat_softmax,
    mean_softmax,
    records_from_matrix,
)
from roofclass.fusion.scaling import ScalerParams, fit_scaler, scale_features, transform
from roofclass.fusion.downstream import (
    DownstreamSpec,
    FittedDownstream,
    SearchProtocol,
    enumerate_grid,
    fit_downstream,
    load_downstream,
    predict_downstream,
    sample_random,
    save_downstream,
    write_cv_table,
)

__all__ = [
    "FusionRecord",
    "concat_features",
    "concat_softmax",
    "mean_softmax",
    "records_from_matrix",
    "ScalerParams",
    "fit_scaler",
    "transform",
    "scale_features",
    "DownstreamSpec",
    "SearchProtocol",
    "FittedDownstream",
    "enumerate_grid",
    "sample_random",
    "fit_downstream",
    "predict_downstream",
    "save_downstream",
    "load_downstream",
    "write_cv_table",
]
