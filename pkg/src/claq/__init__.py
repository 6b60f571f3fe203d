"""Column-level adaptive weight quantization.

Per-column k-means codebooks, outlier-ratio-guided mixed precision and
outlier reservation, Hessian-compensated column updates, and a bit-exact
packed container with size accounting.
"""

from .allocation import (
    ColumnPlan,
    FUSION_PRESETS,
    ModelAllocation,
    SPLIT_SETTINGS,
    allocate_outlier_budget,
    allocate_precision,
    equivalent_bits_of,
    plan_fusion,
    uniform_plan,
)
from .errors import (
    ClaqError,
    FormatError,
    InfeasibleBudgetError,
    NumericalError,
    ValidationError,
)
from .hessian import HessianState, compute_hessian, synthetic_calibration
from .kmeans import Codebook, assign, exact_cluster_1d, lloyd_cluster, wcss_of
from .outliers import (
    OutlierProfile,
    model_outlier_stats,
    outlier_ratio,
    threshold_for_fraction,
)
from .packed import (
    PackedTensor,
    SizeReport,
    dequantize_tensor,
    load_packed,
    measure_size,
    save_packed,
)
from .quantize import (
    ClusterConfig,
    QuantReport,
    quantize_matrix,
    quantize_matrix_plain,
    quantize_model,
    reconstruction_error,
)
from .search import MatrixStat, SearchConfig, SearchResult, heuristic_search
from .synthetic import synthetic_model
from .weights import ModelWeights, WeightMatrix, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "ClaqError",
    "ClusterConfig",
    "Codebook",
    "ColumnPlan",
    "FUSION_PRESETS",
    "FormatError",
    "HessianState",
    "InfeasibleBudgetError",
    "MatrixStat",
    "ModelAllocation",
    "ModelWeights",
    "NumericalError",
    "OutlierProfile",
    "PackedTensor",
    "QuantReport",
    "SPLIT_SETTINGS",
    "SearchConfig",
    "SearchResult",
    "SizeReport",
    "ValidationError",
    "WeightMatrix",
    "allocate_outlier_budget",
    "allocate_precision",
    "assign",
    "compute_hessian",
    "dequantize_tensor",
    "equivalent_bits_of",
    "exact_cluster_1d",
    "heuristic_search",
    "lloyd_cluster",
    "load_model",
    "load_packed",
    "measure_size",
    "model_outlier_stats",
    "outlier_ratio",
    "plan_fusion",
    "quantize_matrix",
    "quantize_matrix_plain",
    "quantize_model",
    "reconstruction_error",
    "save_model",
    "save_packed",
    "synthetic_calibration",
    "synthetic_model",
    "threshold_for_fraction",
    "uniform_plan",
    "wcss_of",
]
