"""Greedy determinant-based sparse sensor selection on POD bases."""
from .dataio import SelectionReport, SnapshotMatrix, load_matrix, save_matrix, save_report
from .errors import (IllConditionedError, NumericalError, ParseError, RankDeficiencyError,
                     SensorSelError, ValidationError)
from .objective import (ObjectiveConfig, brute_force_optimal, check_monotone_submodular, det_gram,
                        qr_rank_residual, unified_logdet)
from .pod import PodBasis, compute_pod, truncation_error
from .reconstruction import (Measurement, NoiseModel, estimate_state, estimation_error,
                             reconstruct_field, verify_error_covariance)
from .selection import (GramState, SensorSet, gram_update_over, gram_update_under, select,
                        select_dg, select_gappy_r, select_qd, select_qr, select_random)

__version__ = "0.1.0"

__all__ = [
    "SelectionReport", "SnapshotMatrix", "load_matrix", "save_matrix", "save_report",
    "IllConditionedError", "NumericalError", "ParseError", "RankDeficiencyError", "SensorSelError",
    "ValidationError", "ObjectiveConfig", "brute_force_optimal", "check_monotone_submodular",
    "det_gram", "qr_rank_residual", "unified_logdet", "PodBasis", "compute_pod", "truncation_error",
    "Measurement", "NoiseModel", "estimate_state", "estimation_error", "reconstruct_field",
    "verify_error_covariance", "GramState", "SensorSet", "gram_update_over", "gram_update_under",
    "select", "select_dg", "select_gappy_r", "select_qd", "select_qr", "select_random",
]
