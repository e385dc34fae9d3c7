"""MBR candidate selection with ALS matrix completion of a sparsely scored utility matrix."""

from .analysis import (
    STANDARD_SPACE,
    GridSearchResult,
    GridSearchSpace,
    SpectrumReport,
    rank_position,
    singular_spectrum,
    tune_grid_search,
)
from .completion import AlsParams, CompletionResult, FactorPair, als_complete, als_objective, merge_completed
from .decoding import CandidateSource, DecodeResult, MatrixSource, Method, decode, fmbr, nxk, pmbr, sxs
from .errors import InputError, NumericalError, PmbrError, SingularSystemError, UtilityError
from .harness import RegretSummary, TrialConfig, TrialSummary, emit_results, run_trials
from .io import load_candidates, load_matrices, write_candidates, write_matrices
from .matrix import (
    Budget,
    DecodeChoice,
    Hypothesis,
    Omega,
    SegmentCandidates,
    UtilityMatrix,
    build_full_matrix,
    fill_partial,
    mbr_select,
    restrict_rows_cols,
    row_means,
    sample_omega,
)
from .utility import CHRF, PrecomputedStore, UtilityFn, chrf_score, denormalize, normalize, precomputed_lookup

__version__ = "0.1.0"
