"""Source-separation evaluation toolkit.

Energy-ratio metrics (framewise FIR-subspace SDR/ISR/SIR/SAR, the
scale-invariant family with its reweighted variant), Frechet audio
distance over embedding statistics, listener-rating quality control,
and per-user per-stem rank correlation between the two worlds.
"""

from .audio import (
    AudioBuffer,
    StemKind,
    downmix_mono,
    extract_fragment,
    load_wav,
    make_anchor,
    save_wav,
)
from .bsseval import (
    BssDecomposition,
    BssFrameScores,
    FirProjection,
    bss_decompose,
    bsseval,
    fir_project,
)
from .correlation import (
    MetricScoreRecord,
    SweepCurve,
    TauAggregate,
    TauRecord,
    aggregate_tau,
    kendall_tau,
    per_unit_tau,
    read_scores_csv,
    weight_sweep,
    write_scores_csv,
)
from .errors import (
    DegenerateReferenceError,
    DependentReferencesError,
    FormatError,
    InputError,
    JoinError,
    NumericalFailureError,
    ParameterError,
    ParseError,
    RangeError,
    SampleRateMismatchError,
    ShortFragmentError,
    StemevalError,
    StructuralError,
    UndefinedCorrelationError,
)
from .fad import (
    EmbeddingMatrix,
    FadResult,
    GaussianStats,
    fad_score,
    fit_gaussian,
    frechet_distance,
    read_embeddings,
    sqrtm_psd,
    write_embeddings,
)
from .ratings import (
    FilterResult,
    QcThresholds,
    RatingRecord,
    ViolationReport,
    filter_ratings,
    parse_ratings_csv,
    run_quality_checks,
)
from .si import (
    SIDecomposition,
    SIMetrics,
    reweighted_si_sdr,
    si_decompose,
    si_metrics,
)
from .values import EPS_ZERO, PERFECT_FIT, MetricValue, is_perfect_fit

__version__ = "0.1.0"
