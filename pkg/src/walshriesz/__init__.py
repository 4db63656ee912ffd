"""Walsh series, Rudin-Shapiro flat polynomials, and positive Riesz products."""

__version__ = "1.0.0"

from .walsh import (
    Atom,
    AtomTable,
    InvariantViolation,
    LemmaWitness,
    NormBundle,
    SeriesFormatError,
    WalshIndex,
    WalshSeries,
    butterfly,
    fwht,
    inverse_fwht,
    multiply_by_walsh,
    norm_bundle,
    partial_sum,
    product_index,
    series_from_csv,
    series_from_json,
    series_to_csv,
    series_to_json,
    u_norm,
    verify_lemma,
    walsh_eval,
    walsh_signs,
)
from .rudin_shapiro import (
    FLATNESS_CONSTANT,
    BlockSpec,
    FlatPolynomial,
    RudinShapiroPair,
    build_flat,
    build_pair,
    rs_sign_sequence,
    substitute,
    substitute_sparse,
)
from .martingale import (
    EquivalenceReport,
    MartingaleDecomposition,
    OrthogonalityReport,
    PositivityWitness,
    SingularityReport,
    check_p3,
    check_positivity_equivalence,
    check_shifted_bound,
    decompose,
    dyadic_block_envelope,
    singularity_report,
    verify_product_orthogonality,
    verify_strong_orthogonality,
)
from .riesz import (
    BlockOverlapError,
    CoordinateBudgetError,
    Factor,
    LevelSelectionError,
    PositivityCertificate,
    PsiHypothesisError,
    PsiSpec,
    PsiSumReport,
    RieszProductState,
    SummabilityBudget,
    add_factor,
    build_measure,
    choose_next_level,
    empty_state,
    export_measure,
    factor_values,
    load_spectrum_csv,
    product_values,
    psi_sum_report,
    state_from_manifest,
    state_manifest,
    state_series,
    verify_all_partial_sums,
    thread_cap,
)
from .trig import (
    CTRIG,
    TrigCertificates,
    TrigFactor,
    TrigMeasureState,
    TrigPolynomial,
    build_trig_flat,
    build_trig_measure,
    strong_orthogonality_integral,
    trig_export,
)

__all__ = [name for name in dir() if not name.startswith("_")]
