"""Local-field matrix algebra and Monte Carlo checks for ergodic measures
on infinite skew-symmetric matrices over Q_p and F_p((t))."""

__version__ = "0.1.0"

from .local_field import (  # noqa: E402
    INF,
    NEG_INF,
    FieldMismatch,
    FieldSpec,
    InsufficientPrecision,
    Kind,
    LocalElem,
    PhaseValue,
    add,
    chi,
    inv,
    mul,
    sample_uniform_integer,
    theta,
)
from .linalg import (  # noqa: E402
    CanonicalSkewForm,
    LocalMatrix,
    NotSkewError,
    ShapeError,
    assemble_block_diag,
    canonical_exponents,
    congruence,
    matmul,
    sample_gl,
    skew_canonical_form,
    skew_part,
)
from .ensembles import (  # noqa: E402
    EnsembleSample,
    Signature,
    exchange_coords,
    sample_mat_invariant,
    sample_orbital,
    sample_skew_ergodic,
)
from .charfn import (  # noqa: E402
    BoundReport,
    Estimate,
    OrbitalKernel,
    RowKernel,
    ThetaKernel,
    charfn_closed_form,
    charfn_fingerprint,
    exact_quotient_integral,
    gl_vs_mat_gap_bound,
    mc_charfn,
    mc_orbital,
    orbital_error_bound,
    pairing,
    separating_ell,
    tau_identity_check,
    theta_product,
)
