"""IUPM estimation from serial limiting dilution assays with optional deep sequencing."""

from ._iupm import (
    Assay,
    DilutionLevel,
    FitResult,
    InvalidAssay,
    LrtResult,
    NBFit,
    NotIdentifiable,
    ParseError,
    SingularInformation,
    chi2_1_upper_tail,
    expected_m,
    expected_y,
    fisher_information,
    fit_bc_mle,
    fit_mle,
    fit_negbin,
    gradient,
    log_likelihood,
    lrt_overdispersion,
    lrt_p_value,
    nint,
    parse_summary_json,
    simulate,
    to_summary_json,
    wald_ci,
    well_joint_prob,
    without_udsa,
)

__all__ = [name for name in dir() if not name.startswith("_")]
