"""Causality-driven robustness audits over discrete imaging-factor models."""

__version__ = "0.1.0"

from .graph import (  # noqa: F401
    CausalDag,
    DagPerturbation,
    apply_perturbation,
    d_separated,
    mutilate,
    perturb,
    random_dag,
    topological_order,
    validate,
)
from .gcm import (  # noqa: F401
    Cpd,
    Gcm,
    LinearResponse,
    ObservationTable,
    RetentionResponse,
    SeverityDomain,
    augment_with_sink,
    exact_interventional_expectation,
    ingest_metrics,
    random_gcm,
    sample_interventional,
    sample_observational,
    true_ace,
)
from .identify import (  # noqa: F401
    AdjustmentSet,
    default_adjustment_set,
    frontdoor_applicable,
    is_valid_backdoor,
    minimal_adjustment_sets,
)
from .estimate import (  # noqa: F401
    AceError,
    AceEstimate,
    bootstrap_ci,
    delta_ace,
    estimate_ace,
    fit_outcome_model,
)
from .audit import (  # noqa: F401
    AuditConfig,
    AuditReport,
    MisspecReport,
    compare_reports,
    run_audit,
    run_misspec_sweep,
    run_simulated_audit,
)
