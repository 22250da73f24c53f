"""Cone-condition certification and computation of invariant graph manifolds."""

from .core import (
    BoxDomain,
    Point,
    RateProfile,
    SplitVectorField,
    ZBound,
    cone_gauge,
    hyp1_bound,
    in_cone,
)
from .errors import (
    ConekitError,
    ConfigError,
    GraphComputationError,
    HypothesisError,
    IntegrationError,
    NumericError,
    RiccatiBlowup,
)
from .hypotheses import (
    CheckReport,
    check_hyp2,
    check_hyp2star,
    check_hyp5,
    grid_rates,
    max_certified_order,
    pointwise_rates,
)
from .integrate import (
    cocycle_probe,
    integrate,
    integrate_batch,
    variational,
)
from .manifold import (
    BoundaryReport,
    GraphManifold,
    classify_boundary,
    compute_graph_shoot,
    compute_graph_transform,
    cone_invariance_probe,
    derivative_field,
    intersect_graphs,
    invariance_residual,
    lipschitz_audit,
    periodicity_audit,
    separation_probe,
)
from .regions import (
    PersistenceConstants,
    RapidOscSpec,
    TorusFamilyParams,
    best_torus_slack,
    beta_projection,
    counterexample_fixed_points,
    k_epsilon,
    kappa,
    persistence_thresholds,
    q_membership,
    rapid_osc_condition,
)
from .riccati import lift_level1, riccati_batch, riccati_integrate
from .systems import (
    audit_system,
    build_system,
    get_spec,
    register_system,
    system_names,
)
from .tables import read_graph, read_table, write_graph, write_table

__version__ = "0.1.0"

__all__ = [
    "BoundaryReport",
    "BoxDomain",
    "CheckReport",
    "ConekitError",
    "ConfigError",
    "GraphComputationError",
    "GraphManifold",
    "HypothesisError",
    "IntegrationError",
    "NumericError",
    "PersistenceConstants",
    "Point",
    "RapidOscSpec",
    "RateProfile",
    "RiccatiBlowup",
    "SplitVectorField",
    "TorusFamilyParams",
    "ZBound",
    "audit_system",
    "best_torus_slack",
    "beta_projection",
    "build_system",
    "check_hyp2",
    "check_hyp2star",
    "check_hyp5",
    "classify_boundary",
    "cocycle_probe",
    "compute_graph_shoot",
    "compute_graph_transform",
    "cone_gauge",
    "cone_invariance_probe",
    "counterexample_fixed_points",
    "derivative_field",
    "get_spec",
    "grid_rates",
    "hyp1_bound",
    "in_cone",
    "integrate",
    "integrate_batch",
    "intersect_graphs",
    "invariance_residual",
    "k_epsilon",
    "kappa",
    "lift_level1",
    "lipschitz_audit",
    "max_certified_order",
    "periodicity_audit",
    "persistence_thresholds",
    "pointwise_rates",
    "q_membership",
    "rapid_osc_condition",
    "read_graph",
    "read_table",
    "register_system",
    "riccati_batch",
    "riccati_integrate",
    "separation_probe",
    "system_names",
    "variational",
    "write_graph",
    "write_table",
]
