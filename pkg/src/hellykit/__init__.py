"""Toolkit for certified small-subfamily selection in convex half-space families.

Layers: `bodies` (polytope primitives and oracles), `john` (extremal
ellipsoids and contact decompositions), `sparsify` (approximate identity
decompositions), `select` (volume/diameter subfamily pipelines), `harness`
(seeded experiments and reports), `figures` (report plots), `cli`.
"""

from .bodies import (
    ContainmentCertificate,
    Ellipsoid,
    HPolytope,
    VPolytope,
    check_containment,
    cross_polytope,
    cross_polytope_vertices,
    cube,
    diameter,
    enumerate_vertices,
    gauge,
    gauge_many,
    is_bounded,
    polar_dual,
    prune_redundant,
    regular_simplex,
    remove_redundant_generators,
    simplex_contacts,
    volume,
)
from .harness import (
    BoundReport,
    FamilySpec,
    ReportRow,
    emit_report,
    generate_family,
    run_diameter_experiment,
    run_lowerbound_experiment,
    run_volume_experiment,
)
from .john import (
    AffineMap,
    JohnDecomposition,
    extract_contacts,
    max_inscribed_ellipsoid,
    min_enclosing_ellipsoid,
    normalize,
    recover_weights,
    validate_decomposition,
)
from .select import (
    BLExponents,
    SelectionResult,
    ThriftyResult,
    bl_exponents,
    caratheodory_reduce,
    certify_containment_factor,
    lifted_operator_audit,
    select_contact_subfamily,
    select_diameter_subfamily,
    select_volume_subfamily,
    thrifty_approximation,
)
from .sparsify import (
    SparseDecomposition,
    audit_sparsification,
    default_budget,
    epsilon_schedule,
    sparsify,
)

__all__ = [
    "AffineMap",
    "BLExponents",
    "BoundReport",
    "ContainmentCertificate",
    "Ellipsoid",
    "FamilySpec",
    "HPolytope",
    "JohnDecomposition",
    "ReportRow",
    "SelectionResult",
    "SparseDecomposition",
    "ThriftyResult",
    "VPolytope",
    "audit_sparsification",
    "bl_exponents",
    "caratheodory_reduce",
    "certify_containment_factor",
    "check_containment",
    "cross_polytope",
    "cross_polytope_vertices",
    "cube",
    "default_budget",
    "diameter",
    "emit_report",
    "enumerate_vertices",
    "epsilon_schedule",
    "extract_contacts",
    "gauge",
    "gauge_many",
    "generate_family",
    "is_bounded",
    "lifted_operator_audit",
    "max_inscribed_ellipsoid",
    "min_enclosing_ellipsoid",
    "normalize",
    "polar_dual",
    "prune_redundant",
    "recover_weights",
    "regular_simplex",
    "remove_redundant_generators",
    "run_diameter_experiment",
    "run_lowerbound_experiment",
    "run_volume_experiment",
    "select_contact_subfamily",
    "select_diameter_subfamily",
    "select_volume_subfamily",
    "simplex_contacts",
    "sparsify",
    "thrifty_approximation",
    "validate_decomposition",
    "volume",
]

__version__ = "0.1.0"
