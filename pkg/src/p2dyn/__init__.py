"""Numerical ergodic-theory laboratory for endomorphisms of the projective plane.

The package builds holomorphic self-maps of P^2 from homogeneous polynomial
triples and measures their equilibrium dynamics: escape-rate potentials,
backward-orbit sampling of the measure of maximal entropy, Lyapunov
exponents, expansion-adapted tangent frames, directional mass exponents of
the Green currents, and entropy statistics.  The ``verify`` harness turns
those measurements into a battery of dimension inequalities with explicit
finite-accuracy corrections.
"""

from __future__ import annotations

from .errors import (
    ConfigError,
    CorrectionDomainError,
    CriticalPointError,
    DegenerateEvaluationError,
    DegenerateMapError,
    FrameError,
    OrbitInvariantError,
    P2DynError,
    PreimageSolverError,
    ResolutionError,
    SamplingError,
)
from .frames import (
    NormalFormCoordinates,
    OseledecFrame,
    PullbackScaling,
    compute_frame,
    default_coordinates,
    pullback_scaling_check,
    resonance_detect,
    transport_frame,
)
from .green import (
    GreenEvaluator,
    chart_potential,
    escape_rate,
    green_value,
    local_potential,
)
from .preimages import (
    PreimageRoot,
    PreimageSet,
    preimage_batch,
    preimages,
    random_inverse_branch,
    random_preimage_batch,
)
from .projective import (
    ChartDifferential,
    ChartPoint,
    HomogeneousMap,
    HomogeneousPoint,
    TangentVector,
    chart_differential,
    fs_distance,
    injectivity_radius,
)
from .sampler import (
    BackwardOrbit,
    ContractionDiagnostic,
    ExponentEstimate,
    MeasureSample,
    backward_orbit,
    contraction_diagnostic,
    fs_jacobian_dets,
    fs_tangent_maps,
    lyapunov_exponents,
    sample_equilibrium,
    tangent_basis_batch,
    write_csv,
)
from .slices import (
    LocalGrid,
    MassCertificate,
    SliceMeasure,
    axis_chart,
    ball_mass,
    calibration_mass,
    harmonicity_defect,
    mass_certificate,
    positivity_check,
    slice_csv,
    slice_measure,
    slice_summary,
    trace_measure,
)
from .zoo import (
    MapFamily,
    certify_nondegenerate,
    family_by_name,
    parse_map,
    perturb,
    serialize_map,
    standard_zoo,
)

__version__ = "0.1.0"

__all__ = [
    "BackwardOrbit",
    "ChartDifferential",
    "ChartPoint",
    "ConfigError",
    "ContractionDiagnostic",
    "CorrectionDomainError",
    "CriticalPointError",
    "DegenerateEvaluationError",
    "DegenerateMapError",
    "ExponentEstimate",
    "FrameError",
    "GreenEvaluator",
    "HomogeneousMap",
    "HomogeneousPoint",
    "MapFamily",
    "MeasureSample",
    "NormalFormCoordinates",
    "OrbitInvariantError",
    "OseledecFrame",
    "LocalGrid",
    "MassCertificate",
    "P2DynError",
    "PreimageRoot",
    "PreimageSet",
    "PreimageSolverError",
    "PullbackScaling",
    "ResolutionError",
    "SamplingError",
    "SliceMeasure",
    "TangentVector",
    "axis_chart",
    "backward_orbit",
    "ball_mass",
    "calibration_mass",
    "certify_nondegenerate",
    "chart_differential",
    "chart_potential",
    "compute_frame",
    "contraction_diagnostic",
    "default_coordinates",
    "escape_rate",
    "family_by_name",
    "fs_distance",
    "fs_jacobian_dets",
    "fs_tangent_maps",
    "green_value",
    "harmonicity_defect",
    "injectivity_radius",
    "local_potential",
    "lyapunov_exponents",
    "mass_certificate",
    "parse_map",
    "perturb",
    "positivity_check",
    "preimage_batch",
    "preimages",
    "pullback_scaling_check",
    "random_inverse_branch",
    "random_preimage_batch",
    "resonance_detect",
    "sample_equilibrium",
    "serialize_map",
    "slice_csv",
    "slice_measure",
    "slice_summary",
    "standard_zoo",
    "tangent_basis_batch",
    "trace_measure",
    "transport_frame",
    "write_csv",
    "__version__",
]
