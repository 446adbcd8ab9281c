"""Algebraic phase retrieval for point-atom crystals (X-ray and neutron)."""

from .basis import (
    BasicSet,
    ObservedSet,
    compute_S1,
    j_matrix,
    principal_basic_set_from_geometry,
    search_basic_set,
)
from .crystal import (
    CrystalStructure,
    IntensitySet,
    PattersonMap,
    canonical,
    compute_patterson,
    observed_intensity,
    patterson_window,
    subtracted_intensity,
    synth_window,
)
from .errors import (
    AlgPhaseError,
    InconsistentDataError,
    MissingReflectionError,
    ReconstructionStall,
    SingularBasisError,
    WindowExhaustedError,
)
from .generate import generate_random_structure, random_patterson_map
from .inversion import (
    deconvolve_to_atoms,
    patterson_distance,
    recover_patterson,
    resolvent_from_zero,
    roots_on_unit_circle,
    structure_distance,
)
from .lattice import (
    JMatrix,
    KHMatrix,
    ShapeProfile,
    bezout_expansion,
    build_V,
    kh_det_closed_form,
    kh_matrix,
    numeric_det,
    numerical_rank,
    principal_vandermonde,
    shape_profile,
    vandermonde_det_closed_form,
)
from .pipeline import RunConfig, run_pipeline, run_structure
from .reconstruction import (
    Expander,
    check_consistency,
    completeness_sets,
    expansion_coefficients,
    extend_pattern,
    hull_rows,
)

__version__ = "0.1.0"
