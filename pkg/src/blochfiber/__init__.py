"""Fibered decomposition of lattice operators with a commuting shift symmetry.

The package decomposes lattice models into t-dependent q x q fiber
matrices over the torus (after verifying the wandering property of the
symmetry generators), diagonalizes finite abelian symmetry groups, and
computes the emergent topological data: band spectra, Fermi projectors,
and Chern numbers of the resulting sub-bundles.
"""

from .errors import (
    AliasingWarning,
    BasisMismatchError,
    BasisSizeError,
    BlochFiberError,
    ConfigError,
    GapTooSmallError,
    HopRangeError,
    InadmissiblePlaquetteError,
    InvalidFluxError,
    InvariantViolationError,
    NotCovariantError,
    WindowTooLargeError,
)
from .fibering import (
    CovariantOperator,
    FiberedSamples,
    TorusGrid,
    WanderingDecomposition,
    compose_covariant,
    covariant_from_lattice,
    fiber_field,
    fiber_operator,
    haar_moment_check,
    inverse_transform,
    module_norm,
    transform_vector,
)
from .finitegroup import (
    FiniteDecomposition,
    FiniteGroupRep,
    bf_projector,
    decompose_finite,
)
from .lattice import (
    EXACT_TOL,
    NUMERIC_TOL,
    LatticeOperator,
    TruncatedBasis,
    WanderingReport,
    commutator_norm,
    make_basis,
    masked_norm,
    seminorm_pm,
    unitary_defect,
    verify_wandering,
)
from .models import (
    ModelInstance,
    finite_group_model,
    hofstadter_model,
    mathieu_fiber_closed_form,
    mathieu_model,
    periodic_chain_model,
)
from .topology import (
    BandData,
    BerryData,
    band_spectrum,
    butterfly,
    chern_number,
    frame_continuity_check,
    gap_check,
    spectral_projector,
)

__version__ = "0.1.0"
