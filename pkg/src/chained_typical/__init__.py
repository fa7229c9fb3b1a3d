"""Chained typical sets for ergodic sources and chained typical projectors for lattice states."""

from .chained_sets import (
    BStarReport,
    ChainedFamily,
    best_band_start,
    build_chained_family,
    family_cardinality,
    k_epsilon,
    slice_mass,
    tighten_family,
    tune_band_start,
    verify_bstar,
)
from .coder import Codebook, RateReport, decode, encode, lz78_bits, pack_bits, rate_report, unpack_bits
from .estimators import ChainedTypicalProjectors, ChainedTypicalSets, TypicalSetCoder
from .exceptions import (
    ConfigError,
    ConstructionError,
    CorruptionError,
    DomainError,
    ResourceError,
    SelectionError,
    TighteningError,
    UnsupportedRangeError,
    ZeroOperatorError,
)
from .lattice import (
    LatticeState,
    block_density,
    choose_block_length,
    classical_markov,
    iid_product,
    induced_process,
    mean_entropy,
    rotated_classical,
    spectral_set,
)
from .process import (
    Alphabet,
    ProcessModel,
    block_process,
    empirical_entropy,
    entropy_rate,
    iid,
    marginal_prob,
    markov,
    sample_trajectory,
    sample_words,
    stationary_distribution,
)
from .projectors import ChainedProjectorFamily, QuantumReport, build_chained_projectors, verify_quantum
from .quantum_ops import (
    DensityOperator,
    Projector,
    SpectralSet,
    partial_trace,
    range_projector,
    spectral_projectors,
    von_neumann_entropy,
)

__version__ = "0.1.0"
