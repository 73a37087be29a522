"""Irregularity-aware graph Fourier transforms with spectral folding, and
bandlimited interpolation of sampled graph signals."""
from .errors import (
    ConvergenceError,
    EmptyBandError,
    InadmissiblePartitionError,
    NotPositiveDefiniteError,
    NumericalError,
    ResidualError,
    SfgftError,
)
from .gft import (
    SpectralFoldingGft,
    build_gft,
    build_q,
    forward,
    inverse,
    q_inner,
    verify_spectral_folding,
)
from .graph import (
    Graph,
    VertexPartition,
    build_knn_graph,
    check_partition_admissible,
    degree_table,
    laplacian,
    principal_submatrix,
)
from .interp import (
    Method,
    SampledSignal,
    baseline_basis,
    brute_force_oracle,
    interpolate_bl_ls,
    interpolate_sf,
    objective_value,
)
from .spectral import EigenDecomposition, cholesky_lower, generalized_sym_eig, sym_eig

__version__ = "0.1.0"
