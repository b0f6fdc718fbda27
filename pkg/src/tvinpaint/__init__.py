"""1-D total-variation signal inpainting.

Reconstructs damaged gray-scale signals by alternating minimization of a
relaxed TV energy: a weighted linear inner solve (continuous P1 finite
elements or interior-penalty discontinuous Galerkin) alternates with a
clamped inverse-gradient weight update.
"""

from .core import (
    BrokenFunction,
    DamagedRegion,
    Mesh,
    NodalFunction,
    ObservedSignal,
    SolveParams,
    WeightField,
    build_mesh,
    rasterize_mask,
    resample_signal,
)
from .dg import (
    FaceMatrices,
    dg_assemble,
    dg_boundary_matrices,
    dg_face_matrices,
    dg_solve_step,
    dg_volume_matrix,
    jump_and_average,
)
from .driver import (
    BackendComparison,
    IterationRecord,
    IterationTrace,
    RunConfig,
    compare_backends,
    iterations_to_converge,
    run_alternating,
)
from .energy import (
    EnergyReport,
    element_gradients,
    surrogate_energy,
    tv_energy,
    update_weight,
    update_weight_relaxed,
)
from .fem import fem_assemble, fem_element_load, fem_element_matrix, fem_solve_step
from .linsolve import (
    BlockTridiagonalSystem,
    DenseSystem,
    SingularSystemError,
    TridiagonalSystem,
    block_thomas_solve,
    dense_solve,
    thomas_solve,
)

__version__ = "0.1.0"
