"""Truncated Volterra system identification in tensor-train form.

The package represents all Volterra kernels of a nonlinear discrete-time
model as one tensor train, trains it with alternating least squares, and
grows the model order and memory length incrementally: each increase step
reuses the trained model, costs a single core update, and contributes
predictions orthogonal to the current ones, which makes the marginal value
of a larger structure directly measurable.
"""

from .als import (
    AlsConfig,
    NumericalError,
    PartialContractions,
    als_core_update,
    als_run,
    build_core_design_matrix,
    partial_contractions,
    predict,
)
from .growth import (
    IncreaseOutcome,
    build_constraints_tt,
    canonicalize_insertion,
    dense_memory_constraints,
    dense_order_constraints,
    expand_cores_for_memory,
    increase_memory,
    increase_order,
    insert_qz_core,
    qz_core,
)
from .metrics import rmse, vaf
from .model import TimeSeriesData, VolterraModel, lagged_input, lagged_matrix
from .selection import (
    SelectionConfig,
    SelectionTrace,
    TraceRecord,
    auto_select,
    deterministic_init,
    grid_search,
    grow_to,
    random_init,
)
from .synth import SyntheticSystem, generate_synthetic
from .tt import (
    DENSE_GUARD_DEFAULT,
    SizeLimitError,
    TensorTrain,
    left_unfold,
    mode2_contract,
    reconstruct,
    right_unfold,
    shift_canonical,
    tt_norm,
    vec,
)

__version__ = "0.1.0"
