"""Model-structure selection: initialisation, grid search and auto growth.

A selection run owns one growth path per memory value: a deterministic
order-2 model is built from a dense least-squares solve, and the order is
raised step by step, alternating a fixed budget of single-core updates
("sweeps") with one structure increase.  The grid search records every
visited structure and picks the one with the lowest validation error; the
automatic variant instead tries an order and a memory increase at every
step and keeps whichever residual model captures more output variance,
walking a single path through the structure grid.

All entry points are deterministic given their configuration and seed.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .als import AlsConfig, als_run, predict
from .growth import IncreaseOutcome, increase_memory, increase_order
from .metrics import rmse, vaf
from .model import TimeSeriesData, VolterraModel, lagged_matrix
from .tt import (
    DENSE_GUARD_DEFAULT,
    SizeLimitError,
    TensorTrain,
    shift_canonical,
    tt_norm,
    unvec,
)

__all__ = [
    "SelectionConfig",
    "TraceRecord",
    "SelectionTrace",
    "deterministic_init",
    "random_init",
    "grow_to",
    "grid_search",
    "auto_select",
]


@dataclass(frozen=True)
class SelectionConfig:
    """Search space and budgets for structure selection.

    ``order_range`` and ``memory_range`` are inclusive ``(low, high)``
    bounds; ``sweeps`` is the number of single-core updates run between
    consecutive increases.  ``accept_threshold`` is the residual-VAF floor
    below which the automatic selection rejects an increase.
    """

    order_range: tuple[int, int]
    memory_range: tuple[int, int]
    rank: int
    sweeps: int = 3
    init: str = "deterministic"
    seed: int = 0
    accept_threshold: float = 1e-4
    memory_step: int = 1
    als: AlsConfig = field(default_factory=AlsConfig)

    def __post_init__(self):
        if self.order_range[0] > self.order_range[1]:
            raise ValueError("empty order range")
        if self.memory_range[0] > self.memory_range[1]:
            raise ValueError("empty memory range")
        if self.order_range[0] < 2:
            raise ValueError("order range must start at 2 or above")
        if self.sweeps < 0:
            raise ValueError("sweeps must be non-negative")
        if self.rank < 1 or self.memory_step < 1:
            raise ValueError("rank and memory_step must be at least 1")
        if self.init not in ("deterministic", "random"):
            raise ValueError("init must be 'deterministic' or 'random'")


@dataclass(frozen=True)
class TraceRecord:
    """Metrics of one evaluated structure."""

    order: int
    memory: int
    sweeps_used: int
    rmse_train: float
    rmse_val: float
    vaf_residual: float
    weight_norm: float
    wall_time_s: float


@dataclass(frozen=True)
class SelectionTrace:
    """Ordered log of evaluated structures plus the chosen one."""

    records: tuple[TraceRecord, ...]
    chosen: tuple[int, int, int]  # (order, memory, sweeps)

    def record_for(self, order: int, memory: int) -> TraceRecord:
        for rec in self.records:
            if rec.order == order and rec.memory == memory:
                return rec
        raise KeyError(f"no record for structure ({order}, {memory})")


def deterministic_init(
    data: TimeSeriesData,
    memory: int,
    rank: int,
    cfg: AlsConfig = AlsConfig(),
    max_entries: int = DENSE_GUARD_DEFAULT,
) -> VolterraModel:
    """Deterministic order-2 model from a dense least-squares solve.

    Solves the order-2 problem exactly (minimum norm), reshapes the weight
    vector into a matrix and truncates its SVD to the requested rank; the
    two factors become the cores of a site-0 canonical train.  Repeated
    calls are bit-identical.
    """
    n, p, l = data.n_samples, data.n_inputs, data.n_outputs
    i = p * memory + 1
    if n * i * i > max_entries:
        raise SizeLimitError(
            f"dense order-2 design needs {n * i * i} entries "
            f"(guard: {max_entries}); use random_init instead"
        )
    if n < i * i:
        warnings.warn(
            f"{n} samples for {i * i} order-2 weights; "
            "the initial solve is rank-deficient",
            stacklevel=2,
        )
    u1 = lagged_matrix(data, memory)
    u2 = np.einsum("ni,nj->nij", u1, u1).reshape(n, i * i)
    weights, _, _, _ = np.linalg.lstsq(u2, data.outputs, rcond=cfg.solver_tolerance)
    kernel = np.moveaxis(weights.reshape(i, i, l, order="F"), 2, 0)
    matrix = kernel.reshape(l * i, i, order="F")
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    r = max(1, min(rank, s.size))
    core1 = (u[:, :r] * s[:r]).reshape(l, i, r, order="F")
    core2 = vt[:r][:, :, None]
    tt = TensorTrain([core1, core2], canonical_site=0)
    return VolterraModel(tt=tt, order=2, memory=memory, n_inputs=p, n_outputs=l)


def random_init(
    memory: int,
    rank: int,
    order: int,
    seed: int,
    n_inputs: int = 1,
    n_outputs: int = 1,
) -> VolterraModel:
    """Seeded standard-normal cores, canonicalised at the last core."""
    rng = np.random.default_rng(seed)
    i = n_inputs * memory + 1
    ranks = [n_outputs] + [rank] * (order - 1) + [1]
    cores = [
        rng.standard_normal((ranks[d], i, ranks[d + 1])) for d in range(order)
    ]
    tt = shift_canonical(TensorTrain(cores), order - 1)
    return VolterraModel(
        tt=tt, order=order, memory=memory, n_inputs=n_inputs, n_outputs=n_outputs
    )


def _at_last_core(model: VolterraModel) -> VolterraModel:
    return model.with_tt(shift_canonical(model.tt, model.order - 1))


def _initial_model(data: TimeSeriesData, memory: int, cfg: SelectionConfig) -> VolterraModel:
    if cfg.init == "deterministic":
        return deterministic_init(data, memory, cfg.rank, cfg.als)
    return random_init(
        memory,
        cfg.rank,
        order=2,
        seed=cfg.seed,
        n_inputs=data.n_inputs,
        n_outputs=data.n_outputs,
    )


def _metrics_skip(memory: int, n_samples: int) -> int:
    return min(max(memory - 1, 0), n_samples - 1)


def _grow_path(
    model: VolterraModel,
    train: TimeSeriesData,
    val: TimeSeriesData | None,
    target_order: int,
    record_from: int,
    cfg: SelectionConfig,
    skip: int,
) -> tuple[VolterraModel, list[TraceRecord]]:
    """Alternate sweep budgets and order increases, recording per order.

    Increases are performed at the last core so the inserted core inherits
    an interior rank and the chain stays uniform.
    """
    records: list[TraceRecord] = []
    vaf_residual = float("nan")
    t0 = time.perf_counter()
    for order in range(model.order, target_order + 1):
        model = _at_last_core(model)
        model, _ = als_run(model, train, cfg.sweeps, cfg.als)
        if order >= record_from:
            skip_train = min(skip, train.n_samples - 1)
            records.append(
                TraceRecord(
                    order=order,
                    memory=model.memory,
                    sweeps_used=cfg.sweeps,
                    rmse_train=rmse(train.outputs, predict(model, train), skip_train),
                    rmse_val=(
                        rmse(
                            val.outputs,
                            predict(model, val),
                            min(skip, val.n_samples - 1),
                        )
                        if val is not None
                        else float("nan")
                    ),
                    vaf_residual=vaf_residual,
                    weight_norm=tt_norm(model.tt),
                    wall_time_s=time.perf_counter() - t0,
                )
            )
        if order < target_order:
            model = _at_last_core(model)
            outcome = increase_order(model, train, cfg.als)
            model = outcome.model_after
            vaf_residual = outcome.residual_vaf
    return model, records


def grow_to(
    model: VolterraModel,
    data: TimeSeriesData,
    target_order: int,
    cfg: SelectionConfig,
) -> tuple[VolterraModel, SelectionTrace]:
    """Raise a trained model's order to ``target_order`` on one data set."""
    if target_order < model.order:
        raise ValueError(
            f"target order {target_order} below current order {model.order}"
        )
    skip = _metrics_skip(model.memory, data.n_samples)
    model, records = _grow_path(
        model, data, None, target_order, model.order, cfg, skip
    )
    trace = SelectionTrace(
        records=tuple(records),
        chosen=(model.order, model.memory, cfg.sweeps),
    )
    return model, trace


def grid_search(
    train: TimeSeriesData,
    val: TimeSeriesData,
    cfg: SelectionConfig,
) -> SelectionTrace:
    """Exhaustive search over the order/memory grid via one path per memory.

    Every memory value gets its own deterministic initialisation and grows
    through the full order range; validation RMSE and the weight norm are
    recorded at every structure.  The chosen structure minimises the
    validation RMSE, with ties resolved toward the smaller structure.
    """
    d_lo, d_hi = cfg.order_range
    m_lo, m_hi = cfg.memory_range
    skip = _metrics_skip(m_hi, min(train.n_samples, val.n_samples))
    records: list[TraceRecord] = []
    for memory in range(m_lo, m_hi + 1, cfg.memory_step):
        model = _initial_model(train, memory, cfg)
        _, path_records = _grow_path(model, train, val, d_hi, d_lo, cfg, skip)
        records.extend(path_records)
    best = min(records, key=lambda r: (r.rmse_val, r.order, r.memory))
    return SelectionTrace(
        records=tuple(records),
        chosen=(best.order, best.memory, cfg.sweeps),
    )


def auto_select(
    train: TimeSeriesData,
    val: TimeSeriesData | None,
    cfg: SelectionConfig,
) -> SelectionTrace:
    """Walk one path through the structure grid, growing order or memory.

    Starting from the smallest structure, each step tentatively increases
    the order and the memory from the current model and keeps whichever
    residual model accounts for more training-output variance, provided it
    clears the acceptance threshold and stays within the ranges; ties go to
    the cheaper order increase.  The walk stops when both candidates are
    rejected or out of range.
    """
    skip = _metrics_skip(cfg.memory_range[1], train.n_samples)
    t0 = time.perf_counter()
    model = _initial_model(train, cfg.memory_range[0], cfg)
    model = _at_last_core(model)
    model, _ = als_run(model, train, cfg.sweeps, cfg.als)

    def make_record(vaf_residual: float) -> TraceRecord:
        skip_train = min(skip, train.n_samples - 1)
        return TraceRecord(
            order=model.order,
            memory=model.memory,
            sweeps_used=cfg.sweeps,
            rmse_train=rmse(train.outputs, predict(model, train), skip_train),
            rmse_val=(
                rmse(val.outputs, predict(model, val), min(skip, val.n_samples - 1))
                if val is not None
                else float("nan")
            ),
            vaf_residual=vaf_residual,
            weight_norm=tt_norm(model.tt),
            wall_time_s=time.perf_counter() - t0,
        )

    records = [make_record(float("nan"))]
    while True:
        base = _at_last_core(model)
        candidates: list[IncreaseOutcome] = []
        if base.order + 1 <= cfg.order_range[1]:
            candidates.append(increase_order(base, train, cfg.als))
        if base.memory + cfg.memory_step <= cfg.memory_range[1]:
            candidates.append(increase_memory(base, train, cfg.memory_step, cfg.als))
        eligible = [c for c in candidates if c.residual_vaf >= cfg.accept_threshold]
        if not eligible:
            break
        best = eligible[0]
        for cand in eligible[1:]:
            if cand.residual_vaf > best.residual_vaf:
                best = cand
        best = best.mark_accepted()
        model = best.model_after
        model, _ = als_run(model, train, cfg.sweeps, cfg.als)
        records.append(make_record(best.residual_vaf))
    return SelectionTrace(
        records=tuple(records),
        chosen=(model.order, model.memory, cfg.sweeps),
    )
