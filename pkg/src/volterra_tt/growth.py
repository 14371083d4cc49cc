"""Incremental growth of model order and memory in tensor-train form.

Raising the order of a trained model by one is done without retraining from
scratch: a structured core whose first lateral slice is the identity and
whose remaining slices are zero is inserted immediately left of the
canonical site.  Contracted with any lagged-input vector (which starts with
a constant one) that core acts as the identity, so the enlarged train
predicts exactly what the old one did.  One LQ step moves the canonical
site onto the inserted core; its only non-zero slice then carries the old
site core's triangular factor, which is precisely the solution of the
order-``D+1`` core problem under zero constraints on all new interaction
terms.  Lifting those constraints - a single ordinary core update - fits
the enlarged model, and because the constrained solution was optimal for
the old structure the added predictions are orthogonal to the old ones and
model the old residual.

Growing the memory appends zero slices for the new lags to every core,
again leaving predictions untouched; one core update per core then refits
the enlarged structure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .als import (
    AlsConfig,
    _min_norm_solve,
    _stacked_outputs,
    als_run,
    build_core_design_matrix,
    predict,
)
from .model import TimeSeriesData, VolterraModel
from .tt import SizeLimitError, TensorTrain, shift_canonical, unvec, vec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IncreaseOutcome:
    """Record of one structure-increase step.

    ``y_base`` are the training predictions before the refit, ``y_delta``
    the change contributed by the refit; for an order increase the two are
    orthogonal up to solver accuracy and sum to the new predictions.
    ``residual_vaf`` is the fraction of output variance captured by
    ``y_delta`` (averaged over outputs), the signal used to accept or
    reject the step.
    """

    model_after: VolterraModel
    y_base: np.ndarray
    y_delta: np.ndarray
    residual_vaf: float
    kind: str
    accepted: bool = False

    def mark_accepted(self) -> "IncreaseOutcome":
        return replace(self, accepted=True)


def qz_core(rank: int, mode_size: int) -> np.ndarray:
    """Core with identity first slice and zero remaining slices.

    Contracting it with any vector ``v`` along the mode dimension yields
    ``v[0] * I``, so inserting it into a train whose features start with a
    constant one leaves the input-output map unchanged.
    """
    core = np.zeros((rank, mode_size, rank))
    core[:, 0, :] = np.eye(rank)
    return core


def _residual_vaf(y: np.ndarray, y_delta: np.ndarray) -> float:
    vy = y.var(axis=0)
    if np.any(vy <= 0):
        raise ValueError("outputs have zero variance; residual VAF undefined")
    return float(np.mean(y_delta.var(axis=0) / vy))


def _scaled_cross(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a) * np.linalg.norm(b), 1e-300)
    return float(abs(np.vdot(a, b)) / denom)


def insert_qz_core(model: VolterraModel, position: int | None = None) -> VolterraModel:
    """Insert the identity-slice core immediately left of the site core.

    The model must be in canonical form; the inserted core takes over the
    site's left rank, the order grows by one and predictions on any data
    set are unchanged.  The returned train is canonical at the old site
    core's new position (one step to the right).
    """
    site = model.tt.canonical_site
    if site is None:
        raise ValueError("model must be in canonical form before insertion")
    if position is None:
        position = site
    if position != site:
        raise ValueError(
            f"insertion happens at the canonical site ({site}), got {position}"
        )
    rank = model.tt.cores[site].shape[0]
    cores = list(model.tt.cores)
    cores.insert(site, qz_core(rank, model.feature_size))
    tt = TensorTrain(cores, canonical_site=site + 1)
    return replace(model, tt=tt, order=model.order + 1)


def canonicalize_insertion(model: VolterraModel) -> VolterraModel:
    """Move the canonical site onto the freshly inserted core.

    One LQ step of the old site core absorbs its triangular factor into the
    first slice of the inserted core, which thereby becomes the solution of
    the enlarged core problem under zero constraints on the new terms.
    """
    site = model.tt.canonical_site
    if site is None or site == 0:
        raise ValueError("expected the output of insert_qz_core")
    return model.with_tt(shift_canonical(model.tt, site - 1))


def increase_order(
    model: VolterraModel,
    data: TimeSeriesData,
    cfg: AlsConfig = AlsConfig(),
) -> IncreaseOutcome:
    """Grow the model order by one with a single core update.

    Records the base predictions, inserts and canonicalises the structured
    core, then solves the unconstrained core problem at the insertion site.
    The delta predictions are computed from the difference of the two core
    vectors through the shared orthonormal frame, so no second train has to
    be built.
    """
    y_base = predict(model, data)
    enlarged = canonicalize_insertion(insert_qz_core(model))
    site = enlarged.tt.canonical_site
    constrained = vec(enlarged.tt.cores[site])

    design = build_core_design_matrix(enlarged, data, site)
    target = _stacked_outputs(data)
    solution = _min_norm_solve(design, target, cfg)
    updated = enlarged.with_tt(
        enlarged.tt.replace_core(site, unvec(solution, enlarged.tt.cores[site].shape))
    )

    delta_stacked = design @ (solution - constrained)
    y_delta = delta_stacked.reshape(data.n_samples, model.n_outputs, order="F")
    logger.debug(
        "order increase %d -> %d: scaled <y_base, y_delta> = %.3e",
        model.order,
        model.order + 1,
        _scaled_cross(y_base.reshape(-1), y_delta.reshape(-1)),
    )
    return IncreaseOutcome(
        model_after=updated,
        y_base=y_base,
        y_delta=y_delta,
        residual_vaf=_residual_vaf(data.outputs, y_delta),
        kind="order",
    )


def expand_cores_for_memory(model: VolterraModel, m_delta: int) -> VolterraModel:
    """Append zero slices for ``m_delta`` new lags to every core.

    The new slices sit after the existing lags, matching the lagged-input
    layout; orthogonality of the cores and hence the canonical site are
    preserved, and predictions are unchanged until a refit touches the new
    entries.
    """
    if m_delta < 0:
        raise ValueError("m_delta must be non-negative")
    if m_delta == 0:
        return model
    extra = model.n_inputs * m_delta
    cores = [
        np.concatenate([c, np.zeros((c.shape[0], extra, c.shape[2]))], axis=1)
        for c in model.tt.cores
    ]
    tt = TensorTrain(cores, canonical_site=model.tt.canonical_site)
    return replace(model, tt=tt, memory=model.memory + m_delta)


def increase_memory(
    model: VolterraModel,
    data: TimeSeriesData,
    m_delta: int,
    cfg: AlsConfig = AlsConfig(),
) -> IncreaseOutcome:
    """Grow the memory length by ``m_delta`` and refit with one update per core.

    The first update happens at the canonical site, where the zero-padded
    core is the constrained solution of the enlarged problem; the remaining
    cores follow in zig-zag order.  ``y_delta`` is the post-refit minus the
    pre-refit predictions.
    """
    y_base = predict(model, data)
    if m_delta == 0:
        return IncreaseOutcome(
            model_after=model,
            y_base=y_base,
            y_delta=np.zeros_like(y_base),
            residual_vaf=0.0,
            kind="memory",
        )
    expanded = expand_cores_for_memory(model, m_delta)
    refitted, _ = als_run(expanded, data, num_core_updates=model.order, cfg=cfg)
    y_after = predict(refitted, data)
    y_delta = y_after - y_base
    logger.debug(
        "memory increase %d -> %d: scaled <y_base, y_delta> = %.3e",
        model.memory,
        model.memory + m_delta,
        _scaled_cross(y_base.reshape(-1), y_delta.reshape(-1)),
    )
    return IncreaseOutcome(
        model_after=refitted,
        y_base=y_base,
        y_delta=y_delta,
        residual_vaf=_residual_vaf(data.outputs, y_delta),
        kind="memory",
    )


def build_constraints_tt(rank: int, mode_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Constraint row pattern and nullspace basis for one core.

    ``C_tt`` marks the lag entries of a vectorised ``(rank, mode_size,
    rank)`` core, ``Z_tt`` spans the complementary first-slice entries with
    orthonormal basis-vector columns; ``C_tt @ Z_tt`` vanishes identically.
    """
    if rank < 1 or mode_size < 2:
        raise ValueError("need rank >= 1 and mode_size >= 2")
    selector = np.concatenate([[0.0], np.ones(mode_size - 1)])[None, :]
    first = np.zeros((mode_size, 1))
    first[0, 0] = 1.0
    if rank == 1:
        return selector, first
    eye = np.eye(rank)
    c_tt = np.kron(eye, np.kron(selector, eye))
    z_tt = np.kron(eye, np.kron(first, eye))
    return c_tt, z_tt


def _basis_from_indicator(indicator: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    size = indicator.size
    eye = np.eye(size)
    constrained = np.flatnonzero(indicator == 1)
    free = np.flatnonzero(indicator == 0)
    return eye[constrained, :], eye[:, free]


def dense_order_constraints(
    order: int,
    mode_size: int,
    slot: int,
    max_entries: int = 200_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Dense constraint matrix and nullspace basis for an order increase.

    Test support: builds the full ``mode_size**(order+1)`` indicator marking
    every weight created by the extra input factor, with ``slot`` factors of
    the Kronecker chain to its left.  Rows of ``C`` are the standard basis
    vectors at marked positions, columns of ``Z`` those at free positions;
    multiplying the enlarged input matrix with ``Z`` recovers the original
    one.
    """
    if not 0 <= slot <= order:
        raise ValueError(f"slot must be in [0, {order}]")
    total = mode_size ** (order + 1)
    if total > max_entries:
        raise SizeLimitError(f"{total} dense entries exceed guard {max_entries}")
    marked = np.ones(mode_size)
    marked[0] = 0.0
    indicator = np.kron(
        np.ones(mode_size**slot),
        np.kron(marked, np.ones(mode_size ** (order - slot))),
    )
    return _basis_from_indicator(indicator)


def dense_memory_constraints(
    order: int,
    mode_size: int,
    m_delta: int,
    n_inputs: int = 1,
    max_entries: int = 200_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Dense constraint matrix and nullspace basis for a memory increase.

    Test support: the per-factor indicator is zero on the existing entries
    and one on the appended lag entries; a weight of the enlarged model is
    constrained when any factor hits a new lag.
    """
    extra = n_inputs * m_delta
    enlarged = mode_size + extra
    total = enlarged**order
    if total > max_entries:
        raise SizeLimitError(f"{total} dense entries exceed guard {max_entries}")
    per_factor = np.concatenate([np.zeros(mode_size), np.ones(extra)])
    # a weight is marked when any of its factors hits a new lag
    flag = np.zeros(1)
    for _ in range(order):
        flag = np.kron(flag, np.ones(enlarged)) + np.kron(np.ones(flag.size), per_factor)
    indicator = (flag > 0).astype(float)
    return _basis_from_indicator(indicator)
