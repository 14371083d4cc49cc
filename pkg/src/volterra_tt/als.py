"""Prediction and alternating least-squares training of Volterra trains.

Predictions chain mode-2 contractions of each core with the lagged-input
vector, costing ``O(N * D * I * R**2)`` instead of touching the ``I**D``
dense weight vector.  Training updates one core at a time: with the train in
site-``d`` mixed-canonical form the map from the vectorised site core to the
stacked predictions is the design matrix with rows

    ``omega_right(n)^T (x) u_n^T (x) omega_left(n)[l, :]``

where the omegas are the partial contractions of the orthogonalised cores
left and right of the site.  Each update solves a small minimum-norm least
squares problem, so the training residual can never increase.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import TimeSeriesData, VolterraModel, lagged_matrix
from .tt import shift_canonical, unvec, vec

logger = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    """A linear solve produced non-finite values."""


@dataclass(frozen=True)
class AlsConfig:
    """Solver knobs for the core updates.

    ridge : Tikhonov weight added to each core solve (0 disables it; the
        reference experiments all run unregularised).
    solver_tolerance : relative singular-value cutoff of the minimum-norm
        least-squares solve.
    sweep_direction_start : whether a run first moves toward core 0
        ("left") or toward the last core ("right").
    """

    ridge: float = 0.0
    solver_tolerance: float = 1e-12
    sweep_direction_start: str = "left"

    def __post_init__(self):
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if self.sweep_direction_start not in ("left", "right"):
            raise ValueError("sweep_direction_start must be 'left' or 'right'")


@dataclass(frozen=True)
class PartialContractions:
    """Per-sample contractions of the cores beside a site.

    ``omega_left`` is ``(N, L, R_d)``: the chained contraction of cores left
    of the site (the identity for site 0).  ``omega_right`` is
    ``(N, R_{d+1})``: the chain of cores right of the site (ones for the
    last site).
    """

    omega_left: np.ndarray
    omega_right: np.ndarray


def _core_contractions(model: VolterraModel, features: np.ndarray) -> list[np.ndarray]:
    """Mode-2 contraction of every core with every sample's feature row."""
    return [
        np.einsum("ris,ni->nrs", core, features) for core in model.tt.cores
    ]


def partial_contractions(
    model: VolterraModel, data: TimeSeriesData, site: int
) -> PartialContractions:
    """Compute the left/right chains around ``site`` for every sample."""
    model.check_compatible(data)
    features = lagged_matrix(data, model.memory)
    contractions = _core_contractions(model, features)
    n = data.n_samples
    l = model.n_outputs

    left = np.broadcast_to(np.eye(l), (n, l, l)).copy()
    for k in range(site):
        left = np.einsum("nlr,nrs->nls", left, contractions[k])

    right = np.ones((n, 1))
    for k in range(model.order - 1, site, -1):
        right = np.einsum("nrs,ns->nr", contractions[k], right)

    return PartialContractions(omega_left=left, omega_right=right)


def predict(model: VolterraModel, data: TimeSeriesData) -> np.ndarray:
    """Model outputs for every sample, shape ``(N, L)``."""
    model.check_compatible(data)
    features = lagged_matrix(data, model.memory)
    contractions = _core_contractions(model, features)
    acc = contractions[0]
    for t in contractions[1:]:
        acc = np.einsum("nlr,nrs->nls", acc, t)
    return acc[:, :, 0]


def _stacked_outputs(data: TimeSeriesData) -> np.ndarray:
    # Row layout matches the design matrix: sample index fastest per output.
    return data.outputs.reshape(-1, order="F")


def build_core_design_matrix(
    model: VolterraModel, data: TimeSeriesData, site: int
) -> np.ndarray:
    """Design matrix of the site-core least-squares problem.

    Shape ``(N * L, R_d * I * R_{d+1})``; multiplying it with the vectorised
    site core reproduces the stacked predictions exactly.  Requires the
    train to be canonical at ``site`` so that the columns form an
    orthonormal frame.
    """
    if model.tt.canonical_site != site:
        raise ValueError(
            f"train is canonical at {model.tt.canonical_site}, "
            f"the design matrix requires site {site}"
        )
    pc = partial_contractions(model, data, site)
    features = lagged_matrix(data, model.memory)
    n, l = data.n_samples, model.n_outputs
    rl, i, rr = model.tt.cores[site].shape
    g = np.einsum("nlr,ni,ns->lnsir", pc.omega_left, features, pc.omega_right)
    return np.ascontiguousarray(g.reshape(l * n, rr * i * rl))


def _min_norm_solve(
    matrix: np.ndarray, target: np.ndarray, cfg: AlsConfig
) -> np.ndarray:
    if cfg.ridge > 0:
        k = matrix.shape[1]
        matrix = np.vstack([matrix, np.sqrt(cfg.ridge) * np.eye(k)])
        target = np.concatenate([target, np.zeros(k)])
    solution, _, _, _ = np.linalg.lstsq(matrix, target, rcond=cfg.solver_tolerance)
    if not np.all(np.isfinite(solution)):
        raise NumericalError(
            "core update produced non-finite coefficients "
            f"(design shape {matrix.shape}, "
            f"target norm {np.linalg.norm(target):.3e})"
        )
    return solution


def _update_core(
    model: VolterraModel, data: TimeSeriesData, site: int, cfg: AlsConfig
) -> tuple[VolterraModel, float]:
    """Solve the site-core problem; returns the model and its new residual."""
    design = build_core_design_matrix(model, data, site)
    target = _stacked_outputs(data)
    solution = _min_norm_solve(design, target, cfg)
    residual = float(np.linalg.norm(target - design @ solution))
    core = unvec(solution, model.tt.cores[site].shape)
    return model.with_tt(model.tt.replace_core(site, core)), residual


def als_core_update(
    model: VolterraModel,
    data: TimeSeriesData,
    site: int,
    cfg: AlsConfig = AlsConfig(),
) -> VolterraModel:
    """Replace the site core by the minimum-norm solution of its LS problem."""
    updated, _ = _update_core(model, data, site, cfg)
    return updated


def _zigzag_sites(start: int, n_cores: int, steps: int, direction: str):
    """Site visit order bouncing between the first and last core."""
    site = start
    move = -1 if direction == "left" else 1
    for _ in range(steps):
        yield site
        if n_cores == 1:
            continue
        if site + move < 0 or site + move >= n_cores:
            move = -move
        site += move


def als_run(
    model: VolterraModel,
    data: TimeSeriesData,
    num_core_updates: int,
    cfg: AlsConfig = AlsConfig(),
) -> tuple[VolterraModel, np.ndarray]:
    """Run a number of single-core updates in zig-zag order.

    Starts at the current canonical site (the last core when the train has
    no site yet) and first moves in ``cfg.sweep_direction_start``.  Each
    step re-canonicalises to the next site and solves its core problem, so
    the returned residual history is non-increasing up to round-off.  After
    the run the canonical site is the last updated core.
    """
    if num_core_updates < 0:
        raise ValueError("num_core_updates must be non-negative")
    if num_core_updates == 0:
        return model, np.zeros(0)
    start = model.tt.canonical_site
    if start is None:
        start = model.order - 1
    history = np.zeros(num_core_updates)
    for step, site in enumerate(
        _zigzag_sites(start, model.order, num_core_updates, cfg.sweep_direction_start)
    ):
        model = model.with_tt(shift_canonical(model.tt, site))
        model, residual = _update_core(model, data, site, cfg)
        history[step] = residual
    return model, history
