"""Data containers and input featurisation for truncated Volterra models.

A model of order ``D`` and memory ``M`` with ``P`` inputs predicts each
output as a degree-``D`` polynomial in the lagged-input vector

    ``u_n = [1, u(n), u(n-1), ..., u(n-M+1)]``

of length ``I = P * M + 1``; the leading one makes every kernel order up to
``D`` expressible through a single weight vector of length ``I**D``.  That
weight vector is stored as a :class:`~volterra_tt.tt.TensorTrain` whose left
boundary rank is the output count.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tt import TensorTrain


@dataclass(frozen=True)
class TimeSeriesData:
    """Aligned input/output records of one experiment.

    ``inputs`` is ``(N, P)`` and ``outputs`` ``(N, L)``; one-dimensional
    arrays are accepted and treated as single channels.  ``role`` tags the
    intended use (train / validation / test) and has no behavioural effect.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    role: str = "train"

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        if np.asarray(self.inputs).ndim == 1:
            u = u.T
        if np.asarray(self.outputs).ndim == 1:
            y = y.T
        if u.shape[0] != y.shape[0]:
            raise ValueError(
                f"inputs and outputs disagree on sample count: "
                f"{u.shape[0]} vs {y.shape[0]}"
            )
        if u.shape[0] < 1:
            raise ValueError("need at least one sample")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise ValueError("inputs/outputs contain non-finite values")
        u.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "outputs", y)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.outputs.shape[1]


def lagged_input(data: TimeSeriesData, memory: int, n: int) -> np.ndarray:
    """Lagged-input vector ``[1, u(n), u(n-1), ..., u(n-memory+1)]``.

    Lags reaching before the start of the record are substituted by zero,
    so early samples are transient; metrics skip them.  For multiple input
    channels each lag contributes ``P`` consecutive entries.
    """
    if not 0 <= n < data.n_samples:
        raise ValueError(f"sample index {n} out of range")
    p = data.n_inputs
    out = np.zeros(p * memory + 1)
    out[0] = 1.0
    for m in range(memory):
        if n - m >= 0:
            out[1 + m * p : 1 + (m + 1) * p] = data.inputs[n - m]
    return out


def lagged_matrix(data: TimeSeriesData, memory: int) -> np.ndarray:
    """Stack :func:`lagged_input` for all samples into an ``(N, I)`` matrix."""
    n, p = data.inputs.shape
    out = np.zeros((n, p * memory + 1))
    out[:, 0] = 1.0
    for m in range(memory):
        out[m:, 1 + m * p : 1 + (m + 1) * p] = data.inputs[: n - m]
    return out


@dataclass(frozen=True)
class VolterraModel:
    """A tensor-train weight vector plus the structure it was built for.

    The train must have one core per model order, every core mode size equal
    to ``P * memory + 1`` and boundary ranks ``(n_outputs, 1)``.
    """

    tt: TensorTrain
    order: int
    memory: int
    n_inputs: int = 1
    n_outputs: int = 1

    def __post_init__(self):
        if self.order < 1 or self.memory < 1:
            raise ValueError("order and memory must be at least 1")
        if self.tt.order != self.order:
            raise ValueError(
                f"tensor train has {self.tt.order} cores, expected {self.order}"
            )
        expected = self.feature_size
        if any(i != expected for i in self.tt.mode_sizes):
            raise ValueError(
                f"core mode sizes {self.tt.mode_sizes} do not match "
                f"feature size {expected}"
            )
        if self.tt.n_outputs != self.n_outputs:
            raise ValueError(
                f"left boundary rank {self.tt.n_outputs} does not match "
                f"output count {self.n_outputs}"
            )

    @property
    def feature_size(self) -> int:
        """Length of the lagged-input vector, ``P * memory + 1``."""
        return self.n_inputs * self.memory + 1

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.tt.ranks

    def with_tt(self, tt: TensorTrain) -> "VolterraModel":
        return replace(self, tt=tt)

    def check_compatible(self, data: TimeSeriesData) -> None:
        if data.n_inputs != self.n_inputs or data.n_outputs != self.n_outputs:
            raise ValueError(
                f"data has {data.n_inputs} inputs / {data.n_outputs} outputs, "
                f"model expects {self.n_inputs} / {self.n_outputs}"
            )
