"""Synthetic single-channel Volterra systems for benchmarks and tests.

The generator draws a bank of exponentially decaying feature columns and
sums their order-``D`` outer powers into a symmetric kernel of low effective
rank.  Because the kernel is a sum of rank-one powers, simulation reduces to
``y = sum_i (U a_i) ** D`` and never materialises the ``I**D`` weight
vector; the dense kernels are available behind a size guard for small
cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import TimeSeriesData, lagged_matrix
from .tt import DENSE_GUARD_DEFAULT, SizeLimitError

N_COMPONENTS = 100


@dataclass(frozen=True)
class SyntheticSystem:
    """Ground-truth descriptor of a generated system."""

    order: int
    memory: int
    seed: int
    decay_columns: np.ndarray  # (I, N_COMPONENTS)

    @property
    def feature_size(self) -> int:
        return self.memory + 1

    def simulate(self, data: TimeSeriesData) -> np.ndarray:
        """Noise-free outputs for the given input record."""
        u1 = lagged_matrix(data, self.memory)
        return np.sum((u1 @ self.decay_columns) ** self.order, axis=1, keepdims=True)

    def dense_kernels(self, max_entries: int = DENSE_GUARD_DEFAULT) -> np.ndarray:
        """Materialise the full weight vector (tests and small orders only)."""
        total = self.feature_size**self.order
        if total > max_entries:
            raise SizeLimitError(
                f"dense kernels need {total} entries (guard: {max_entries})"
            )
        w = np.zeros(total)
        for column in self.decay_columns.T:
            power = column
            for _ in range(self.order - 1):
                power = np.kron(power, column)
            w += power
        return w


def generate_synthetic(
    order: int,
    memory: int,
    seed: int,
    n_total: int = 4500,
    noise_snr_db: float | None = None,
) -> tuple[TimeSeriesData, TimeSeriesData, TimeSeriesData, SyntheticSystem]:
    """Generate train/validation/test records of a random Volterra system.

    Column ``i`` of the feature bank is ``|alpha_i| * exp(-beta_i * t)`` for
    ``t = 1..I`` with standard-normal ``alpha`` and ``beta`` uniform on
    ``[1, 10]``; the kernel sums the order-``D`` powers of all columns.  The
    input is seeded Gaussian white noise and the record is split
    2/3 : 1/6 : 1/6 in time order.  Optional white output noise is added at
    the requested signal-to-noise ratio (applied to every split).
    """
    if order < 1 or memory < 1:
        raise ValueError("order and memory must be at least 1")
    rng = np.random.default_rng(seed)
    i = memory + 1
    alpha = rng.standard_normal(N_COMPONENTS)
    beta = rng.uniform(1.0, 10.0, N_COMPONENTS)
    decay = np.abs(alpha)[None, :] * np.exp(-beta[None, :] * np.arange(1, i + 1)[:, None])
    system = SyntheticSystem(order=order, memory=memory, seed=seed, decay_columns=decay)

    u = rng.standard_normal(n_total)
    full = TimeSeriesData(inputs=u, outputs=np.zeros((n_total, 1)), role="train")
    y = system.simulate(full)
    if noise_snr_db is not None:
        power = float(np.var(y))
        sigma = np.sqrt(power * 10.0 ** (-noise_snr_db / 10.0))
        y = y + sigma * rng.standard_normal(y.shape)

    n_train = (2 * n_total) // 3
    n_val = (n_total - n_train) // 2
    bounds = (0, n_train, n_train + n_val, n_total)
    roles = ("train", "validation", "test")
    splits = tuple(
        TimeSeriesData(
            inputs=u[bounds[k] : bounds[k + 1]],
            outputs=y[bounds[k] : bounds[k + 1]],
            role=roles[k],
        )
        for k in range(3)
    )
    return splits[0], splits[1], splits[2], system
