"""Tensor-train containers and core algebra.

A tensor train (TT) is a chain of third-order cores ``cores[d]`` of shape
``(R_d, I_d, R_{d+1})`` whose contraction over the linking ranks represents a
large vector without ever materialising it.  All vectorisation in this
package is column-major ("first index fastest"): the left-unfolding of a core
has rows indexed by ``r + i * R_left`` and the reconstruction of a TT has the
first core's mode index as the fastest-running digit.  Every identity used by
the higher-level modules (frame matrices, design-matrix rows, constraint
bases) relies on this single convention.

The first core may carry a left boundary rank larger than one; it plays the
role of the output channel of a multi-output model.  The right boundary rank
of the last core is always one.
"""

from __future__ import annotations

import numpy as np

# Upper bound on the number of entries `reconstruct` will materialise.
# Production code never reconstructs; tests override the guard explicitly.
DENSE_GUARD_DEFAULT = 10_000_000

# Tolerance for the Gram-matrix orthogonality checks of canonical forms.
ORTHO_TOL = 1e-10


class SizeLimitError(ValueError):
    """Raised when an operation would materialise too many dense entries."""


def vec(array: np.ndarray) -> np.ndarray:
    """Column-major vectorisation (first index fastest)."""
    return np.asarray(array).reshape(-1, order="F")


def unvec(vector: np.ndarray, shape) -> np.ndarray:
    """Inverse of :func:`vec` for the given target shape."""
    return np.asarray(vector).reshape(shape, order="F")


def left_unfold(core: np.ndarray) -> np.ndarray:
    """Reshape a ``(R_left, I, R_right)`` core to ``(R_left * I, R_right)``.

    Row ``r + i * R_left`` holds ``core[r, i, :]``.
    """
    rl, i, rr = core.shape
    return core.reshape(rl * i, rr, order="F")


def right_unfold(core: np.ndarray) -> np.ndarray:
    """Reshape a ``(R_left, I, R_right)`` core to ``(R_left, I * R_right)``.

    Column ``i + s * I`` holds ``core[:, i, s]``.
    """
    rl, i, rr = core.shape
    return core.reshape(rl, i * rr, order="F")


def fold_left(matrix: np.ndarray, shape) -> np.ndarray:
    """Inverse of :func:`left_unfold`."""
    return np.asarray(matrix).reshape(shape, order="F")


def fold_right(matrix: np.ndarray, shape) -> np.ndarray:
    """Inverse of :func:`right_unfold`."""
    return np.asarray(matrix).reshape(shape, order="F")


def mode2_contract(core: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Contract the mode dimension of a core with a vector.

    Returns the ``(R_left, R_right)`` matrix ``sum_i v[i] * core[:, i, :]``.
    """
    v = np.asarray(v, dtype=float)
    if core.ndim != 3:
        raise ValueError(f"expected a 3rd-order core, got shape {core.shape}")
    if v.shape != (core.shape[1],):
        raise ValueError(
            f"vector length {v.shape} does not match mode size {core.shape[1]}"
        )
    return np.einsum("ris,i->rs", core, v)


def _is_left_orthogonal(core: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    q = left_unfold(core)
    gram = q.T @ q
    return bool(np.max(np.abs(gram - np.eye(q.shape[1]))) <= tol)


def _is_right_orthogonal(core: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    q = right_unfold(core)
    gram = q @ q.T
    return bool(np.max(np.abs(gram - np.eye(q.shape[0]))) <= tol)


class TensorTrain:
    """Immutable chain of third-order cores with an optional canonical site.

    Parameters
    ----------
    cores : sequence of ndarray
        Third-order cores with a consistent rank chain; the right boundary
        rank must be one, the left boundary rank is the output count.
    canonical_site : int or None
        0-based index ``d`` asserting that all cores left of ``d`` are
        left-orthogonal and all cores right of ``d`` are right-orthogonal.
        Verified at construction.
    """

    __slots__ = ("cores", "canonical_site")

    def __init__(self, cores, canonical_site: int | None = None):
        frozen = []
        for k, core in enumerate(cores):
            arr = np.array(core, dtype=float, copy=True)
            if arr.ndim != 3:
                raise ValueError(f"core {k} must be 3-dimensional, got {arr.shape}")
            if min(arr.shape) < 1:
                raise ValueError(f"core {k} has an empty dimension: {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"core {k} contains non-finite entries")
            arr.setflags(write=False)
            frozen.append(arr)
        if not frozen:
            raise ValueError("a tensor train needs at least one core")
        for k in range(len(frozen) - 1):
            if frozen[k].shape[2] != frozen[k + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between cores {k} and {k + 1}: "
                    f"{frozen[k].shape[2]} vs {frozen[k + 1].shape[0]}"
                )
        if frozen[-1].shape[2] != 1:
            raise ValueError(
                f"right boundary rank must be 1, got {frozen[-1].shape[2]}"
            )
        if canonical_site is not None:
            if not 0 <= canonical_site < len(frozen):
                raise ValueError(f"canonical_site {canonical_site} out of range")
            for k in range(canonical_site):
                if not _is_left_orthogonal(frozen[k]):
                    raise ValueError(f"core {k} is not left-orthogonal")
            for k in range(canonical_site + 1, len(frozen)):
                if not _is_right_orthogonal(frozen[k]):
                    raise ValueError(f"core {k} is not right-orthogonal")
        object.__setattr__(self, "cores", tuple(frozen))
        object.__setattr__(self, "canonical_site", canonical_site)

    def __setattr__(self, name, value):
        raise AttributeError("TensorTrain is immutable")

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[0] for c in self.cores) + (self.cores[-1].shape[2],)

    @property
    def mode_sizes(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def n_outputs(self) -> int:
        return self.cores[0].shape[0]

    def replace_core(self, index: int, core: np.ndarray) -> "TensorTrain":
        """Return a new train with one core swapped; canonical site is kept
        only when the swap happens at the site itself."""
        cores = list(self.cores)
        cores[index] = core
        site = self.canonical_site if index == self.canonical_site else None
        return TensorTrain(cores, canonical_site=site)

    def __repr__(self) -> str:
        return (
            f"TensorTrain(order={self.order}, mode_sizes={self.mode_sizes}, "
            f"ranks={self.ranks}, canonical_site={self.canonical_site})"
        )


def reconstruct(tt: TensorTrain, max_entries: int = DENSE_GUARD_DEFAULT) -> np.ndarray:
    """Contract all cores into the dense vector the train represents.

    Entry ``l + L * (i_1 + i_2 * I_1 + ...)`` holds the element for output
    ``l`` and mode indices ``(i_1, ..., i_D)``.  Only intended for tests and
    small problems; guarded against accidental dense blow-up.
    """
    total = tt.n_outputs * int(np.prod([float(i) for i in tt.mode_sizes]))
    if total > max_entries:
        raise SizeLimitError(
            f"reconstruction would create {total} entries (guard: {max_entries})"
        )
    acc = left_unfold(tt.cores[0])
    for core in tt.cores[1:]:
        acc = np.einsum("pr,ris->pis", acc, core)
        acc = acc.reshape(acc.shape[0] * acc.shape[1], acc.shape[2], order="F")
    return acc[:, 0]


def shift_canonical(tt: TensorTrain, target_site: int) -> TensorTrain:
    """Bring the train into site-``target_site`` mixed-canonical form.

    Uses QR factorisations of left-unfoldings moving right and LQ
    factorisations of right-unfoldings moving left; the represented vector
    is unchanged.  When the train is already canonical at another site only
    the cores on the path are re-factorised; when it is already at
    ``target_site`` the same object is returned.
    """
    n = tt.order
    if not 0 <= target_site < n:
        raise ValueError(f"target site {target_site} out of range for order {n}")
    if tt.canonical_site == target_site:
        return tt
    cores = [np.array(c) for c in tt.cores]

    def qr_step(k: int) -> None:
        rl, i, rr = cores[k].shape
        q, r = np.linalg.qr(left_unfold(cores[k]))
        cores[k] = fold_left(q, (rl, i, q.shape[1]))
        cores[k + 1] = np.einsum("qr,ris->qis", r, cores[k + 1])

    def lq_step(k: int) -> None:
        rl, i, rr = cores[k].shape
        qt, rt = np.linalg.qr(right_unfold(cores[k]).T)
        cores[k] = fold_right(qt.T, (qt.shape[1], i, rr))
        cores[k - 1] = np.einsum("ris,st->rit", cores[k - 1], rt.T)

    if tt.canonical_site is None:
        for k in range(target_site):
            qr_step(k)
        for k in range(n - 1, target_site, -1):
            lq_step(k)
    elif tt.canonical_site < target_site:
        for k in range(tt.canonical_site, target_site):
            qr_step(k)
    else:
        for k in range(tt.canonical_site, target_site, -1):
            lq_step(k)
    return TensorTrain(cores, canonical_site=target_site)


def tt_norm(tt: TensorTrain) -> float:
    """Euclidean norm of the represented vector.

    Computed as the Frobenius norm of the site core after canonicalisation,
    which never touches the dense vector.
    """
    site = tt.canonical_site if tt.canonical_site is not None else 0
    canonical = shift_canonical(tt, site)
    return float(np.linalg.norm(canonical.cores[site]))
