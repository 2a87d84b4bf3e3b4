"""Dense tensor primitives: matricization, mode products, truncated SVD, QR,
and principal-angle distances.

Conventions used throughout the package:

* tensors are plain ``numpy.ndarray`` of ``float64`` with ``ndim >= 2``;
* modes are 1-based (mode ``k`` is axis ``k - 1``);
* the mode-k matricization has ``p_k`` rows, and its columns run over the
  remaining modes in cyclic order ``k+1, ..., d, 1, ..., k-1`` with the first
  of these varying fastest;
* every orthonormal frame returned here follows a deterministic sign
  convention (see :func:`svd_leading`, :func:`qr_orthonormalize`), so repeated
  runs on identical input are bit-identical.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "matricize",
    "fold",
    "mode_product",
    "multi_mode_product",
    "kron_chain",
    "svd_leading",
    "qr_orthonormalize",
    "sin_theta_fro",
    "sin_theta_op",
    "is_orthonormal",
    "complete_with_standard_basis",
    "TruncatedSvd",
]

# Orthonormality slack accepted for a frame, max |U^T U - I|.
ORTHONORMAL_TOL = 1e-10

# Relative size under which an R diagonal entry counts as rank deficiency.
_RANK_TOL = 1e-12


def _as_tensor(t):
    t = np.asarray(t, dtype=float)
    if t.ndim < 2:
        raise ValueError(f"expected a tensor of order >= 2, got order {t.ndim}")
    return t


def _check_mode(t, mode):
    if not 1 <= mode <= t.ndim:
        raise ValueError(f"mode {mode} out of range for an order-{t.ndim} tensor")


def _cyclic_axes(ndim, mode):
    axis = mode - 1
    return (axis,) + tuple(range(axis + 1, ndim)) + tuple(range(axis))


def matricize(t, mode):
    """Flatten tensor ``t`` into its mode-``mode`` matricization.

    Returns the ``p_k x p_(-k)`` matrix whose rows are the mode-k fibers.
    Column order is cyclic (modes ``k+1..d, 1..k-1``, first fastest), which for
    mode 1 reduces to the classical column index ``i_2 + p_2(i_3-1) + ...``.
    """
    t = _as_tensor(t)
    _check_mode(t, mode)
    axes = _cyclic_axes(t.ndim, mode)
    # Fortran reshape makes the leading remaining mode the fastest column index.
    return np.transpose(t, axes).reshape(t.shape[mode - 1], -1, order="F")


def fold(m, mode, shape):
    """Inverse of :func:`matricize`: rebuild the tensor of ``shape`` from its
    mode-``mode`` matricization."""
    m = np.asarray(m, dtype=float)
    shape = tuple(int(s) for s in shape)
    if len(shape) < 2:
        raise ValueError("shape must describe a tensor of order >= 2")
    if not 1 <= mode <= len(shape):
        raise ValueError(f"mode {mode} out of range for shape {shape}")
    axes = _cyclic_axes(len(shape), mode)
    expected = (shape[mode - 1], int(np.prod(shape)) // shape[mode - 1])
    if m.shape != expected:
        raise ValueError(f"matrix shape {m.shape} does not match {expected} for mode {mode}")
    t = m.reshape([shape[a] for a in axes], order="F")
    return np.transpose(t, np.argsort(axes))


def mode_product(t, mode, m):
    """Mode-``mode`` tensor-matrix product ``t x_k m``.

    ``m`` must have ``p_k`` columns; axis ``k`` of the result has ``m.shape[0]``
    entries. Products along distinct modes commute.
    """
    t = _as_tensor(t)
    _check_mode(t, mode)
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[1] != t.shape[mode - 1]:
        raise ValueError(
            f"inner dimension mismatch: matrix has {m.shape[1]} columns, "
            f"mode {mode} has size {t.shape[mode - 1]}"
        )
    shape = list(t.shape)
    shape[mode - 1] = m.shape[0]
    return fold(m @ matricize(t, mode), mode, shape)


def multi_mode_product(t, mats, transpose=False):
    """Apply one matrix per mode: ``t x_1 M_1 x_2 M_2 ...``.

    Entries of ``mats`` that are ``None`` leave the corresponding mode
    untouched. With ``transpose=True`` each matrix is applied transposed, the
    usual projection onto per-mode frames.
    """
    t = _as_tensor(t)
    if len(mats) != t.ndim:
        raise ValueError(f"expected {t.ndim} matrices, got {len(mats)}")
    out = t
    for k, m in enumerate(mats, start=1):
        if m is None:
            continue
        out = mode_product(out, k, m.T if transpose else m)
    return out


def kron_chain(mats):
    """Kronecker product of ``mats`` under the first-factor-fastest convention.

    Consistent with the cyclic matricization: for an order-3 ``t``,
    ``matricize(t x_2 B x_3 C, 1) == matricize(t, 1) @ kron_chain([B, C]).T``.
    """
    if len(mats) == 0:
        raise ValueError("kron_chain requires at least one matrix")
    out = np.asarray(mats[0], dtype=float)
    for m in mats[1:]:
        # numpy's kron puts the *second* factor fastest, hence the swap.
        out = np.kron(np.asarray(m, dtype=float), out)
    return out


@dataclass(frozen=True)
class TruncatedSvd:
    """Leading singular triplets: ``u`` (rows x r), ``s`` (r,), ``v`` (cols x r).

    ``boundary_tie`` is set when the r-th and (r+1)-th singular values coincide
    to relative 1e-12, in which case the retained subspace is an arbitrary but
    deterministic choice.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    boundary_tie: bool = False


def _fix_signs(u, v=None):
    """Scale each column of ``u`` so its largest-magnitude entry is positive
    (ties broken by lowest row index); flip ``v`` columns to match."""
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u = u * signs
    if v is not None:
        v = v * signs
    return u, v


def svd_leading(m, r):
    """Top-``r`` singular triplets of ``m`` in nonincreasing order.

    Left and right frames have orthonormal columns with the deterministic sign
    convention; requires ``1 <= r <= min(m.shape)`` and finite entries.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if not 1 <= r <= min(m.shape):
        raise ValueError(f"rank {r} out of range for a {m.shape} matrix")
    if not np.isfinite(m).all():
        raise ValueError("matrix contains non-finite entries")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    tie = r < s.size and s[r] >= s[r - 1] * (1.0 - 1e-12)
    u, v = _fix_signs(u[:, :r], vt[:r].T)
    return TruncatedSvd(u=u, s=s[:r].copy(), v=v, boundary_tie=bool(tie))


def is_orthonormal(u, tol=ORTHONORMAL_TOL):
    """True when the columns of ``u`` are orthonormal to within ``tol``."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    gram = u.T @ u
    return bool(np.max(np.abs(gram - np.eye(u.shape[1]))) <= tol)


def complete_with_standard_basis(basis, width, dim):
    """Extend ``basis`` (possibly 0 columns) to ``width`` orthonormal columns
    in R^dim by appending re-orthogonalized standard basis vectors, lowest
    index first. Deterministic."""
    cols = [] if basis is None or basis.size == 0 else [np.asarray(basis, dtype=float)]
    have = 0 if not cols else cols[0].shape[1]
    if have > width:
        raise ValueError("basis already wider than requested")
    q = np.zeros((dim, 0)) if not cols else cols[0]
    for i in range(dim):
        if q.shape[1] >= width:
            break
        e = np.zeros(dim)
        e[i] = 1.0
        # two Gram-Schmidt passes keep the completion orthonormal to 1e-14
        for _ in range(2):
            e -= q @ (q.T @ e)
        norm = np.linalg.norm(e)
        if norm > 1e-8:
            q = np.hstack([q, (e / norm)[:, None]])
    if q.shape[1] < width:
        raise ValueError("could not complete an orthonormal basis")
    return q


def qr_orthonormalize(m):
    """Q factor of the reduced QR of ``m``, with nonnegative R diagonal.

    Expects full column rank; on (near-)deficiency the missing directions are
    filled deterministically with standard basis vectors orthogonal to the
    computed prefix, so the result is always a valid p x r frame.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    rows, cols = m.shape
    if cols > rows:
        raise ValueError(f"cannot orthonormalize {rows}x{cols} matrix with cols > rows")
    if cols == 0:
        return np.zeros((rows, 0))
    q, r = np.linalg.qr(m)
    diag = np.diagonal(r)
    signs = np.where(diag < 0, -1.0, 1.0)
    q = q * signs
    largest = np.max(np.abs(diag))
    if largest > 0 and np.min(np.abs(diag)) > _RANK_TOL * largest:
        return q
    # Deficient: rebuild from the independent columns (Gram-Schmidt keeps the
    # nonnegative-diagonal convention), then complete with basis vectors.
    basis = np.zeros((rows, 0))
    for j in range(cols):
        c = m[:, j].copy()
        for _ in range(2):
            c -= basis @ (basis.T @ c)
        norm = np.linalg.norm(c)
        if norm > _RANK_TOL * max(1.0, np.linalg.norm(m[:, j])):
            basis = np.hstack([basis, (c / norm)[:, None]])
    return complete_with_standard_basis(basis, cols, rows)


def _check_same_frame_shape(u, v):
    u = np.atleast_2d(np.asarray(u, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if u.shape != v.shape:
        raise ValueError(f"frame shapes differ: {u.shape} vs {v.shape}")
    return u, v


def sin_theta_fro(u, v):
    """Frobenius sin-theta distance between the column spans of two p x r
    frames: sqrt(r - |U^T V|_F^2), in [0, sqrt(r)]."""
    u, v = _check_same_frame_shape(u, v)
    r = u.shape[1]
    cross = u.T @ v
    return float(np.sqrt(max(r - np.sum(cross * cross), 0.0)))


def sin_theta_op(u, v):
    """Spectral sin-theta distance: sine of the largest principal angle,
    in [0, 1]."""
    u, v = _check_same_frame_shape(u, v)
    smin = np.linalg.svd(u.T @ v, compute_uv=False)[-1]
    return float(np.sqrt(min(max(1.0 - smin * smin, 0.0), 1.0)))
