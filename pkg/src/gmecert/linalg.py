"""Dense complex linear algebra for small multi-qubit operators.

Everything here operates on plain complex numpy arrays of size at most
64x64 (the pipeline never exceeds 8x8). The eigensolver is a cyclic
Jacobi iteration written from scratch so that downstream certificate
checks do not share a code path with any optimizer internals.
"""

from __future__ import annotations

import json

import numpy as np

__all__ = [
    "NumericalError",
    "PAULI",
    "PAULI_LABELS",
    "QUBIT_NAMES",
    "qubit_index",
    "as_hermitian",
    "kron",
    "partial_trace",
    "partial_transpose",
    "permute_qubits",
    "eig_hermitian",
    "min_eig",
    "sqrtm_psd",
    "matrix_to_json",
    "matrix_from_json",
]

HERMITICITY_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
JACOBI_OFF_TOL = 1e-13
SQRTM_CLAMP = 1e-10


class NumericalError(RuntimeError):
    """An iterative routine failed to reach its convergence target."""


# Pauli matrices sigma_0..sigma_3 in the computational basis.
PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
PAULI_LABELS = ("I", "X", "Y", "Z")

# Qubit A is the most significant bit: |abc> has basis index 4a + 2b + c.
QUBIT_NAMES = "ABC"


def qubit_index(label) -> int:
    """Map 'A'/'B'/'C' (or an int already in range) to a qubit index."""
    if isinstance(label, str):
        try:
            return QUBIT_NAMES.index(label.upper())
        except ValueError:
            raise ValueError(f"unknown qubit label {label!r}") from None
    idx = int(label)
    if idx not in (0, 1, 2):
        raise ValueError(f"qubit index out of range: {label!r}")
    return idx


def _n_qubits(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ValueError(f"matrix dimension {dim} is not a power of two")
    return n


def as_hermitian(m: np.ndarray, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Validate that m is Hermitian to `tol` and return (m + m†)/2.

    The symmetrized copy suppresses roundoff drift so downstream PSD
    checks can use tolerance-based verdicts.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(float))):
        raise ValueError("matrix contains non-finite entries")
    defect = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if defect > tol:
        raise ValueError(f"matrix is not Hermitian: max |m - m†| = {defect:.3e}")
    return (m + m.conj().T) / 2


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; dimensions multiply."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def partial_trace(m: np.ndarray, keep) -> np.ndarray:
    """Trace out all qubits of a 3-qubit operator except those in `keep`.

    `keep` is a nonempty proper subset of {0,1,2} (or 'A'/'B'/'C' labels).
    The surviving factors keep their relative order, so keep={0,2} yields
    an operator ordered as (A, C).
    """
    m = np.asarray(m, dtype=complex)
    if m.shape != (8, 8):
        raise ValueError(f"partial_trace expects an 8x8 matrix, got {m.shape}")
    keep_idx = sorted({qubit_index(q) for q in keep})
    if not keep_idx or len(keep_idx) == 3:
        raise ValueError("keep must be a nonempty proper subset of the three qubits")
    traced = [q for q in range(3) if q not in keep_idx]
    t = m.reshape([2] * 6)
    # Row axis q and column axis q+3 refer to the same qubit.
    for q in reversed(traced):
        t = np.trace(t, axis1=q, axis2=q + t.ndim // 2)
    d = 2 ** len(keep_idx)
    return t.reshape(d, d)


def partial_transpose(m: np.ndarray, subsystem) -> np.ndarray:
    """Transpose the tensor factors listed in `subsystem` (qubit positions).

    Works on 4x4 (two-qubit) and 8x8 (three-qubit) operators; positions
    count from the most significant factor. Involutive, trace preserving.
    """
    m = np.asarray(m, dtype=complex)
    if m.shape not in ((4, 4), (8, 8)):
        raise ValueError(f"partial_transpose expects a 4x4 or 8x8 matrix, got {m.shape}")
    n = _n_qubits(m.shape[0])
    subs = sorted({int(q) if not isinstance(q, str) else qubit_index(q) for q in subsystem})
    if not subs or any(q < 0 or q >= n for q in subs):
        raise ValueError(f"subsystem {subsystem!r} not within {n} qubit positions")
    t = m.reshape([2] * (2 * n))
    axes = list(range(2 * n))
    for q in subs:
        axes[q], axes[q + n] = axes[q + n], axes[q]
    return t.transpose(axes).reshape(m.shape)


def permute_qubits(m: np.ndarray, order) -> np.ndarray:
    """Reorder the tensor factors of an n-qubit operator.

    `order[i]` names which current factor becomes factor i of the result.
    """
    m = np.asarray(m, dtype=complex)
    n = _n_qubits(m.shape[0])
    order = list(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order {order!r} is not a permutation of range({n})")
    t = m.reshape([2] * (2 * n))
    axes = order + [q + n for q in order]
    return t.transpose(axes).reshape(m.shape)


def _jacobi_rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    """Zero a[p, q] with a complex Givens rotation, updating a and v in place."""
    apq = a[p, q]
    r = abs(apq)
    if r == 0.0:
        return
    u = apq / r
    theta = (a[p, p].real - a[q, q].real) / (2.0 * r)
    if theta >= 0.0:
        t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
    else:
        t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c

    # G is the identity except G[p,p]=c, G[p,q]=-s*u, G[q,p]=s*conj(u), G[q,q]=c.
    col_p = a[:, p].copy()
    col_q = a[:, q].copy()
    a[:, p] = c * col_p + s * np.conj(u) * col_q
    a[:, q] = -s * u * col_p + c * col_q
    row_p = a[p, :].copy()
    row_q = a[q, :].copy()
    a[p, :] = c * row_p + s * u * row_q
    a[q, :] = -s * np.conj(u) * row_p + c * row_q

    # Restore exact Hermiticity of the touched entries.
    a[p, q] = 0.0
    a[q, p] = 0.0
    a[p, p] = a[p, p].real
    a[q, q] = a[q, q].real

    col_p = v[:, p].copy()
    col_q = v[:, q].copy()
    v[:, p] = c * col_p + s * np.conj(u) * col_q
    v[:, q] = -s * u * col_p + c * col_q


def eig_hermitian(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvector matrix V) with m @ V = V @ diag(w)
    and V unitary. Raises NumericalError if the off-diagonal mass has not
    dropped below 1e-13 (relative, Frobenius) after 100 sweeps.
    """
    a = as_hermitian(m, tol=1e-10)
    n = a.shape[0]
    if n > 64:
        raise ValueError(f"matrix dimension {n} exceeds the supported bound of 64")
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if scale == 0.0 or n == 1:
        w = np.diag(a).real.copy()
        order = np.argsort(w, kind="stable")
        return w[order], v[:, order]
    target = JACOBI_OFF_TOL * scale
    # Rotating away entries below this floor only churns roundoff.
    skip = 1e-18 * scale
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) > skip:
                    _jacobi_rotate(a, v, p, q)
    else:
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off > target:
            raise NumericalError(
                f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps: "
                f"off-diagonal residual {off:.3e} > {target:.3e}"
            )
    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def min_eig(m: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    w, _ = eig_hermitian(m)
    return float(w[0])


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Principal square root of a positive-semidefinite Hermitian matrix.

    Eigenvalues in [-1e-10, 0) are clamped to zero (ML reconstructions are
    PSD by construction but accumulate roundoff); anything more negative is
    a domain error.
    """
    w, v = eig_hermitian(m)
    if w[0] < -SQRTM_CLAMP:
        raise ValueError(f"matrix is not PSD: min eigenvalue {w[0]:.3e}")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    return (root + root.conj().T) / 2


def matrix_to_json(m: np.ndarray, dims=None) -> dict:
    """Encode a matrix as {"dims": [...], "matrix": rows of [re, im] pairs}."""
    m = np.asarray(m, dtype=complex)
    if dims is None:
        dims = [2] * _n_qubits(m.shape[0])
    return {
        "dims": list(int(d) for d in dims),
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in m],
    }


def matrix_from_json(obj) -> tuple[np.ndarray, list[int]]:
    """Decode the matrix JSON format; returns (matrix, dims)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    dims = [int(d) for d in obj["dims"]]
    rows = obj["matrix"]
    m = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    expected = int(np.prod(dims))
    if m.shape != (expected, expected):
        raise ValueError(f"matrix shape {m.shape} does not match dims {dims}")
    return m, dims
