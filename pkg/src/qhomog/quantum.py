"""Dense density-matrix primitives.

Conventions: qubit 0 is the most significant bit, i.e. the leftmost factor of
a tensor product. Hamiltonians are in rad/s with hbar = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import DomainError, SizeError

MAX_QUBITS = 14

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
SKEW_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]

KET0 = np.array([[1, 0], [0, 0]], dtype=complex)
KET1 = np.array([[0, 0], [0, 1]], dtype=complex)
MAXIMALLY_MIXED = I2 / 2


def _num_qubits(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class DensityMatrix:
    """Validated, immutable density matrix over ``num_qubits`` qubits."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        _num_qubits(m.shape[0])
        if not np.all(np.isfinite(m)):
            raise ValueError("density matrix has non-finite entries")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > TRACE_TOL:
            raise ValueError(f"density matrix trace {np.trace(m).real!r} != 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise ValueError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def num_qubits(self) -> int:
        return _num_qubits(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


StateLike = Union[DensityMatrix, np.ndarray]


def as_array(rho: StateLike) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    return np.asarray(rho, dtype=complex)


def tensor_product(a, b, max_qubits: int = MAX_QUBITS) -> np.ndarray:
    """Kronecker product with ``a`` as the most significant factor."""
    a = as_array(a)
    b = as_array(b)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("tensor_product inputs must be finite")
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if max(rows, cols) > 2**max_qubits:
        raise SizeError(f"product dimension {rows}x{cols} exceeds {max_qubits} qubits")
    return np.kron(a, b)


def kron_all(factors: Iterable, max_qubits: int = MAX_QUBITS) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for f in factors:
        out = tensor_product(out, f, max_qubits)
    return out


def partial_trace(rho: StateLike, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the qubits in ``keep``, in their original order."""
    m = as_array(rho)
    n = _num_qubits(m.shape[0])
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"qubit indices {keep} out of range for {n} qubits")
    t = m.reshape((2,) * (2 * n))
    # einsum labels: row index i for qubit i, column index n + i; traced qubits share labels
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    reduced = np.einsum(t, row + col, out)
    d = 2 ** len(keep)
    reduced = reduced.reshape(d, d)
    return DensityMatrix(0.5 * (reduced + reduced.conj().T))


def polarisation(rho: StateLike) -> float:
    """Bloch z-component tr(rho sigma_z) of a single-qubit state."""
    m = as_array(rho)
    if m.shape != (2, 2):
        raise ValueError(f"polarisation needs a single-qubit state, got shape {m.shape}; "
                         "partial_trace first")
    f = np.trace(m @ SIGMA_Z)
    if abs(f.imag) > 1e-12:
        raise ValueError(f"tr(rho sigma_z) has imaginary part {f.imag!r}")
    return float(f.real)


def _check_f(f: float) -> float:
    f = float(f)
    if not np.isfinite(f) or abs(f) > 1:
        raise DomainError(f"polarisation {f!r} outside [-1, 1]")
    return f


def state_from_f(f: float) -> DensityMatrix:
    f = _check_f(f)
    return DensityMatrix(np.diag([(1 + f) / 2, (1 - f) / 2]).astype(complex))


def von_neumann_entropy(f: float) -> float:
    """Entropy in bits of the z-diagonal qubit state with polarisation ``f``."""
    f = _check_f(f)
    s = 0.0
    for p in ((1 + f) / 2, (1 - f) / 2):
        if p > 0:
            s -= p * np.log2(p)
    return float(s)


def trace_distance(a: StateLike, b: StateLike) -> float:
    a = as_array(a)
    b = as_array(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    ev = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.sum(np.abs(ev)))


class CallCounter:
    """Counts matrix exponentiations; reset before instrumented sections."""

    def __init__(self):
        self.count = 0

    def reset(self):
        self.count = 0


expm_calls = CallCounter()


def expm_skew_hermitian(generator: np.ndarray) -> np.ndarray:
    """exp(G) for skew-Hermitian G = -iH, via eigendecomposition of H.

    The result is unitary to machine precision because the eigenvector
    matrix returned by ``eigh`` is itself unitary.
    """
    g = np.asarray(generator, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"generator must be square, got shape {g.shape}")
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g + g.conj().T)) > SKEW_TOL * scale:
        raise ValueError("generator is not skew-Hermitian")
    expm_calls.count += 1
    h = 1j * g
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


def is_unitary(u: np.ndarray, tol: float = 1e-12) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def nearest_unitary(m: np.ndarray) -> np.ndarray:
    """Unitary factor of the polar decomposition (closest unitary in Frobenius norm).

    Long products of segment propagators drift from unitarity by roundoff;
    this removes the drift without touching the intended rotation.
    """
    w, _, vh = np.linalg.svd(np.asarray(m, dtype=complex))
    return w @ vh


def apply_unitary(u: np.ndarray, rho: StateLike) -> np.ndarray:
    m = as_array(rho)
    return u @ m @ u.conj().T


def embed_operator(op: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Lift a k-qubit operator acting on ``qubits`` (in that order) to n qubits."""
    op = np.asarray(op, dtype=complex)
    k = len(qubits)
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} qubits")
    if len(set(qubits)) != k or min(qubits) < 0 or max(qubits) >= n:
        raise ValueError(f"invalid qubit indices {qubits} for {n} qubits")
    if n > MAX_QUBITS:
        raise SizeError(f"{n} qubits exceeds cap of {MAX_QUBITS}")
    rest = [q for q in range(n) if q not in qubits]
    full = np.kron(op, np.eye(2 ** (n - k), dtype=complex))
    # full acts on ordering (qubits..., rest...); permute axes back to 0..n-1
    order = list(qubits) + rest
    inv = np.argsort(order)
    t = full.reshape((2,) * (2 * n))
    t = t.transpose(list(inv) + [n + i for i in inv])
    return t.reshape(2**n, 2**n)


def apply_local_unitary(u: np.ndarray, rho: np.ndarray, qubits: tuple[int, ...]) -> np.ndarray:
    """Conjugate ``rho`` by a k-qubit unitary without forming the full matrix."""
    n = _num_qubits(rho.shape[0])
    k = len(qubits)
    uk = np.asarray(u, dtype=complex).reshape((2,) * (2 * k))
    t = rho.reshape((2,) * (2 * n))
    rows = list(range(n))
    cols = list(range(n, 2 * n))
    new = list(range(2 * n, 2 * n + k))
    # left multiply: contract u's input legs with the row legs on ``qubits``
    out_rows = [new[qubits.index(i)] if i in qubits else i for i in rows]
    t = np.einsum(uk, new + [rows[q] for q in qubits], t, rows + cols, out_rows + cols)
    t = np.einsum(t, rows + cols, uk.conj(), new + [cols[q] for q in qubits],
                  rows + [new[qubits.index(i - n)] if (i - n) in qubits else i for i in cols])
    return t.reshape(rho.shape)


def bloch_z(rho: StateLike, qubit: int) -> float:
    """Polarisation of one qubit of a multi-qubit state."""
    return polarisation(partial_trace(rho, [qubit]))
