"""Small dense complex-matrix kernel: exponentials, norms, Paulis and dilations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULIS = {"i": np.eye(2, dtype=complex), "x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def expm(m) -> np.ndarray:
    """Matrix exponential (scaling and squaring with a degree-13 Pade approximant)."""
    a = as_matrix(m)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return scipy.linalg.expm(a)


def spectral_norm(m) -> float:
    """Largest singular value."""
    a = np.asarray(m, dtype=complex)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def _same_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def commutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _same_dims(a, b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _same_dims(a, b)
    return a @ b + b @ a


def is_hermitian(m, tol: float = 1e-10) -> bool:
    a = as_matrix(m)
    return spectral_norm(a - a.conj().T) <= tol * max(1.0, spectral_norm(a))


def is_anti_hermitian(m, tol: float = 1e-10) -> bool:
    a = as_matrix(m)
    return spectral_norm(a + a.conj().T) <= tol * max(1.0, spectral_norm(a))


def is_unitary(m, tol: float = 1e-10) -> bool:
    a = as_matrix(m)
    return spectral_norm(a.conj().T @ a - np.eye(a.shape[0])) <= tol


def kron(*mats) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def pauli(label: str) -> np.ndarray:
    """Pauli matrix by label; a multi-letter label such as ``"zxi"`` gives the tensor product."""
    try:
        return kron(*(_PAULIS[c] for c in label.lower()))
    except KeyError:
        raise ValueError(f"unknown Pauli label {label!r}") from None


def pauli_on(label: str, site: int, n_sites: int) -> np.ndarray:
    """Single-site Pauli acting on ``site`` of ``n_sites`` qubits (site 0 is the leftmost factor)."""
    if not 0 <= site < n_sites:
        raise ValueError(f"site {site} out of range for {n_sites} qubits")
    return pauli("".join(label if j == site else "i" for j in range(n_sites)))


def basis_projector(n: int, index: int) -> np.ndarray:
    """``|index><index|`` in dimension ``n``."""
    if not 0 <= index < n:
        raise ValueError(f"index {index} out of range for dimension {n}")
    p = np.zeros((n, n), dtype=complex)
    p[index, index] = 1.0
    return p


def plus_state(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("dimension must be positive")
    return np.full(n, 1 / np.sqrt(n), dtype=complex)


def plus_projector(n: int) -> np.ndarray:
    """``|+><+|`` with ``|+> = n^{-1/2} sum_x |x>``."""
    v = plus_state(n)
    return np.outer(v, v.conj())


def random_hermitian(dim: int, rng: np.random.Generator, norm: float | None = 1.0) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (g + g.conj().T) / 2
    if norm is not None:
        h *= norm / spectral_norm(h)
    return h


def random_anti_hermitian(dim: int, rng: np.random.Generator, norm: float | None = 1.0) -> np.ndarray:
    return 1j * random_hermitian(dim, rng, norm)


@dataclass
class OperatorSet:
    """Concrete matrices bound to formula slots.

    ``lam`` is the bound Lambda >= 2 max_j ||A_j||; it is computed from the
    matrices when not supplied.
    """

    ops: dict[int, np.ndarray]
    lam: float | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.ops = {int(s): as_matrix(m) for s, m in self.ops.items()}
        if not self.ops:
            raise ValueError("operator set is empty")
        dims = {m.shape[0] for m in self.ops.values()}
        if len(dims) != 1:
            raise ValueError(f"operators have different dimensions {sorted(dims)}")
        if self.lam is None:
            self.lam = 2 * max(spectral_norm(m) for m in self.ops.values())

    @classmethod
    def from_list(cls, mats: Sequence, lam: float | None = None) -> "OperatorSet":
        """Slot ``j`` holds ``mats[j]``."""
        return cls(dict(enumerate(mats)), lam)

    @property
    def k(self) -> int:
        return max(self.ops)

    @property
    def dim(self) -> int:
        return next(iter(self.ops.values())).shape[0]

    def __getitem__(self, slot: int) -> np.ndarray:
        try:
            return self.ops[slot]
        except KeyError:
            raise KeyError(f"operator set has no slot {slot}") from None

    def max_norm(self) -> float:
        return max(spectral_norm(m) for m in self.ops.values())


def nested_z(ops: OperatorSet | Mapping[int, np.ndarray], slots: Sequence[int] | None = None) -> np.ndarray:
    """``[A_k,[A_{k-1},[...,[A_1,A_0]...]]]`` folded from the inside out.

    ``slots`` lists the operators outermost first; by default ``k, ..., 0``.
    """
    mats = ops.ops if isinstance(ops, OperatorSet) else ops
    if slots is None:
        slots = tuple(range(max(mats), -1, -1))
    missing = [s for s in slots if s not in mats]
    if missing:
        raise KeyError(f"operator set has no slot(s) {missing}")
    z = as_matrix(mats[slots[-1]])
    for s in reversed(slots[:-1]):
        z = commutator(mats[s], z)
    return z


def dilate_anticomm(a, b) -> tuple[np.ndarray, np.ndarray]:
    """``(A (x) sigma_y, B (x) sigma_x)``; their commutator is ``-i {A,B} (x) sigma_z``."""
    a, b = as_matrix(a), as_matrix(b)
    _same_dims(a, b)
    return np.kron(a, SIGMA_Y), np.kron(b, SIGMA_X)


def commutation_residual(a, b) -> float:
    """``||[A,B]|| / (||A|| ||B||)``, zero for commuting pairs."""
    scale = spectral_norm(a) * spectral_norm(b)
    if scale == 0:
        return 0.0
    return spectral_norm(commutator(a, b)) / scale


def dilate_product(factors: Sequence[tuple[np.ndarray, int]], tol: float = 1e-10) -> OperatorSet:
    """Dilate a product of powers of commuting Hermitian matrices into a nested commutator.

    Each factor ``(A_l, alpha_l)`` contributes ``alpha_l`` copies; the first copy
    overall becomes slot 0 as ``A (x) sigma_x``, the rest ``A (x) sigma_y``.  The
    nested commutator of the result is ``-i 2^k prod A (x) sigma_z`` for odd
    ``k`` and ``2^k prod A (x) sigma_x`` for even ``k``.
    """
    mats = [as_matrix(m) for m, _ in factors]
    for i, m in enumerate(mats):
        if not is_hermitian(m):
            raise ValueError(f"factor {i} is not Hermitian")
    for (i, a), (j, b) in itertools.combinations(enumerate(mats), 2):
        res = commutation_residual(a, b)
        if res > tol:
            raise ValueError(f"factors {i} and {j} do not commute (relative residual {res:.3e})")
    copies = []
    for m, (_, mult) in zip(mats, factors):
        if mult < 0:
            raise ValueError("multiplicities must be non-negative")
        copies.extend([m] * int(mult))
    if len(copies) < 2:
        raise ValueError("need at least two operator copies to form a commutator")
    dilated = {0: np.kron(copies[0], SIGMA_X)}
    for j, m in enumerate(copies[1:], start=1):
        dilated[j] = np.kron(m, SIGMA_Y)
    return OperatorSet(dilated)


def dilated_product_target(factors: Sequence[tuple[np.ndarray, int]]) -> np.ndarray:
    """Closed form of the nested commutator of ``dilate_product(factors)``."""
    copies = [as_matrix(m) for m, mult in factors for _ in range(int(mult))]
    k = len(copies) - 1
    prod = np.eye(copies[0].shape[0], dtype=complex)
    for m in copies:
        prod = prod @ m
    if k % 2:
        return -1j * 2**k * np.kron(prod, SIGMA_Z)
    return 2**k * np.kron(prod, SIGMA_X)
