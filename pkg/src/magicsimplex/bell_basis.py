"""Weyl operators, Bell projectors and mutually unbiased bases for two qutrits.

Index conventions used throughout the package:

* A Bell index ``(k, l)`` is flattened row-major to ``3 * k + l``.
* Two-qutrit kets are ordered ``|a b> -> 3 * a + b`` (first subsystem is the
  slow index).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

D = 3
OMEGA = np.exp(2j * np.pi / D)
COEFF_TOL = 1e-12


def _check_index(k: int, l: int) -> None:
    if not (0 <= k < D and 0 <= l < D):
        raise ValueError(f"Bell/Weyl index out of range: ({k}, {l})")


def _hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().swapaxes(-1, -2)) / 2


@dataclass(frozen=True)
class WeylOperator:
    k: int
    l: int
    matrix: np.ndarray


@dataclass(frozen=True)
class BellProjector:
    k: int
    l: int
    matrix: np.ndarray


@dataclass(frozen=True)
class MubBasis:
    index: int
    vectors: np.ndarray  # rows are the basis kets


def weyl_matrix(k: int, l: int) -> np.ndarray:
    """W_{k,l} = sum_j omega^{jk} |j><(j+l) mod 3|."""
    _check_index(k, l)
    w = np.zeros((D, D), dtype=complex)
    for j in range(D):
        w[j, (j + l) % D] = OMEGA ** ((j * k) % D)
    return w


def weyl_operator(k: int, l: int) -> WeylOperator:
    return WeylOperator(k, l, weyl_matrix(k, l))


@lru_cache(maxsize=None)
def _bell_vectors() -> np.ndarray:
    phi = np.zeros(D * D, dtype=complex)
    for j in range(D):
        phi[j * D + j] = 1 / np.sqrt(D)
    eye = np.eye(D)
    vecs = np.array(
        [np.kron(weyl_matrix(k, l), eye) @ phi for k in range(D) for l in range(D)]
    )
    vecs.setflags(write=False)
    return vecs


def bell_vectors() -> np.ndarray:
    """The 9 Bell kets, shape (9, 9); row ``3k+l`` is (W_{k,l} x 1)|Phi>."""
    return _bell_vectors()


@lru_cache(maxsize=None)
def _bell_projectors() -> np.ndarray:
    v = _bell_vectors()
    p = _hermitize(np.einsum("ai,aj->aij", v, v.conj()))
    p.setflags(write=False)
    return p


def bell_projectors() -> np.ndarray:
    """Stack of the 9 Bell projectors, shape (9, 9, 9)."""
    return _bell_projectors()


def bell_projector(k: int, l: int) -> BellProjector:
    _check_index(k, l)
    return BellProjector(k, l, _bell_projectors()[D * k + l])


def check_coeffs(c, tol: float = COEFF_TOL) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != D * D:
        raise ValueError(f"expected 9 coefficients, got shape {c.shape}")
    if np.any(np.abs(c.sum(axis=-1) - 1) > tol):
        raise ValueError("coefficients must sum to 1")
    if np.any(c < -tol):
        raise ValueError("coefficients must be nonnegative")
    return c


def state_from_coeffs(c) -> np.ndarray:
    """Density matrix sum_{k,l} c_{k,l} P_{k,l}; accepts a batch (..., 9)."""
    c = check_coeffs(c)
    return _hermitize(np.einsum("...a,aij->...ij", c, _bell_projectors()))


def partial_trace(rho: np.ndarray, keep: int) -> np.ndarray:
    """Reduced state of subsystem ``keep`` (0 or 1) of a two-qutrit operator."""
    t = rho.reshape(D, D, D, D)
    if keep == 0:
        return np.einsum("ijkj->ik", t)
    if keep == 1:
        return np.einsum("jijk->ik", t)
    raise ValueError("keep must be 0 or 1")


@lru_cache(maxsize=None)
def _mub_vectors() -> np.ndarray:
    bases = [np.eye(D, dtype=complex)]
    for k in range(D):
        rows = [
            [OMEGA ** ((i * j + k * j * j) % D) for j in range(D)] for i in range(D)
        ]
        bases.append(np.array(rows) / np.sqrt(D))
    out = np.array(bases)
    out.setflags(write=False)
    return out


def mub_bases() -> list[MubBasis]:
    """Computational basis followed by the three Fourier-type bases."""
    return [MubBasis(i + 1, vecs) for i, vecs in enumerate(_mub_vectors())]


IDENTITY_PERM = ((0, 1, 2),) * (D + 1)


def _check_mub_args(m: int, perm) -> tuple:
    if not 2 <= m <= D + 1:
        raise ValueError(f"MUB witness needs 2 <= m <= {D + 1}, got {m}")
    perm = tuple(tuple(int(x) for x in p) for p in perm)
    if len(perm) < m or any(sorted(p) != list(range(D)) for p in perm[:m]):
        raise ValueError(f"perm must hold a permutation of 0..2 for each of {m} bases")
    return perm


def mub_witness_operator(m: int, perm=IDENTITY_PERM) -> np.ndarray:
    """M_m = sum_{k<m} sum_i |i_k><i_k| x |pi_k(i)_k*><pi_k(i)_k*|."""
    perm = _check_mub_args(m, perm)
    vecs = _mub_vectors()
    out = np.zeros((D * D, D * D), dtype=complex)
    for b in range(m):
        for i in range(D):
            v = np.kron(vecs[b][i], vecs[b][perm[b][i]].conj())
            out += np.outer(v, v.conj())
    return _hermitize(out)


def mub_upper_bound(m: int) -> float:
    return 1 + (m - 1) / D


def bell_diagonal_part(op: np.ndarray) -> np.ndarray:
    """kappa_{k,l} = Tr(op P_{k,l}); equals Tr(op rho) = kappa . c on the simplex."""
    v = _bell_vectors()
    return np.einsum("ai,ij,aj->a", v.conj(), op, v).real


def operator_from_kappa(kappa) -> np.ndarray:
    return _hermitize(np.einsum("a,aij->ij", np.asarray(kappa, float), _bell_projectors()))


def basis_dump() -> dict:
    """JSON-ready dump of the Bell projectors and the MUB bases."""

    def enc(a):
        a = np.asarray(a)
        return np.stack([a.real, a.imag], axis=-1).tolist()

    return {
        "d": D,
        "bell_projectors": [
            {"k": k, "l": l, "matrix": enc(_bell_projectors()[D * k + l])}
            for k in range(D)
            for l in range(D)
        ],
        "mub_bases": [{"index": b.index, "vectors": enc(b.vectors)} for b in mub_bases()],
    }
