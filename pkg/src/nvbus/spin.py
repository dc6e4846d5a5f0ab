"""Dense spin operators, Jordan-Wigner fermions and Gaussian unitaries.

Conventions used throughout the package:

* spin-1/2 local basis is ordered ``(down, up)`` so the basis index equals
  the excitation (fermion occupation) number, ``S_z = diag(-1/2, +1/2)``;
* spin-1 (NV electron) local basis is ordered ``m_s = (-1, 0, +1)``;
* tensor products put site 0 in the most significant position, matching
  ``np.kron(site0, site1, ...)``.
"""
from __future__ import annotations

from functools import reduce

import numpy as np
import scipy.linalg

SZ = np.diag([-0.5, 0.5])
SP = np.array([[0.0, 0.0], [1.0, 0.0]])  # |up><down|
SM = SP.T.copy()
SX = 0.5 * (SP + SM)
SY = -0.5j * (SP - SM)
ID2 = np.eye(2)
PAULI_X = 2 * SX
PAULI_Z = 2 * SZ
PAULI_Y = 2 * SY

SZ1 = np.diag([-1.0, 0.0, 1.0])
SP1 = np.sqrt(2.0) * np.diag([1.0, 1.0], -1)
SX1 = 0.5 * (SP1 + SP1.T)

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def kron_all(ops):
    return reduce(np.kron, ops)


def embed(op, site: int, dims) -> np.ndarray:
    """Place a single-site operator at ``site`` of a product space."""
    left = int(np.prod(dims[:site], dtype=int))
    right = int(np.prod(dims[site + 1:], dtype=int))
    out = np.kron(np.eye(left), op) if left > 1 else np.asarray(op)
    return np.kron(out, np.eye(right)) if right > 1 else out


def embed_pair(op_a, a: int, op_b, b: int, dims) -> np.ndarray:
    return embed(op_a, a, dims) @ embed(op_b, b, dims)


def bit(n_sites: int, site: int) -> int:
    """Bit mask of ``site`` in a spin-1/2 register of ``n_sites``."""
    return 1 << (n_sites - 1 - site)


def single_excitation_indices(n_sites: int) -> np.ndarray:
    """Basis index of the state with only ``site`` excited, for every site."""
    return np.array([bit(n_sites, i) for i in range(n_sites)])


def excitation_number(n_sites: int) -> np.ndarray:
    idx = np.arange(2**n_sites)
    return np.array([bin(i).count("1") for i in idx])


def xx_chain_dense(couplings, fields, n_sites: int, pairs=None) -> np.ndarray:
    """Real dense matrix of ``sum J (S+_i S-_j + h.c.) + sum h_i Sz_i``.

    ``couplings`` is either a list of nearest-neighbour values or, with
    ``pairs``, a list matching explicit ``(i, j)`` site pairs.  Built with
    bit operations so that 12 sites stays cheap.
    """
    dim = 2**n_sites
    idx = np.arange(dim)
    H = np.zeros((dim, dim))
    if pairs is None:
        pairs = [(i, i + 1) for i in range(n_sites - 1)]
    for (i, j), J in zip(pairs, couplings):
        if J == 0:
            continue
        bi, bj = bit(n_sites, i), bit(n_sites, j)
        differ = ((idx & bi) > 0) != ((idx & bj) > 0)
        src = idx[differ]
        H[src ^ (bi | bj), src] += J
    diag = np.zeros(dim)
    for i, h in enumerate(fields):
        if h:
            diag += h * (((idx & bit(n_sites, i)) > 0) - 0.5)
    H[idx, idx] += diag
    return H


def sz_dense_diagonal(n_sites: int, site: int) -> np.ndarray:
    idx = np.arange(2**n_sites)
    return ((idx & bit(n_sites, site)) > 0) - 0.5


def annihilators(n_sites: int) -> list[np.ndarray]:
    """Jordan-Wigner annihilation operators ``c_j = prod_{l<j} (-1)^{n_l} S-_j``."""
    parity = np.diag([1.0, -1.0])
    ops = []
    for j in range(n_sites):
        factors = [parity] * j + [SM] + [ID2] * (n_sites - j - 1)
        ops.append(kron_all(factors))
    return ops


def quadratic_to_dense(h: np.ndarray, offset: float = 0.0) -> np.ndarray:
    """Many-body operator ``sum_ij h_ij c+_i c_j + offset`` on the full space."""
    n = h.shape[0]
    cs = annihilators(n)
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for i in range(n):
        for j in range(n):
            if h[i, j] != 0:
                out += h[i, j] * (cs[i].T @ cs[j])
    out += offset * np.eye(dim)
    return out


def gaussian_unitary(u: np.ndarray) -> np.ndarray:
    """Number-conserving many-body unitary whose one-particle action is ``u``.

    ``c_j -> sum_i u_ij c_i`` under conjugation; the vacuum is left
    untouched.  Uses the complex Schur form so degenerate spectra give an
    orthonormal eigenbasis.
    """
    T, Z = scipy.linalg.schur(np.asarray(u, dtype=complex), output="complex")
    phases = np.angle(np.diag(T))
    generator = (Z * phases) @ Z.conj().T  # u = exp(i * generator)
    return scipy.linalg.expm(1j * quadratic_to_dense(generator))
