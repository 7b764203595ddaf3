"""Simultaneous diagonalization of finite abelian symmetry groups.

For a unitary representation of ``F = Z_{p_1} x ... x Z_{p_N}`` on ``C^d``
the projections

    P_t = |F|^{-1} sum_n  prod_j exp(-i 2 pi t_j n_j / p_j)  U_1^{n_1} ... U_N^{n_N}

are mutually orthogonal, resolve the identity, and satisfy
``U_j P_t = exp(i 2 pi t_j / p_j) P_t``.  They decompose the space into
simultaneous eigenspaces labelled by the dual group.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolationError
from .lattice import EXACT_TOL

#: singular values below this fraction of the largest count as zero
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FiniteGroupRep:
    """Unitary representation of ``Z_{p_1} x ... x Z_{p_N}`` given by its generators."""

    orders: tuple[int, ...]
    dim: int
    generators: tuple[np.ndarray, ...]

    @property
    def group_size(self) -> int:
        return int(np.prod(self.orders))

    def dual_labels(self) -> list[tuple[int, ...]]:
        """Dual-group labels in lexicographic order."""
        return list(itertools.product(*(range(p) for p in self.orders)))

    def group_element(self, n: tuple[int, ...]) -> np.ndarray:
        """The operator ``U^n = U_1^{n_1} ... U_N^{n_N}``."""
        out = np.eye(self.dim, dtype=complex)
        for U, nj in zip(self.generators, n):
            out = out @ np.linalg.matrix_power(U, nj)
        return out

    def validate(self, tol: float = EXACT_TOL) -> None:
        """Raise :class:`InvariantViolationError` naming the first failed check."""
        eye = np.eye(self.dim)
        if any(p < 2 for p in self.orders):
            raise InvariantViolationError(f"orders must all be >= 2, got {self.orders}")
        if len(self.generators) != len(self.orders):
            raise InvariantViolationError(
                f"{len(self.generators)} generators for {len(self.orders)} orders")
        for j, (U, p) in enumerate(zip(self.generators, self.orders)):
            if U.shape != (self.dim, self.dim):
                raise InvariantViolationError(f"generator {j} has shape {U.shape}")
            if np.linalg.norm(U.conj().T @ U - eye) > tol:
                raise InvariantViolationError(f"generator {j} is not unitary")
            if np.linalg.norm(np.linalg.matrix_power(U, p) - eye) > tol:
                raise InvariantViolationError(f"generator {j} does not have order {p}")
        for i, j in itertools.combinations(range(len(self.generators)), 2):
            Ui, Uj = self.generators[i], self.generators[j]
            if np.linalg.norm(Ui @ Uj - Uj @ Ui) > tol:
                raise InvariantViolationError(f"generators {i} and {j} do not commute")
        # algebraic compatibility: the |F| group operators are linearly
        # independent, i.e. their Frobenius Gram matrix is nonsingular
        ops = [self.group_element(n) for n in self.dual_labels()]
        gram = np.array([[np.vdot(A, B) for B in ops] for A in ops])
        sing = np.linalg.svd(gram, compute_uv=False)
        if sing[-1] <= RANK_TOL * sing[0]:
            raise InvariantViolationError(
                "representation is not algebraically compatible "
                f"(Gram matrix of group operators is singular, sigma_min/sigma_max = "
                f"{sing[-1] / sing[0]:.3e})")


@dataclass(frozen=True, eq=False)
class FiniteDecomposition:
    """Orthogonal decomposition into simultaneous eigenspaces, one per dual label."""

    labels: tuple[tuple[int, ...], ...]
    projectors: dict[tuple[int, ...], np.ndarray]
    subspace_bases: dict[tuple[int, ...], np.ndarray]

    def rank(self, t: tuple[int, ...]) -> int:
        return self.subspace_bases[t].shape[1]


def bf_projector(rep: FiniteGroupRep, t: tuple[int, ...]) -> np.ndarray:
    """Projection onto the simultaneous eigenspace with dual label ``t``."""
    t = tuple(int(x) for x in t)
    if len(t) != len(rep.orders) or any(not 0 <= tj < pj for tj, pj in zip(t, rep.orders)):
        raise IndexError(f"label {t} outside the dual group of {rep.orders}")
    # precompute generator powers once
    powers = [
        [np.linalg.matrix_power(U, n) for n in range(p)]
        for U, p in zip(rep.generators, rep.orders)
    ]
    P = np.zeros((rep.dim, rep.dim), dtype=complex)
    for n in itertools.product(*(range(p) for p in rep.orders)):
        coeff = 1.0 + 0.0j
        term = np.eye(rep.dim, dtype=complex)
        for j, nj in enumerate(n):
            coeff *= np.exp(-2j * np.pi * t[j] * nj / rep.orders[j])
            term = term @ powers[j][nj]
        P += coeff * term
    return P / rep.group_size


def decompose_finite(rep: FiniteGroupRep, tol: float = EXACT_TOL,
                     probe_count: int = 100, seed: int = 0) -> FiniteDecomposition:
    """Full decomposition of the representation space.

    Validates the representation, builds every projector, extracts an
    orthonormal basis of each range, and cross-checks orthogonality,
    completeness, and Parseval on random probe vectors.
    """
    rep.validate(tol)
    labels = tuple(rep.dual_labels())
    projectors = {t: bf_projector(rep, t) for t in labels}

    bases: dict[tuple[int, ...], np.ndarray] = {}
    for t, P in projectors.items():
        u, s, _ = np.linalg.svd(P)
        rank = int(np.sum(s > RANK_TOL * s[0])) if s[0] > 0 else 0
        bases[t] = u[:, :rank]

    total_rank = sum(b.shape[1] for b in bases.values())
    if total_rank != rep.dim:
        raise InvariantViolationError(
            f"ranks sum to {total_rank}, expected dim {rep.dim}")
    for t1, t2 in itertools.combinations(labels, 2):
        if np.linalg.norm(projectors[t1] @ projectors[t2]) > tol:
            raise InvariantViolationError(f"projectors {t1} and {t2} are not orthogonal")

    rng = np.random.default_rng(seed)
    for _ in range(probe_count):
        phi = rng.normal(size=rep.dim) + 1j * rng.normal(size=rep.dim)
        total = sum(np.linalg.norm(P @ phi) ** 2 for P in projectors.values())
        if abs(total - np.linalg.norm(phi) ** 2) > tol * np.linalg.norm(phi) ** 2:
            raise InvariantViolationError("Parseval identity failed on a probe vector")

    return FiniteDecomposition(labels=labels, projectors=projectors, subspace_bases=bases)
