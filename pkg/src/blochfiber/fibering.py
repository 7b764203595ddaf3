"""Fibered decomposition of lattice operators over the torus.

A verified wandering system turns the commutant structure into plain
linear algebra: an operator ``O`` commuting with the symmetry generators
is fully encoded by its hopping table

    O psi_k = sum_{h,b} alpha^{(k)}_{h,b} U^b psi_h,

and at each torus point ``t`` it acts on the fiber ``C^q`` through the
matrix ``pi_t(O)_{hk} = sum_b alpha^{(k)}_{h,b} exp(i b.t)``.  Vectors
fiber the same way: the component of ``phi = sum alpha_{k,b} U^b psi_k``
along fiber direction ``k`` is the trigonometric polynomial
``f_k(t) = sum_b alpha_{k,b} exp(i b.t)``.

Sign convention: the fiber of the symmetry generator ``U_j`` is
``exp(i t_j)`` times the identity, which puts ``exp(i t)`` in the
top-right corner of the shift fiber matrix.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    AliasingWarning,
    HopRangeError,
    InvariantViolationError,
    NotCovariantError,
    WindowTooLargeError,
)
from .lattice import (
    EXACT_TOL,
    NUMERIC_TOL,
    Label,
    LatticeOperator,
    TruncatedBasis,
    WanderingReport,
    commutes_within,
    verify_wandering,
)

CoeffMap = dict[tuple[int, tuple[int, ...]], complex]
TableMap = dict[tuple[int, int, tuple[int, ...]], complex]


@dataclass(frozen=True, eq=False)
class WanderingDecomposition:
    """A verified bundle of commuting unitary generators and wandering vectors."""

    basis: TruncatedBasis
    generators: tuple[LatticeOperator, ...]
    wandering_vectors: tuple[Label, ...]
    report: WanderingReport

    def __post_init__(self):
        if not self.report.passed:
            raise InvariantViolationError("wandering report did not pass")
        cells = [k for k, _ in self.wandering_vectors]
        if sorted(cells) != list(range(self.basis.q)):
            raise InvariantViolationError(
                f"wandering vectors must cover each cell index exactly once, got {cells}")

    @classmethod
    def build(cls, basis: TruncatedBasis,
              generators: Sequence[LatticeOperator],
              candidates: Sequence[int | Label],
              window: int,
              tol: float = EXACT_TOL) -> "WanderingDecomposition":
        """Verify the wandering property and generator commutation, then assemble."""
        report = verify_wandering(generators, candidates, window, tol=tol)
        if not report.passed:
            raise InvariantViolationError(
                f"candidates are not a wandering system: max_violation="
                f"{report.max_violation:.3e}, cyclic_defect={report.cyclic_defect:.3e}")
        for i, j in itertools.combinations(range(len(generators)), 2):
            ok, value = commutes_within(generators[i], generators[j], tol)
            if not ok:
                raise InvariantViolationError(
                    f"generators {i} and {j} do not commute: interior norm {value:.3e}")
        labels = []
        for c in candidates:
            if isinstance(c, (int, np.integer)):
                labels.append(basis.label_of(int(c)))
            else:
                k, a = c
                labels.append((int(k), tuple(int(x) for x in a)))
        return cls(basis=basis, generators=tuple(generators),
                   wandering_vectors=tuple(labels), report=report)

    @property
    def q(self) -> int:
        return len(self.wandering_vectors)

    @property
    def N(self) -> int:
        return self.basis.N

    @cached_property
    def _cell_to_fiber(self) -> dict[int, int]:
        return {kc: k for k, (kc, _) in enumerate(self.wandering_vectors)}

    def wandering_vector(self, k: int) -> np.ndarray:
        kc, ac = self.wandering_vectors[k]
        return self.basis.basis_vector(kc, ac)

    def orbit_vector(self, k: int, a: Sequence[int]) -> np.ndarray:
        """The lattice vector ``U^a psi_k``."""
        vec = self.wandering_vector(k)
        for j, aj in enumerate(a):
            op = self.generators[j] if aj >= 0 else self.generators[j].adjoint()
            for _ in range(abs(aj)):
                vec = op.apply(vec)
        return vec


@dataclass(frozen=True, eq=False)
class CovariantOperator:
    """Hopping-coefficient table of an operator commuting with the symmetry.

    ``table[(h, k, b)]`` is the amplitude for the operator to send the
    wandering vector ``psi_k`` to ``U^b psi_h``.  The table is exact: the
    sum over ``b`` terminates because the operator has finite hop range.
    """

    q: int
    N: int
    table: TableMap

    @cached_property
    def hop_range(self) -> int:
        return max((max((abs(x) for x in b), default=0)
                    for (_, _, b) in self.table), default=0)

    @classmethod
    def from_table(cls, q: int, N: int, table: Mapping) -> "CovariantOperator":
        clean: TableMap = {}
        for (h, k, b), v in table.items():
            if v != 0:
                clean[(int(h), int(k), tuple(int(x) for x in b))] = complex(v)
        return cls(q=q, N=N, table=clean)

    def adjoint(self) -> "CovariantOperator":
        table: TableMap = {}
        for (h, k, b), v in self.table.items():
            nb = tuple(-x for x in b)
            table[(k, h, nb)] = v.conjugate()
        return CovariantOperator(q=self.q, N=self.N, table=table)

    def hermitian_defect(self) -> float:
        """Largest tablewise deviation between the operator and its adjoint."""
        adj = self.adjoint().table
        keys = set(self.table) | set(adj)
        return max((abs(self.table.get(key, 0.0) - adj.get(key, 0.0)) for key in keys),
                   default=0.0)

    def is_hermitian(self, tol: float = EXACT_TOL) -> bool:
        return self.hermitian_defect() <= tol


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid ``t = 2 pi l / L`` on the torus, one weight ``L^-N`` per node."""

    N: int
    L: int

    def __post_init__(self):
        if self.N < 1 or self.L < 1:
            raise ValueError(f"need N, L >= 1, got N={self.N} L={self.L}")

    @property
    def node_count(self) -> int:
        return self.L**self.N

    @property
    def weight(self) -> float:
        return 1.0 / self.node_count

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.N

    @cached_property
    def axis(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.L) / self.L

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.N), indexing="ij"))

    def node(self, l: tuple[int, ...]) -> tuple[float, ...]:
        return tuple(self.axis[j] for j in l)

    def phase(self, b: Sequence[int]) -> np.ndarray:
        """The field ``exp(i b.t)`` over the grid."""
        if len(b) != self.N:
            raise ValueError(f"offset {tuple(b)} has length {len(b)}, expected {self.N}")
        expo = np.zeros(self.shape, dtype=float)
        for bj, tj in zip(b, self.mesh):
            if bj:
                expo = expo + bj * tj
        return np.exp(1j * expo)


@dataclass(frozen=True, eq=False)
class FiberedSamples:
    """Field of fiber values (q-vectors or q x q matrices) over a torus grid."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape[: self.grid.N] != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not cover grid {self.grid.shape}")

    @property
    def fiber_shape(self) -> tuple[int, ...]:
        return self.values.shape[self.grid.N:]


def covariant_from_lattice(O: LatticeOperator, dec: WanderingDecomposition,
                           tol: float = NUMERIC_TOL) -> CovariantOperator:
    """Extract the exact hopping table of a symmetry-commuting operator.

    Raises :class:`NotCovariantError` when ``O`` fails to commute with a
    generator on the masked interior, and :class:`HopRangeError` when the
    truncation is too small to certify that.
    """
    basis = O.basis
    margin = 2 * max(O.hop_range, max(U.hop_range for U in dec.generators))
    if margin > basis.M:
        raise HopRangeError(
            f"hop range {O.hop_range} needs interior margin {margin} > M={basis.M}")
    for j, U in enumerate(dec.generators):
        ok, value = commutes_within(O, U, tol)
        if not ok:
            raise NotCovariantError(
                f"[O, U_{j + 1}] has interior norm {value:.3e} > {tol}")

    support = max((max((abs(x) for x in a), default=0)
                   for _, a in dec.wandering_vectors))
    if support + O.hop_range > basis.M:
        raise HopRangeError(
            f"image of a wandering vector (support {support}, hop {O.hop_range}) "
            f"leaves the truncation box M={basis.M}")

    cell_to_fiber = dec._cell_to_fiber
    table: TableMap = {}
    cols = {basis.index_of(kc, ac): k
            for k, (kc, ac) in enumerate(dec.wandering_vectors)}
    for (r, c), amp in O.entries.items():
        k = cols.get(c)
        if k is None:
            continue
        kr, ar = basis.label_of(r)
        h = cell_to_fiber[kr]
        _, ah = dec.wandering_vectors[h]
        b = tuple(x - y for x, y in zip(ar, ah))
        table[(h, k, b)] = table.get((h, k, b), 0.0) + amp
    return CovariantOperator.from_table(dec.q, dec.N, table)


def fiber_operator(cov: CovariantOperator, t: Sequence[float]) -> np.ndarray:
    """The q x q fiber matrix ``pi_t`` of a covariant operator at one torus point."""
    t = np.asarray(t, dtype=float)
    if t.shape != (cov.N,):
        raise ValueError(f"torus point must have {cov.N} components, got {t.shape}")
    F = np.zeros((cov.q, cov.q), dtype=complex)
    for (h, k, b), alpha in cov.table.items():
        F[h, k] += alpha * np.exp(1j * float(np.dot(b, t)))
    return F


def fiber_field(cov: CovariantOperator, grid: TorusGrid) -> FiberedSamples:
    """Fiber matrices of a covariant operator sampled over a whole grid."""
    if grid.N != cov.N:
        raise ValueError(f"grid dimension {grid.N} != operator dimension {cov.N}")
    values = np.zeros(grid.shape + (cov.q, cov.q), dtype=complex)
    for (h, k, b), alpha in cov.table.items():
        values[..., h, k] += alpha * grid.phase(b)
    return FiberedSamples(grid=grid, values=values)


def compose_covariant(A: CovariantOperator, B: CovariantOperator,
                      max_hop: int | None = None) -> CovariantOperator:
    """Table of the operator product ``A B`` (convolution over hop offsets)."""
    if (A.q, A.N) != (B.q, B.N):
        raise ValueError(f"incompatible shapes ({A.q},{A.N}) vs ({B.q},{B.N})")
    table: TableMap = {}
    for (m, k, c2), beta in B.table.items():
        for (h, m2, c1), alpha in A.table.items():
            if m2 != m:
                continue
            b = tuple(x + y for x, y in zip(c1, c2))
            key = (h, k, b)
            table[key] = table.get(key, 0.0) + alpha * beta
    out = CovariantOperator.from_table(A.q, A.N, table)
    if max_hop is not None and out.hop_range > max_hop:
        raise HopRangeError(f"composed hop range {out.hop_range} exceeds {max_hop}")
    return out


def identity_covariant(q: int, N: int) -> CovariantOperator:
    zero = (0,) * N
    return CovariantOperator(q=q, N=N,
                             table={(k, k, zero): 1.0 + 0.0j for k in range(q)})


def normalize_coeffs(coeffs: Mapping, N: int) -> CoeffMap:
    """Coerce keys to ``(k, (a_1, ..., a_N))`` form, dropping exact zeros."""
    out: CoeffMap = {}
    for (k, a), v in coeffs.items():
        a = (int(a),) if isinstance(a, (int, np.integer)) else tuple(int(x) for x in a)
        if len(a) != N:
            raise ValueError(f"multi-index {a} has length {len(a)}, expected {N}")
        if v != 0:
            out[(int(k), a)] = complex(v)
    return out


def support_radius(coeffs: CoeffMap) -> int:
    return max((max((abs(x) for x in a), default=0) for _, a in coeffs), default=0)


def coeff_norm(coeffs: CoeffMap) -> float:
    """Hilbert-space norm of the vector the coefficients represent."""
    return math.sqrt(sum(abs(v) ** 2 for v in coeffs.values()))


def transform_vector(coeffs: Mapping, grid: TorusGrid, q: int | None = None,
                     ) -> FiberedSamples:
    """Fiber components ``f_k(t) = sum_b alpha_{k,b} exp(i b.t)`` over the grid."""
    cmap = normalize_coeffs(coeffs, grid.N)
    if q is None:
        q = max((k for k, _ in cmap), default=0) + 1
    values = np.zeros(grid.shape + (q,), dtype=complex)
    for (k, b), alpha in cmap.items():
        values[..., k] += alpha * grid.phase(b)
    return FiberedSamples(grid=grid, values=values)


def inverse_transform(samples: FiberedSamples, residual_tol: float = NUMERIC_TOL,
                      ) -> CoeffMap:
    """Recover hopping coefficients from fiber samples by discrete Fourier inversion.

    Frequencies are kept strictly below the grid Nyquist radius; if the
    round-trip residual exceeds ``residual_tol`` an :class:`AliasingWarning`
    is emitted (the input was not bandlimited on this grid).
    """
    grid = samples.grid
    if len(samples.fiber_shape) != 1:
        raise ValueError("inverse transform expects q-vector samples")
    q = samples.fiber_shape[0]
    keep = (grid.L - 1) // 2
    coeffs: CoeffMap = {}
    for k in range(q):
        # alpha_{k,b} = L^-N sum_l f_k(t_l) exp(-i b.t_l), which is the
        # forward DFT (numpy's inverse transform carries the e^{+i} kernel)
        spec = np.fft.fftn(samples.values[..., k]) / grid.node_count
        for freq in itertools.product(range(grid.L), repeat=grid.N):
            b = tuple(f if f <= grid.L // 2 else f - grid.L for f in freq)
            if max((abs(x) for x in b), default=0) > keep:
                continue
            v = complex(spec[freq])
            if v != 0:
                coeffs[(k, b)] = v
    resampled = transform_vector(coeffs, grid, q=q)
    residual = float(np.max(np.abs(resampled.values - samples.values)))
    if residual > residual_tol:
        warnings.warn(
            f"round-trip residual {residual:.3e} exceeds {residual_tol:.1e}; "
            f"samples are aliased on an L={grid.L} grid", AliasingWarning)
    return coeffs


def module_norm(coeffs: Mapping, grid: TorusGrid, q: int | None = None) -> float:
    """Grid sup-norm ``max_t ||phi(t)||`` of the fibered vector.

    Dominates the Hilbert-space norm because the torus carries normalized
    measure; monotone nondecreasing under grid refinement.
    """
    samples = transform_vector(coeffs, grid, q=q)
    return float(np.sqrt(np.sum(np.abs(samples.values) ** 2, axis=-1)).max())


def parseval_error(coeffs: Mapping, grid: TorusGrid, q: int | None = None) -> float:
    """|quadrature of ||phi(t)||^2 - ||phi||^2|; zero for bandlimited vectors."""
    cmap = normalize_coeffs(coeffs, grid.N)
    samples = transform_vector(cmap, grid, q=q)
    quad = float(np.sum(np.abs(samples.values) ** 2)) / grid.node_count
    return abs(quad - coeff_norm(cmap) ** 2)


def haar_moment_check(dec: WanderingDecomposition, k: int, a: Sequence[int],
                      grid: TorusGrid) -> float:
    """Residual ``|(psi_k; U^a psi_k) - moment_a|`` of the spectral measure.

    ``moment_a`` is the grid quadrature of ``z^a``, which equals
    ``delta_{a,0}`` exactly below the Nyquist radius; a vanishing residual
    for all windows pins the basic measure to normalized Haar.
    """
    a = tuple(int(x) for x in a)
    basis = dec.basis
    hop = max(U.hop_range for U in dec.generators)
    support = max((abs(x) for _, ac in dec.wandering_vectors for x in ac), default=0)
    reach = max((abs(x) for x in a), default=0)
    if support + reach * max(hop, 1) > basis.M:
        raise WindowTooLargeError(
            f"moment index {a} hops past the truncation box M={basis.M}")
    psi = dec.wandering_vector(k)
    shifted = dec.orbit_vector(k, a)
    inner = complex(np.vdot(psi, shifted))
    moment = complex(np.sum(grid.phase(a))) / grid.node_count
    return abs(inner - moment)
