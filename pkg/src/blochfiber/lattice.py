"""Truncated lattice Hilbert spaces and sparse operators on them.

The computational Hilbert space is spanned by basis vectors labelled
``(k, a)`` with a cell index ``k`` in ``{0..q-1}`` and a lattice
multi-index ``a`` in ``Z^N`` truncated to the box ``max_j |a_j| <= M``.
Operators are sparse complex matrices on this basis.  Because the box is
finite, every norm or commutator is evaluated on a "safe interior" of the
box so that finite-hop operators behave exactly as their infinite-lattice
counterparts there.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BasisMismatchError,
    BasisSizeError,
    WindowTooLargeError,
)

DEFAULT_DIM_CAP = 10**6

#: tolerance for identities that are exact in the model (phases, Gram matrices)
EXACT_TOL = 1e-12
#: tolerance for quantities passing through quadrature or eigensolvers
NUMERIC_TOL = 1e-8


Label = tuple[int, tuple[int, ...]]


@dataclass(frozen=True, eq=False)
class TruncatedBasis:
    """Finite index set ``{(k, a)}`` with a fixed lexicographic flattening.

    ``k`` runs over ``{0..q-1}`` and each component of ``a`` over
    ``{-M..M}``, so ``dim = q * (2M+1)**N``.  Flat indices are ordered
    lexicographically in ``(k, a_1, ..., a_N)``.
    """

    q: int
    N: int
    M: int

    def __post_init__(self):
        if self.q < 1 or self.N < 1 or self.M < 1:
            raise ValueError(f"need q, N, M >= 1, got q={self.q} N={self.N} M={self.M}")

    @property
    def side(self) -> int:
        return 2 * self.M + 1

    @property
    def dim(self) -> int:
        return self.q * self.side**self.N

    def index_of(self, k: int, a: Sequence[int]) -> int:
        """Flat index of the basis vector ``(k, a)``."""
        if not 0 <= k < self.q:
            raise IndexError(f"cell index k={k} outside 0..{self.q - 1}")
        if len(a) != self.N:
            raise IndexError(f"multi-index {a!r} has length {len(a)}, expected {self.N}")
        flat = k
        for aj in a:
            if abs(aj) > self.M:
                raise IndexError(f"multi-index {tuple(a)!r} outside the box |a_j| <= {self.M}")
            flat = flat * self.side + (aj + self.M)
        return flat

    def label_of(self, i: int) -> Label:
        """Inverse of :meth:`index_of`."""
        if not 0 <= i < self.dim:
            raise IndexError(f"flat index {i} outside 0..{self.dim - 1}")
        rest, a = i, []
        for _ in range(self.N):
            rest, r = divmod(rest, self.side)
            a.append(r - self.M)
        return rest, tuple(reversed(a))

    def contains(self, k: int, a: Sequence[int]) -> bool:
        return 0 <= k < self.q and all(abs(aj) <= self.M for aj in a)

    def basis_vector(self, k: int, a: Sequence[int]) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=complex)
        vec[self.index_of(k, a)] = 1.0
        return vec

    def interior_indices(self, radius: int) -> np.ndarray:
        """Flat indices of all ``(k, a)`` with ``max_j |a_j| <= radius``."""
        if radius < 0:
            return np.empty(0, dtype=int)
        radius = min(radius, self.M)
        idx = [
            self.index_of(k, a)
            for k in range(self.q)
            for a in itertools.product(range(-radius, radius + 1), repeat=self.N)
        ]
        return np.array(sorted(idx), dtype=int)

    def labels(self) -> Iterable[Label]:
        return (self.label_of(i) for i in range(self.dim))


def make_basis(q: int, N: int, M: int, dim_cap: int = DEFAULT_DIM_CAP) -> TruncatedBasis:
    """Build a :class:`TruncatedBasis`, refusing dimensions above ``dim_cap``."""
    if q < 1 or N < 1 or M < 1:
        raise ValueError(f"need q, N, M >= 1, got q={q} N={N} M={M}")
    dim = q * (2 * M + 1) ** N
    if dim > dim_cap:
        raise BasisSizeError(f"dim {dim} = {q}*(2*{M}+1)**{N} exceeds the cap {dim_cap}")
    return TruncatedBasis(q=q, N=N, M=M)


@dataclass(frozen=True, eq=False)
class LatticeOperator:
    """Sparse complex operator on a :class:`TruncatedBasis`.

    ``entries`` maps ``(row, col)`` flat index pairs to amplitudes; exact
    zeros are never stored.  ``hop_range`` is the largest sup-norm offset
    between the column and row multi-indices of any stored entry.
    """

    basis: TruncatedBasis
    entries: dict[tuple[int, int], complex]

    def __post_init__(self):
        for key, amp in self.entries.items():
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise ValueError(f"non-finite amplitude at {key}")

    @cached_property
    def hop_range(self) -> int:
        rng = 0
        for (r, c) in self.entries:
            _, ar = self.basis.label_of(r)
            _, ac = self.basis.label_of(c)
            rng = max(rng, max((abs(x - y) for x, y in zip(ar, ac)), default=0))
        return rng

    @cached_property
    def _coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        items = sorted(self.entries.items())
        rows = np.array([r for (r, _), _ in items], dtype=int)
        cols = np.array([c for (_, c), _ in items], dtype=int)
        amps = np.array([v for _, v in items], dtype=complex)
        return rows, cols, amps

    @classmethod
    def from_entries(cls, basis: TruncatedBasis,
                     entries: Mapping[tuple[int, int], complex]) -> "LatticeOperator":
        clean = {k: complex(v) for k, v in entries.items() if v != 0}
        return cls(basis=basis, entries=clean)

    @classmethod
    def from_action(cls, basis: TruncatedBasis,
                    action: Callable[[int, tuple[int, ...]], Iterable[tuple[Label, complex]]],
                    ) -> "LatticeOperator":
        """Build an operator column by column from its action on basis vectors.

        ``action(k, a)`` yields ``((k2, a2), amp)`` terms; targets outside
        the truncation box are silently dropped.
        """
        entries: dict[tuple[int, int], complex] = {}
        for col in range(basis.dim):
            k, a = basis.label_of(col)
            for (k2, a2), amp in action(k, a):
                if amp != 0 and basis.contains(k2, a2):
                    key = (basis.index_of(k2, a2), col)
                    entries[key] = entries.get(key, 0.0) + complex(amp)
        return cls.from_entries(basis, entries)

    @classmethod
    def identity(cls, basis: TruncatedBasis) -> "LatticeOperator":
        return cls(basis=basis, entries={(i, i): 1.0 + 0.0j for i in range(basis.dim)})

    def _check_same_basis(self, other: "LatticeOperator") -> None:
        if self.basis is not other.basis and self.basis != other.basis:
            raise BasisMismatchError(
                f"operands on different bases: {self.basis} vs {other.basis}")

    def apply(self, vec: np.ndarray) -> np.ndarray:
        rows, cols, amps = self._coo
        out = np.zeros(self.basis.dim, dtype=complex)
        np.add.at(out, rows, amps * vec[cols])
        return out

    def adjoint(self) -> "LatticeOperator":
        return LatticeOperator(
            basis=self.basis,
            entries={(c, r): v.conjugate() for (r, c), v in self.entries.items()},
        )

    def __matmul__(self, other: "LatticeOperator") -> "LatticeOperator":
        self._check_same_basis(other)
        by_row: dict[int, list[tuple[int, complex]]] = {}
        for (r, c), v in other.entries.items():
            by_row.setdefault(r, []).append((c, v))
        entries: dict[tuple[int, int], complex] = {}
        for (r, c), v in self.entries.items():
            for c2, v2 in by_row.get(c, ()):
                key = (r, c2)
                acc = entries.get(key, 0.0) + v * v2
                entries[key] = acc
        return LatticeOperator.from_entries(self.basis, entries)

    def __add__(self, other: "LatticeOperator") -> "LatticeOperator":
        self._check_same_basis(other)
        entries = dict(self.entries)
        for key, v in other.entries.items():
            entries[key] = entries.get(key, 0.0) + v
        return LatticeOperator.from_entries(self.basis, entries)

    def __sub__(self, other: "LatticeOperator") -> "LatticeOperator":
        return self + (-1.0) * other

    def __rmul__(self, scalar: complex) -> "LatticeOperator":
        return LatticeOperator.from_entries(
            self.basis, {key: scalar * v for key, v in self.entries.items()})

    def to_dense(self) -> np.ndarray:
        rows, cols, amps = self._coo
        mat = np.zeros((self.basis.dim, self.basis.dim), dtype=complex)
        mat[rows, cols] = amps
        return mat

    def norm_bound(self) -> float:
        """Cheap rigorous upper bound ``sqrt(||.||_1 ||.||_inf)`` on the operator norm."""
        if not self.entries:
            return 0.0
        row_sums: dict[int, float] = {}
        col_sums: dict[int, float] = {}
        for (r, c), v in self.entries.items():
            m = abs(v)
            row_sums[r] = row_sums.get(r, 0.0) + m
            col_sums[c] = col_sums.get(c, 0.0) + m
        return math.sqrt(max(row_sums.values()) * max(col_sums.values()))


def masked_norm(op: LatticeOperator, interior_radius: int) -> float:
    """Largest singular value of ``op`` restricted to interior columns.

    Columns with ``|a|_sup <= interior_radius`` are kept; on them a
    finite-hop truncated operator agrees exactly with its infinite-lattice
    version, so the value is free of boundary artifacts.  Zero rows and
    columns are dropped before the dense factorization, which keeps exact
    cancellations cheap at any truncation size.
    """
    if interior_radius < 0:
        raise WindowTooLargeError(
            f"interior radius {interior_radius} < 0: truncation M={op.basis.M} too small")
    keep = set(op.basis.interior_indices(interior_radius).tolist())
    masked = {key: v for key, v in op.entries.items() if key[1] in keep}
    if not masked:
        return 0.0
    rows = {r: i for i, r in enumerate(sorted({r for r, _ in masked}))}
    cols = {c: j for j, c in enumerate(sorted({c for _, c in masked}))}
    block = np.zeros((len(rows), len(cols)), dtype=complex)
    for (r, c), v in masked.items():
        block[rows[r], cols[c]] = v
    return float(np.linalg.svd(block, compute_uv=False)[0])


def commutator_norm(A: LatticeOperator, B: LatticeOperator, phase: complex = 1.0) -> float:
    """Masked-interior operator norm of ``A B - phase * B A``.

    A zero (within tolerance) certifies the twisted commutation relation
    ``A B = phase * B A`` on the interior of the truncation.  The interior
    excludes a margin of twice the larger hop range, the depth of the
    expression.
    """
    A._check_same_basis(B)
    if not math.isclose(abs(phase), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError(f"|phase| must be 1, got {abs(phase)}")
    comm = A @ B - phase * (B @ A)
    depth_margin = 2 * max(A.hop_range, B.hop_range)
    return masked_norm(comm, A.basis.M - depth_margin)


def commutator_bound(A: LatticeOperator, B: LatticeOperator, phase: complex = 1.0) -> float:
    """Upper bound on :func:`commutator_norm`, cheap enough for large bases."""
    A._check_same_basis(B)
    return (A @ B - phase * (B @ A)).norm_bound()


def commutes_within(A: LatticeOperator, B: LatticeOperator, tol: float,
                    phase: complex = 1.0) -> tuple[bool, float]:
    """Decide twisted commutation, trying the cheap bound before the exact norm.

    Returns ``(ok, value)`` where ``value`` is the bound when it already
    certifies commutation and the exact masked norm otherwise.
    """
    bound = commutator_bound(A, B, phase)
    if bound <= tol:
        return True, bound
    value = commutator_norm(A, B, phase)
    return value <= tol, value


def unitary_defect(U: LatticeOperator, tol: float = EXACT_TOL) -> float:
    """Masked-interior norm of ``U^t U - 1``, zero for unitaries.

    Uses the cheap rigorous bound when it already certifies unitarity and
    falls back to the exact masked singular value otherwise.
    """
    defect = U.adjoint() @ U - LatticeOperator.identity(U.basis)
    bound = defect.norm_bound()
    if bound <= tol:
        return bound
    return masked_norm(defect, U.basis.M - 2 * U.hop_range)


@dataclass(frozen=True)
class WanderingReport:
    """Outcome of a wandering-system verification.

    ``max_violation`` is the largest deviation of the orbit Gram matrix
    from the identity over the tested window; ``cyclic_defect`` measures
    how far the orbit falls short of spanning the safe interior block.
    """

    passed: bool
    max_violation: float
    cyclic_defect: float
    failures: tuple = field(default=())
    window: int = 0
    tolerance: float = EXACT_TOL


def _orbit_vectors(generators: Sequence[LatticeOperator],
                   start: np.ndarray, window: int,
                   ) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """All ``U^a start`` for ``|a|_sup <= window``, in lexicographic order of ``a``.

    Powers are applied axis by axis (``U_1^{a_1} ... U_N^{a_N}``) so the
    result is deterministic even for non-commuting inputs.
    """
    N = len(generators)
    vecs: dict[tuple[int, ...], np.ndarray] = {(0,) * N: start}
    for j, U in enumerate(generators):
        Uadj = U.adjoint()
        extended: dict[tuple[int, ...], np.ndarray] = {}
        for a, v in vecs.items():
            extended[a] = v
            vp = v
            vm = v
            for step in range(1, window + 1):
                vp = U.apply(vp)
                vm = Uadj.apply(vm)
                ap = list(a); ap[j] = step
                am = list(a); am[j] = -step
                extended[tuple(ap)] = vp
                extended[tuple(am)] = vm
        vecs = extended
    return sorted(vecs.items())


def verify_wandering(generators: Sequence[LatticeOperator],
                     candidates: Sequence[int | Label],
                     window: int,
                     tol: float = EXACT_TOL,
                     max_failures: int = 1000) -> WanderingReport:
    """Check that ``candidates`` form a wandering system for the generators.

    Two conditions are tested on the window ``|a|_sup <= window``:

    * orthonormality of the orbit ``{U^a psi_k}`` (the Gram matrix of the
      family equals the identity up to ``tol``);
    * span completeness: the orbit restricted to the safe interior block
      has full rank there, the finite shadow of cyclicity.

    ``candidates`` may be flat basis indices or ``(k, a)`` labels.
    """
    if not generators:
        raise ValueError("need at least one generator")
    basis = generators[0].basis
    for U in generators[1:]:
        generators[0]._check_same_basis(U)
    if len(generators) != basis.N:
        raise ValueError(f"{len(generators)} generators for an N={basis.N} basis")

    labels: list[Label] = []
    for c in candidates:
        if isinstance(c, (int, np.integer)):
            labels.append(basis.label_of(int(c)))
        else:
            k, a = c
            labels.append((int(k), tuple(int(x) for x in a)))

    hop = max(U.hop_range for U in generators)
    support = max((max(abs(x) for x in a) if a else 0) for _, a in labels)
    if window > basis.M - hop:
        raise WindowTooLargeError(
            f"window {window} > M - hop_range = {basis.M} - {hop}")
    if support + window * max(hop, 1) > basis.M:
        raise WindowTooLargeError(
            f"orbit of candidates (support {support}) under window {window} "
            f"hops past the truncation box M={basis.M}")

    orbits: list[tuple[int, tuple[int, ...], np.ndarray]] = []
    for k, (kc, ac) in enumerate(labels):
        for a, v in _orbit_vectors(generators, basis.basis_vector(kc, ac), window):
            orbits.append((k, a, v))

    V = np.stack([v for _, _, v in orbits], axis=1)
    gram = V.conj().T @ V
    expected = np.diag(np.diag(gram).real)  # ||U^a psi_k||^2 on the diagonal
    deviation = np.abs(gram - expected)
    max_violation = float(deviation.max(initial=0.0))

    failures = []
    if max_violation > tol:
        bad = np.argwhere(deviation > tol)
        for i, j in bad[np.lexsort((bad[:, 1], bad[:, 0]))]:
            k, a, _ = orbits[i]
            h, b, _ = orbits[j]
            failures.append((k, h, a, b, complex(gram[i, j])))
            if len(failures) >= max_failures:
                break

    span_radius = window - support
    block = basis.interior_indices(span_radius)
    needed = len(block)
    if needed == 0:
        cyclic_defect = 0.0
    else:
        sing = np.linalg.svd(V[block, :], compute_uv=False)
        s_needed = float(sing[needed - 1]) if len(sing) >= needed else 0.0
        cyclic_defect = max(0.0, 1.0 - s_needed)

    return WanderingReport(
        passed=(max_violation <= tol and cyclic_defect <= tol),
        max_violation=max_violation,
        cyclic_defect=cyclic_defect,
        failures=tuple(failures),
        window=window,
        tolerance=tol,
    )


def _l1_ball_size(N: int, m: int) -> int:
    count = 0
    for a in itertools.product(range(-m, m + 1), repeat=N):
        if sum(abs(x) for x in a) <= m:
            count += 1
    return count


def seminorm_pm(coeffs: Mapping[tuple[int, tuple[int, ...]], complex], m: int) -> float:
    """Filtration seminorm ``p_m`` of a coefficient vector.

    ``p_m(phi)^2 = D_m * sum |alpha_{k,a}|^2`` over ``0 <= k <= m`` and
    ``|a|_1 <= m``, where ``D_m`` counts all index pairs in that range
    (cell index unbounded above by construction of the filtration).
    Monotone: ``p_m <= p_{m+1}``.
    """
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    if not coeffs:
        return 0.0
    N = len(next(iter(coeffs))[1])
    total = 0.0
    for (k, a), alpha in coeffs.items():
        if len(a) != N:
            raise ValueError(f"inconsistent multi-index length in key {(k, a)!r}")
        if 0 <= k <= m and sum(abs(x) for x in a) <= m:
            total += abs(alpha) ** 2
    D_m = (m + 1) * _l1_ball_size(N, m)
    return math.sqrt(D_m * total)
