"""Concrete lattice models packaged as generators + wandering system + observables.

Each constructor returns a :class:`ModelInstance` whose wandering check has
passed and whose named observables are exact covariant tables.  The basis
labels ``(k, a)`` encode the physical lattice site: for the chain models
the site is ``n = k + q * a``; for the magnetic square lattice the site is
``(m, n) = (k + q * a_1, a_2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidFluxError
from .fibering import CovariantOperator, WanderingDecomposition, covariant_from_lattice
from .finitegroup import FiniteGroupRep
from .lattice import LatticeOperator, TruncatedBasis, make_basis

DEFAULT_M_1D = 12
DEFAULT_M_2D = 6


@dataclass(frozen=True, eq=False)
class ModelInstance:
    """A physical frame: verified decomposition plus named observables."""

    name: str
    decomposition: WanderingDecomposition
    observables: dict[str, CovariantOperator]
    lattice_ops: dict[str, LatticeOperator]
    flux: Fraction | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def q(self) -> int:
        return self.decomposition.q

    @property
    def N(self) -> int:
        return self.decomposition.N

    def hamiltonian(self) -> CovariantOperator:
        return self.observables["hamiltonian"]


def _check_flux(p: int, q: int) -> Fraction:
    if q < 1:
        raise InvalidFluxError(f"denominator q={q} must be >= 1")
    if math.gcd(p, q) != 1:
        raise InvalidFluxError(f"flux {p}/{q} is not reduced: gcd = {math.gcd(p, q)}")
    return Fraction(p, q)


def _cell_shift(basis: TruncatedBasis, axis: int) -> LatticeOperator:
    """Unitary shift ``(k, a) -> (k, a + e_axis)``: a symmetry generator."""
    def action(k, a):
        a2 = list(a)
        a2[axis] += 1
        return [((k, tuple(a2)), 1.0)]
    return LatticeOperator.from_action(basis, action)


def _site_shift_1d(basis: TruncatedBasis, axis: int = 0) -> LatticeOperator:
    """Unitary shift by one site, ``n -> n + 1``, with carry into the cell index."""
    def action(k, a):
        if k + 1 < basis.q:
            return [((k + 1, a), 1.0)]
        a2 = list(a)
        a2[axis] += 1
        return [((0, tuple(a2)), 1.0)]
    return LatticeOperator.from_action(basis, action)


def mathieu_model(p: int, q: int, M: int = DEFAULT_M_1D,
                  window: int | None = None) -> ModelInstance:
    """Rotation-algebra pair at rational deformation ``p/q`` on the chain.

    In the Fourier basis the generators act as ``u e_n = e_{n+1}`` and
    ``v e_n = exp(-i 2 pi n p/q) e_n``, so ``u v = exp(i 2 pi p/q) v u``.
    The commutant is generated by ``w = u^q``; the wandering vectors are
    ``e_0, ..., e_{q-1}`` and the hamiltonian is ``u + u^t + v + v^t``.
    """
    flux = _check_flux(p, q)
    if M < 3:
        raise ValueError(f"need M >= 3, got {M}")
    basis = make_basis(q, 1, M)
    u = _site_shift_1d(basis)
    # site n = k + q a gives phase exp(-i 2 pi (k + q a) p / q) = exp(-i 2 pi k p / q)
    v = LatticeOperator.from_action(
        basis, lambda k, a: [((k, a), np.exp(-2j * np.pi * k * p / q))])
    w = _cell_shift(basis, 0)

    if window is None:
        window = min(6, M - 1)
    dec = WanderingDecomposition.build(
        basis, [w], [(k, (0,)) for k in range(q)], window)

    udag, vdag = u.adjoint(), v.adjoint()
    h = u + udag + v + vdag
    lattice_ops = {"u": u, "v": v, "w": w, "hamiltonian": h}
    observables = {name: covariant_from_lattice(op, dec)
                   for name, op in lattice_ops.items() if name != "w"}
    return ModelInstance(
        name=f"mathieu(p={p},q={q})",
        decomposition=dec,
        observables=observables,
        lattice_ops=lattice_ops,
        flux=flux,
        metadata={"convention": "u shifts the Fourier index up; v carries the phase"},
    )


def mathieu_fiber_closed_form(p: int, q: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form fiber matrices ``(u(t), v(t))`` of the rotation pair.

    ``u(t)`` has ones on the subdiagonal and ``exp(i t)`` in the top-right
    corner; ``v(t) = diag(exp(-i 2 pi p j / q))`` is t-independent.
    """
    _check_flux(p, q)
    u = np.zeros((q, q), dtype=complex)
    for j in range(q - 1):
        u[j + 1, j] = 1.0
    u[0, q - 1] = np.exp(1j * t)
    v = np.diag(np.exp(-2j * np.pi * p * np.arange(q) / q))
    return u, v


def hofstadter_model(p: int, q: int, M: int = DEFAULT_M_2D,
                     window: int | None = None) -> ModelInstance:
    """Magnetic translations on the square lattice at flux ``p/q`` per plaquette.

    Landau gauge with the phase on the y-hop:
    ``U psi(m, n) = psi(m-1, n)`` and ``V psi(m, n) = exp(-i 2 pi (p/q) m) psi(m, n-1)``,
    so ``U V = exp(i 2 pi p/q) V U``.  The commuting symmetry generators
    are the plain shifts by ``(q, 0)`` and ``(0, 1)``; because the gauge
    phase is periodic in ``m`` with period ``q`` they are phase-free.  The
    fibered hamiltonian is the q x q Harper matrix over the 2-torus.
    """
    flux = _check_flux(p, q)
    basis = make_basis(q, 2, M)
    # as maps of basis vectors: U sends site (m, n) to (m+1, n),
    # V sends (m, n) to (m, n+1) with the source-site phase
    U = _site_shift_1d(basis, axis=0)
    V = LatticeOperator.from_action(
        basis, lambda k, a: [((k, (a[0], a[1] + 1)), np.exp(-2j * np.pi * k * p / q))])
    S1 = _cell_shift(basis, 0)
    S2 = _cell_shift(basis, 1)

    if window is None:
        window = min(4, M - 1)
    dec = WanderingDecomposition.build(
        basis, [S1, S2], [(k, (0, 0)) for k in range(q)], window)

    h = U + U.adjoint() + V + V.adjoint()
    lattice_ops = {"U": U, "V": V, "S1": S1, "S2": S2, "hamiltonian": h}
    observables = {name: covariant_from_lattice(op, dec)
                   for name, op in lattice_ops.items() if name not in ("S1", "S2")}
    return ModelInstance(
        name=f"hofstadter(p={p},q={q})",
        decomposition=dec,
        observables=observables,
        lattice_ops=lattice_ops,
        flux=flux,
        metadata={"gauge": "Landau, phase on the y-hop; symmetry shifts are phase-free"},
    )


def periodic_chain_model(q: int, potential: list[float], M: int = DEFAULT_M_1D,
                         window: int | None = None) -> ModelInstance:
    """Tight-binding chain with a period-q onsite potential.

    ``H = T + T^t + diag(potential)`` with ``T`` the shift by one site;
    the symmetry is the shift by ``q`` sites and the wandering vectors are
    the deltas on one period.
    """
    if q < 1:
        raise ValueError(f"need q >= 1, got {q}")
    if len(potential) != q:
        raise ValueError(f"potential has {len(potential)} entries, expected q={q}")
    basis = make_basis(q, 1, M)
    T = _site_shift_1d(basis)
    S = _cell_shift(basis, 0)
    onsite = LatticeOperator.from_action(
        basis, lambda k, a: [((k, a), float(potential[k]))])

    if window is None:
        window = min(6, M - 1)
    dec = WanderingDecomposition.build(
        basis, [S], [(k, (0,)) for k in range(q)], window)

    h = T + T.adjoint() + onsite
    lattice_ops = {"shift": T, "symmetry": S, "hamiltonian": h}
    observables = {
        "shift": covariant_from_lattice(T, dec),
        "hamiltonian": covariant_from_lattice(h, dec),
    }
    return ModelInstance(
        name=f"chain(q={q})",
        decomposition=dec,
        observables=observables,
        lattice_ops=lattice_ops,
        metadata={"potential": repr(list(map(float, potential)))},
    )


def finite_group_model(orders: list[int]) -> FiniteGroupRep:
    """Regular representation of ``Z_{p_1} x ... x Z_{p_N}`` on ``C^{|F|}``.

    Generator ``j`` cyclically shifts the ``j``-th coordinate of the group
    element labelling the basis.
    """
    orders = tuple(int(p) for p in orders)
    if any(p < 2 for p in orders):
        raise ValueError(f"orders must all be >= 2, got {orders}")
    size = int(np.prod(orders))

    def flat(g):
        i = 0
        for gj, pj in zip(g, orders):
            i = i * pj + gj
        return i

    import itertools
    elements = list(itertools.product(*(range(p) for p in orders)))
    generators = []
    for j in range(len(orders)):
        U = np.zeros((size, size), dtype=complex)
        for g in elements:
            g2 = list(g)
            g2[j] = (g2[j] + 1) % orders[j]
            U[flat(g2), flat(g)] = 1.0
        generators.append(U)
    rep = FiniteGroupRep(orders=orders, dim=size, generators=tuple(generators))
    rep.validate()
    return rep
