import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochfiber import (
    BasisMismatchError,
    BasisSizeError,
    LatticeOperator,
    WindowTooLargeError,
    commutator_norm,
    make_basis,
    mathieu_model,
    seminorm_pm,
    unitary_defect,
    verify_wandering,
)

EXACT = 1e-12


class TestBasis:
    @pytest.mark.parametrize("q,N,M,dim", [(1, 1, 1, 3), (3, 1, 10, 63), (3, 2, 5, 363)])
    def test_dim(self, q, N, M, dim):
        assert make_basis(q, N, M).dim == dim

    def test_roundtrip_bijection(self):
        basis = make_basis(2, 2, 3)
        seen = set()
        for i in range(basis.dim):
            k, a = basis.label_of(i)
            assert basis.index_of(k, a) == i
            seen.add((k, a))
        assert len(seen) == basis.dim

    def test_lexicographic_order(self):
        basis = make_basis(2, 1, 1)
        labels = list(basis.labels())
        assert labels == sorted(labels)

    def test_dimension_cap(self):
        with pytest.raises(BasisSizeError):
            make_basis(10, 3, 30)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            make_basis(0, 1, 1)
        with pytest.raises(IndexError):
            make_basis(2, 1, 3).index_of(0, (5,))

    @given(q=st.integers(1, 4), N=st.integers(1, 2), M=st.integers(1, 4),
           data=st.data())
    def test_roundtrip_random(self, q, N, M, data):
        basis = make_basis(q, N, M)
        i = data.draw(st.integers(0, basis.dim - 1))
        k, a = basis.label_of(i)
        assert basis.index_of(k, a) == i


class TestOperatorAlgebra:
    def test_zero_amplitudes_not_stored(self):
        basis = make_basis(1, 1, 2)
        op = LatticeOperator.from_entries(basis, {(0, 0): 0.0, (1, 0): 2.0})
        assert (0, 0) not in op.entries
        assert op.entries[(1, 0)] == 2.0

    def test_adjoint_involution(self):
        m = mathieu_model(1, 3, M=5)
        u = m.lattice_ops["u"]
        assert u.adjoint().adjoint().entries == u.entries

    def test_hop_range(self):
        m = mathieu_model(1, 3, M=5)
        assert m.lattice_ops["u"].hop_range == 1
        assert m.lattice_ops["v"].hop_range == 0
        assert m.lattice_ops["w"].hop_range == 1

    def test_generator_unitarity_on_interior(self):
        for name in ("u", "v", "w"):
            assert unitary_defect(mathieu_model(1, 3, M=6).lattice_ops[name]) <= EXACT


def dense_site_pair(beta: float, S: int):
    """Independent site-space construction of the shift/phase pair on -S..S."""
    n = np.arange(-S, S + 1)
    d = len(n)
    u = np.zeros((d, d), dtype=complex)
    u[1:, :-1] = np.eye(d - 1)
    v = np.diag(np.exp(-2j * np.pi * n * beta))
    return u, v


class TestCommutatorNorm:
    def test_self_commutator_vanishes(self):
        m = mathieu_model(1, 3, M=5)
        assert commutator_norm(m.lattice_ops["u"], m.lattice_ops["u"], 1.0) == 0.0

    def test_twisted_commutation_phase(self):
        m = mathieu_model(1, 3, M=8)
        phase = np.exp(2j * np.pi / 3)
        value = commutator_norm(m.lattice_ops["u"], m.lattice_ops["v"], phase)
        assert value <= EXACT

    def test_untwisted_value_matches_dense_oracle(self):
        # oracle: raw site-space matrices, interior columns, dense SVD
        u, v = dense_site_pair(1.0 / 3.0, S=10)
        comm = u @ v - v @ u
        interior = np.abs(np.arange(-10, 11)) <= 8
        oracle = np.linalg.svd(comm[:, interior], compute_uv=False)[0]
        assert oracle == pytest.approx(math.sqrt(3.0), abs=1e-12)

        m = mathieu_model(1, 3, M=10)
        value = commutator_norm(m.lattice_ops["u"], m.lattice_ops["v"], 1.0)
        assert value == pytest.approx(oracle, abs=1e-12)

    def test_basis_mismatch(self):
        a = LatticeOperator.identity(make_basis(1, 1, 2))
        b = LatticeOperator.identity(make_basis(1, 1, 3))
        with pytest.raises(BasisMismatchError):
            commutator_norm(a, b, 1.0)

    def test_bad_phase(self):
        a = LatticeOperator.identity(make_basis(1, 1, 2))
        with pytest.raises(ValueError):
            commutator_norm(a, a, 2.0)


class TestVerifyWandering:
    def test_mathieu_passes(self):
        m = mathieu_model(1, 3, M=12)
        report = verify_wandering([m.lattice_ops["w"]], [(k, (0,)) for k in range(3)],
                                  window=6)
        assert report.passed
        assert report.max_violation <= EXACT
        assert report.cyclic_defect <= EXACT
        assert report.failures == ()

    def test_shifted_family_also_passes(self):
        # the orbit-translated candidate family has the same cardinality
        m = mathieu_model(1, 3, M=12)
        shifted = [(1, (0,)), (2, (0,)), (0, (1,))]
        report = verify_wandering([m.lattice_ops["w"]], shifted, window=5)
        assert report.passed

    def test_diagonal_generator_fails(self):
        m = mathieu_model(1, 3, M=12)
        report = verify_wandering([m.lattice_ops["v"]], [(0, (0,))], window=4)
        assert not report.passed
        assert report.max_violation > 0.5
        assert len(report.failures) > 0

    def test_identity_generator_fails(self):
        basis = make_basis(1, 1, 8)
        eye = LatticeOperator.identity(basis)
        report = verify_wandering([eye], [(0, (0,))], window=4)
        assert not report.passed

    def test_selfadjoint_generator_fails(self):
        # pair swap: unitary, self-adjoint, squares to the identity
        basis = make_basis(1, 1, 8)
        swap = LatticeOperator.from_action(
            basis, lambda k, a: [((k, (a[0] + 1,)), 1.0)] if a[0] % 2 == 0
            else [((k, (a[0] - 1,)), 1.0)])
        assert unitary_defect(swap) <= EXACT
        assert swap.adjoint().entries == swap.entries
        report = verify_wandering([swap], [(0, (0,))], window=4)
        assert not report.passed

    def test_incomplete_candidates_fail_span(self):
        # single candidate for a q=3 symmetry: orbit is orthonormal but
        # cannot span the interior block
        m = mathieu_model(1, 3, M=12)
        report = verify_wandering([m.lattice_ops["w"]], [(0, (0,))], window=4)
        assert not report.passed
        assert report.max_violation <= EXACT
        assert report.cyclic_defect > 0.5

    def test_window_too_large(self):
        m = mathieu_model(1, 3, M=6)
        with pytest.raises(WindowTooLargeError):
            verify_wandering([m.lattice_ops["w"]], [(0, (0,))], window=6)

    def test_deterministic(self):
        m = mathieu_model(1, 3, M=10)
        args = ([m.lattice_ops["v"]], [(0, (0,))], 3)
        r1 = verify_wandering(*args)
        r2 = verify_wandering(*args)
        assert r1 == r2


def brute_force_pm(coeffs, m):
    """Enumerate the index range directly; independent of the library path."""
    if not coeffs:
        return 0.0
    N = len(next(iter(coeffs))[0 + 1])
    pairs = 0
    for k in range(0, m + 1):
        for a in itertools.product(range(-m, m + 1), repeat=N):
            if sum(abs(x) for x in a) <= m:
                pairs += 1
    total = sum(abs(v) ** 2 for (k, a), v in coeffs.items()
                if 0 <= k <= m and sum(abs(x) for x in a) <= m)
    return math.sqrt(pairs * total)


class TestSeminorm:
    def test_single_vector_m0(self):
        assert seminorm_pm({(0, (0,)): 1.0}, 0) == pytest.approx(1.0, abs=1e-15)

    def test_two_term_m1(self):
        coeffs = {(0, (0,)): 1.0, (0, (1,)): 1.0}
        oracle = brute_force_pm(coeffs, 1)
        assert oracle == pytest.approx(math.sqrt(6 * 2), abs=1e-12)
        assert seminorm_pm(coeffs, 1) == pytest.approx(oracle, abs=1e-12)

    @given(st.dictionaries(
        keys=st.tuples(st.integers(0, 4),
                       st.tuples(st.integers(-4, 4), st.integers(-4, 4))),
        values=st.complex_numbers(max_magnitude=10, allow_nan=False,
                                  allow_infinity=False),
        max_size=8),
        st.integers(0, 5))
    @settings(max_examples=60, deadline=None)
    def test_monotone_and_matches_brute_force(self, coeffs, m):
        pm = seminorm_pm(coeffs, m)
        assert pm == pytest.approx(brute_force_pm(coeffs, m), rel=1e-12, abs=1e-12)
        assert pm <= seminorm_pm(coeffs, m + 1) + 1e-12

    def test_monotone_on_random_vectors(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            coeffs = {(int(rng.integers(0, 5)),
                       (int(rng.integers(-5, 6)),)): complex(rng.normal(), rng.normal())
                      for _ in range(6)}
            values = [seminorm_pm(coeffs, m) for m in range(6)]
            assert all(x <= y + 1e-12 for x, y in zip(values, values[1:]))
