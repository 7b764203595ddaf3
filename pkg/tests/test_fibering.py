import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochfiber import (
    AliasingWarning,
    CovariantOperator,
    LatticeOperator,
    NotCovariantError,
    TorusGrid,
    WanderingDecomposition,
    compose_covariant,
    covariant_from_lattice,
    fiber_operator,
    haar_moment_check,
    hofstadter_model,
    inverse_transform,
    make_basis,
    mathieu_model,
    module_norm,
    transform_vector,
)
from blochfiber.fibering import coeff_norm, fiber_field, normalize_coeffs, parseval_error

EXACT = 1e-12


class TestCovariantExtraction:
    def test_mathieu_q2_shift_table(self):
        m = mathieu_model(1, 2, M=8)
        table = m.observables["u"].table
        assert table == {(1, 0, (0,)): 1.0 + 0.0j, (0, 1, (1,)): 1.0 + 0.0j}

    def test_symmetry_generator_table(self):
        # the generator itself is covariant with the delta table
        m = mathieu_model(1, 3, M=8)
        cov = covariant_from_lattice(m.lattice_ops["w"], m.decomposition)
        assert cov.table == {(k, k, (1,)): 1.0 + 0.0j for k in range(3)}

    def test_symmetry_fiber_is_scalar(self):
        m = mathieu_model(1, 3, M=8)
        cov = covariant_from_lattice(m.lattice_ops["w"], m.decomposition)
        for t in (0.0, 0.3, 2.2):
            F = fiber_operator(cov, [t])
            np.testing.assert_array_equal(F, np.exp(1j * t) * np.eye(3))

    def test_non_covariant_rejected(self):
        # phase operator at beta = 1/3 against a shift-by-2 symmetry:
        # the commutator is an order-one operator
        basis = make_basis(2, 1, 10)
        shift2 = LatticeOperator.from_action(basis, lambda k, a: [((k, (a[0] + 1,)), 1.0)])
        phase = LatticeOperator.from_action(
            basis, lambda k, a: [((k, a), np.exp(-2j * np.pi * (k + 2 * a[0]) / 3))])
        dec = WanderingDecomposition.build(
            basis, [shift2], [(0, (0,)), (1, (0,))], window=4)
        with pytest.raises(NotCovariantError):
            covariant_from_lattice(phase, dec)

    def test_hermitian_flag(self):
        m = mathieu_model(1, 3, M=8)
        assert m.hamiltonian().is_hermitian()
        assert not m.observables["u"].is_hermitian()


class TestCompose:
    def test_square_at_origin(self):
        m = mathieu_model(1, 3, M=8)
        u = m.observables["u"]
        uu = compose_covariant(u, u)
        F = fiber_operator(u, [0.0])
        np.testing.assert_allclose(fiber_operator(uu, [0.0]), F @ F, atol=EXACT)

    def test_unitarity_table(self):
        m = mathieu_model(1, 3, M=8)
        u = m.observables["u"]
        prod = compose_covariant(u, u.adjoint())
        assert set(prod.table) == {(k, k, (0,)) for k in range(3)}
        assert all(abs(v - 1.0) <= EXACT for v in prod.table.values())

    def test_hamiltonian_square_matches_matrix_square(self):
        m = mathieu_model(1, 3, M=8)
        h = m.hamiltonian()
        hh = compose_covariant(h, h)
        rng = np.random.default_rng(3)
        for t in rng.uniform(0, 2 * np.pi, size=8):
            lhs = fiber_operator(hh, [t])
            rhs = fiber_operator(h, [t]) @ fiber_operator(h, [t])
            assert np.abs(lhs - rhs).max() <= EXACT

    def test_homomorphism_random_tables(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            A = random_covariant(rng, q=3, N=2)
            B = random_covariant(rng, q=3, N=2)
            AB = compose_covariant(A, B)
            for _ in range(4):
                t = rng.uniform(0, 2 * np.pi, size=2)
                lhs = fiber_operator(AB, t)
                rhs = fiber_operator(A, t) @ fiber_operator(B, t)
                assert np.abs(lhs - rhs).max() <= 1e-11

    def test_adjoint_covariance(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            A = random_covariant(rng, q=4, N=1)
            t = rng.uniform(0, 2 * np.pi, size=1)
            lhs = fiber_operator(A.adjoint(), t)
            rhs = fiber_operator(A, t).conj().T
            assert np.abs(lhs - rhs).max() <= EXACT


def random_covariant(rng, q, N, radius=2, terms=10):
    table = {}
    for _ in range(terms):
        key = (int(rng.integers(q)), int(rng.integers(q)),
               tuple(int(x) for x in rng.integers(-radius, radius + 1, size=N)))
        table[key] = complex(rng.normal(), rng.normal())
    return CovariantOperator.from_table(q, N, table)


class TestVectorTransform:
    def test_wandering_vector_is_constant_frame_field(self):
        grid = TorusGrid(N=1, L=16)
        samples = transform_vector({(1, (0,)): 1.0}, grid, q=3)
        np.testing.assert_array_equal(samples.values[:, 1], np.ones(16))
        np.testing.assert_array_equal(samples.values[:, [0, 2]], np.zeros((16, 2)))

    def test_translated_vector_is_pure_phase(self):
        grid = TorusGrid(N=1, L=16)
        samples = transform_vector({(0, (2,)): 1.0}, grid, q=1)
        np.testing.assert_allclose(samples.values[:, 0], np.exp(2j * grid.axis),
                                   atol=EXACT)

    def test_parseval_exact_on_random_vectors(self):
        rng = np.random.default_rng(2)
        grid = TorusGrid(N=1, L=16)
        for _ in range(100):
            coeffs = {(int(rng.integers(3)), (int(rng.integers(-7, 8)),)):
                      complex(rng.normal(), rng.normal()) for _ in range(5)}
            assert parseval_error(coeffs, grid, q=3) <= EXACT * max(
                1.0, coeff_norm(normalize_coeffs(coeffs, 1)) ** 2)

    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(-3, 3),
                              st.floats(-2, 2), st.floats(-2, 2)),
                    min_size=1, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_parseval_property(self, terms):
        coeffs = {}
        for k, b, re, im in terms:
            coeffs[(k, (b,))] = coeffs.get((k, (b,)), 0) + complex(re, im)
        grid = TorusGrid(N=1, L=8)  # L > 2 * 3
        assert parseval_error(coeffs, grid, q=3) <= 1e-10

    def test_roundtrip_single_vector(self):
        grid = TorusGrid(N=1, L=8)
        rec = inverse_transform(transform_vector({(0, (0,)): 1.0}, grid, q=1))
        assert rec[(0, (0,))] == pytest.approx(1.0, abs=EXACT)

    def test_roundtrip_random(self):
        rng = np.random.default_rng(4)
        grid = TorusGrid(N=1, L=16)
        for _ in range(100):
            coeffs = normalize_coeffs(
                {(int(rng.integers(2)), (int(rng.integers(-3, 4)),)):
                 complex(rng.normal(), rng.normal()) for _ in range(4)}, 1)
            rec = inverse_transform(transform_vector(coeffs, grid, q=2))
            keys = set(coeffs) | set(rec)
            err = max(abs(coeffs.get(key, 0) - rec.get(key, 0)) for key in keys)
            assert err <= EXACT

    def test_aliasing_warning(self):
        grid = TorusGrid(N=1, L=8)
        coeffs = {(0, (b,)): 1.0 for b in range(-9, 10)}
        samples = transform_vector(coeffs, grid, q=1)
        with pytest.warns(AliasingWarning):
            inverse_transform(samples)


class TestModuleNorm:
    def test_unit_constant_field(self):
        assert module_norm({(0, (0,)): 1.0}, TorusGrid(N=1, L=16)) == pytest.approx(1.0)

    def test_two_term_sup(self):
        # max_t |1 + e^{it}| = 2, attained at the t=0 node of any even grid
        value = module_norm({(0, (0,)): 1.0, (0, (1,)): 1.0}, TorusGrid(N=1, L=16))
        assert value == pytest.approx(2.0, abs=EXACT)

    def test_dominates_hilbert_norm(self):
        rng = np.random.default_rng(9)
        grid = TorusGrid(N=1, L=32)
        for _ in range(100):
            coeffs = normalize_coeffs(
                {(int(rng.integers(3)), (int(rng.integers(-5, 6)),)):
                 complex(rng.normal(), rng.normal()) for _ in range(5)}, 1)
            assert coeff_norm(coeffs) <= module_norm(coeffs, grid, q=3) + 1e-10

    def test_monotone_under_refinement(self):
        coeffs = {(0, (0,)): 1.0, (0, (2,)): -0.7j, (1, (1,)): 0.4}
        values = [module_norm(coeffs, TorusGrid(N=1, L=L), q=2) for L in (8, 16, 32, 64)]
        assert all(x <= y + 1e-14 for x, y in zip(values, values[1:]))


class TestHaarMoments:
    def test_zero_offset(self):
        m = mathieu_model(1, 3, M=8)
        grid = TorusGrid(N=1, L=16)
        assert haar_moment_check(m.decomposition, 0, (0,), grid) <= EXACT

    def test_mathieu_first_moment(self):
        m = mathieu_model(1, 3, M=8)
        grid = TorusGrid(N=1, L=16)
        for k in range(3):
            assert haar_moment_check(m.decomposition, k, (1,), grid) <= EXACT

    def test_hofstadter_diagonal_moment(self):
        h = hofstadter_model(1, 3, M=5)
        grid = TorusGrid(N=2, L=8)
        for k in range(3):
            assert haar_moment_check(h.decomposition, k, (1, 1), grid) <= EXACT


class TestGridAndSamples:
    def test_weights_sum_to_one_exactly(self):
        for N, L in [(1, 64), (2, 16), (1, 3), (2, 5)]:
            grid = TorusGrid(N=N, L=L)
            assert grid.weight * grid.node_count == 1.0

    def test_half_open_interval(self):
        grid = TorusGrid(N=1, L=8)
        assert grid.axis[0] == 0.0
        assert grid.axis[-1] < 2 * np.pi

    def test_samples_shape_checked(self):
        grid = TorusGrid(N=2, L=4)
        from blochfiber import FiberedSamples
        with pytest.raises(ValueError):
            FiberedSamples(grid=grid, values=np.zeros((4, 3, 2, 2)))

    def test_decomposition_requires_passing_report(self):
        from blochfiber import InvariantViolationError
        m = mathieu_model(1, 3, M=10)
        with pytest.raises(InvariantViolationError):
            WanderingDecomposition.build(
                m.decomposition.basis, [m.lattice_ops["v"]],
                [(k, (0,)) for k in range(3)], window=3)

    def test_hofstadter_symmetries_fiber_to_scalars(self):
        m = hofstadter_model(1, 3, M=5)
        s1 = covariant_from_lattice(m.lattice_ops["S1"], m.decomposition)
        s2 = covariant_from_lattice(m.lattice_ops["S2"], m.decomposition)
        t = np.array([0.9, 2.3])
        np.testing.assert_array_equal(fiber_operator(s1, t),
                                      np.exp(1j * t[0]) * np.eye(3))
        np.testing.assert_array_equal(fiber_operator(s2, t),
                                      np.exp(1j * t[1]) * np.eye(3))


class TestFrameIndependence:
    def test_fiber_spectra_agree_between_wandering_systems(self):
        m = mathieu_model(1, 3, M=12)
        basis = m.decomposition.basis
        w = m.lattice_ops["w"]
        shifted = WanderingDecomposition.build(
            basis, [w], [(1, (0,)), (2, (0,)), (0, (1,))], window=5)
        h = m.lattice_ops["hamiltonian"]
        cov1 = covariant_from_lattice(h, m.decomposition)
        cov2 = covariant_from_lattice(h, shifted)
        grid = TorusGrid(N=1, L=32)
        e1 = np.linalg.eigvalsh(fiber_field(cov1, grid).values)
        e2 = np.linalg.eigvalsh(fiber_field(cov2, grid).values)
        assert np.abs(e1 - e2).max() <= 1e-10
