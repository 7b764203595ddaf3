import itertools

import numpy as np
import pytest

from blochfiber import (
    FiniteGroupRep,
    InvariantViolationError,
    bf_projector,
    decompose_finite,
    finite_group_model,
)

EXACT = 1e-12


def frob(x):
    return float(np.linalg.norm(x))


class TestProjectors:
    def test_z2_closed_form(self):
        rep = finite_group_model([2])
        np.testing.assert_allclose(rep.generators[0], [[0, 1], [1, 0]])
        P0 = bf_projector(rep, (0,))
        P1 = bf_projector(rep, (1,))
        np.testing.assert_allclose(P0, 0.5 * np.array([[1, 1], [1, 1]]), atol=EXACT)
        np.testing.assert_allclose(P1, 0.5 * np.array([[1, -1], [-1, 1]]), atol=EXACT)

    def test_z3_ranks_match_brute_force(self):
        rep = finite_group_model([3])
        # oracle: diagonalize the 3x3 cyclic permutation directly
        w, _ = np.linalg.eig(rep.generators[0])
        assert sorted(np.round(np.angle(w) / (2 * np.pi / 3)).astype(int) % 3) == [0, 1, 2]
        for t in range(3):
            P = bf_projector(rep, (t,))
            assert np.linalg.matrix_rank(P, tol=1e-10) == 1

    @pytest.mark.parametrize("orders", [[2], [3], [2, 3]])
    def test_projector_properties(self, orders):
        rep = finite_group_model(orders)
        labels = rep.dual_labels()
        projectors = {t: bf_projector(rep, t) for t in labels}
        eye = np.eye(rep.dim)
        for t, P in projectors.items():
            assert frob(P.conj().T - P) <= EXACT
            assert frob(P @ P - P) <= EXACT
            # all projectors nonzero: dual cardinality equals |F|
            assert np.linalg.svd(P, compute_uv=False)[0] > 0.5
            for j, (U, p) in enumerate(zip(rep.generators, rep.orders)):
                z = np.exp(2j * np.pi * t[j] / p)
                assert frob(U @ P - z * P) <= EXACT
        for t1, t2 in itertools.combinations(labels, 2):
            assert frob(projectors[t1] @ projectors[t2]) <= EXACT
        assert frob(sum(projectors.values()) - eye) <= EXACT

    @pytest.mark.parametrize("orders", [[2], [3], [2, 3]])
    def test_parseval_on_random_vectors(self, orders):
        rep = finite_group_model(orders)
        projectors = [bf_projector(rep, t) for t in rep.dual_labels()]
        rng = np.random.default_rng(0)
        for _ in range(100):
            phi = rng.normal(size=rep.dim) + 1j * rng.normal(size=rep.dim)
            total = sum(np.linalg.norm(P @ phi) ** 2 for P in projectors)
            assert total == pytest.approx(np.linalg.norm(phi) ** 2, abs=EXACT * 10)

    def test_label_out_of_range(self):
        rep = finite_group_model([2])
        with pytest.raises(IndexError):
            bf_projector(rep, (2,))
        with pytest.raises(IndexError):
            bf_projector(rep, (0, 0))


class TestDecomposition:
    def test_z2_subspaces(self):
        dec = decompose_finite(finite_group_model([2]))
        plus = dec.subspace_bases[(0,)][:, 0]
        minus = dec.subspace_bases[(1,)][:, 0]
        # spans, not signs: compare rank-1 projectors
        np.testing.assert_allclose(np.outer(plus, plus.conj()),
                                   0.5 * np.array([[1, 1], [1, 1]]), atol=1e-10)
        np.testing.assert_allclose(np.outer(minus, minus.conj()),
                                   0.5 * np.array([[1, -1], [-1, 1]]), atol=1e-10)

    def test_z2xz3_six_lines(self):
        dec = decompose_finite(finite_group_model([2, 3]))
        assert len(dec.labels) == 6
        assert dec.labels == tuple(itertools.product(range(2), range(3)))
        assert all(dec.rank(t) == 1 for t in dec.labels)

    def test_non_unitary_rejected(self):
        rep = finite_group_model([4])
        bad = rep.generators[0].copy()
        bad[0, 0] += 0.1
        broken = FiniteGroupRep(orders=rep.orders, dim=rep.dim, generators=(bad,))
        with pytest.raises(InvariantViolationError, match="unitary"):
            decompose_finite(broken)

    def test_deterministic(self):
        d1 = decompose_finite(finite_group_model([2, 3]))
        d2 = decompose_finite(finite_group_model([2, 3]))
        for t in d1.labels:
            np.testing.assert_array_equal(d1.projectors[t], d2.projectors[t])
            np.testing.assert_array_equal(d1.subspace_bases[t], d2.subspace_bases[t])
