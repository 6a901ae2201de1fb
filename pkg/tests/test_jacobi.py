import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ifsjacobi import (DiscreteMeasure, IFSSystem, JacobiMatrix, NumericError, ParameterError,
                       balanced_atoms, coincidence_range, equilibrium_atoms, golub_welsch,
                       interval_union, rkpw_add_atoms, rkpw_jacobi, solve_gap_roots,
                       stieltjes_jacobi)
from ifsjacobi.jacobi import matrix_l1_row_error
from ifsjacobi.quadrature import chebyshev_nodes
from ifsjacobi.serialize import load_jacobi, save_jacobi

# brute-force row scan of J(nu_2^400) vs J(nu_2^360), Cantor, eps = 1e-8
CANTOR_N2_G400_G360_RANGE = 933


def cheb20():
    x = 0.5 + 0.5 * chebyshev_nodes(20)
    return DiscreteMeasure(x, np.full(20, 1 / 20))


def random_measures(seed=12345, count=100, max_atoms=30):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        k = int(rng.integers(1, max_atoms + 1))
        w = rng.random(k)
        yield DiscreteMeasure(rng.random(k), w / w.sum())


# positions on a 1e-6 grid: near-coincident atoms make b underflow, which is not a defect
atoms_strategy = st.lists(st.tuples(st.integers(0, 10 ** 6).map(lambda i: i * 1e-6),
                                    st.floats(1e-3, 1)),
                          min_size=1, max_size=30, unique_by=lambda t: t[0])

ORACLE_RANK = 12


def lanczos_mp(x, w, n, dps=60):
    """Stieltjes procedure in ``dps``-digit arithmetic."""
    import mpmath as mp
    with mp.workdps(dps):
        x = [mp.mpf(float(v)) for v in x]
        w = [mp.mpf(float(v)) for v in w]
        p = [1 / mp.sqrt(sum(w))] * len(x)
        pp = [mp.mpf(0)] * len(x)
        a, b = [], [mp.mpf(0)]
        for j in range(n):
            a.append(sum(wi * xi * pi * pi for wi, xi, pi in zip(w, x, p)))
            if j + 1 == n:
                break
            q = [(xi - a[j]) * pi - b[j] * ppi for xi, pi, ppi in zip(x, p, pp)]
            b.append(mp.sqrt(sum(wi * qi * qi for wi, qi in zip(w, q))))
            pp, p = p, [qi / b[-1] for qi in q]
        return np.array([float(v) for v in a]), np.array([float(v) for v in b])


class TestRKPW:
    def test_single_atom(self):
        J = rkpw_jacobi(DiscreteMeasure([0.3], [2.0]), 4)
        assert J.rank == 1 and J.a[0] == 0.3 and J.mass == 2.0

    def test_two_atoms(self):
        J = rkpw_jacobi(DiscreteMeasure([-1, 1], [0.5, 0.5]), 2)
        np.testing.assert_allclose(J.a, [0, 0], atol=1e-16)
        assert J.b[1] == pytest.approx(1.0, abs=1e-15) and J.mass == 1.0

    def test_chebyshev_twenty(self):
        J = rkpw_jacobi(cheb20(), 8)
        np.testing.assert_allclose(J.a, 0.5, atol=1e-12)
        assert J.b[1] == pytest.approx(0.3535533905932738, abs=1e-12)
        np.testing.assert_allclose(J.b[2:], 0.25, atol=1e-12)
        S = stieltjes_jacobi(cheb20(), 8)
        np.testing.assert_allclose(J.a, S.a, atol=1e-12)
        np.testing.assert_allclose(J.b, S.b, atol=1e-12)

    def test_empty(self):
        with pytest.raises(ParameterError):
            rkpw_jacobi(DiscreteMeasure.empty(), 3)

    def test_oracle_equivalence(self):
        for m in random_measures():
            n = min(len(m), ORACLE_RANK)
            R, S = rkpw_jacobi(m, n), stieltjes_jacobi(m, n)
            np.testing.assert_allclose(R.a, S.a, atol=1e-10, rtol=0)
            np.testing.assert_allclose(R.b, S.b, atol=1e-10, rtol=0)
            assert abs(R.mass - S.mass) < 1e-14

    def test_full_rank_high_precision(self):
        for m in random_measures(count=30):
            R = rkpw_jacobi(m, len(m))
            a, b = lanczos_mp(m.x, m.w, len(m))
            np.testing.assert_allclose(R.a, a, atol=1e-12, rtol=0)
            np.testing.assert_allclose(R.b, b, atol=1e-12, rtol=0)

    def test_thirty_atoms_rank12(self):
        m = DiscreteMeasure(np.random.default_rng(3).random(30), np.full(30, 1 / 30))
        R, S = rkpw_jacobi(m, 12), stieltjes_jacobi(m, 12)
        np.testing.assert_allclose(R.a, S.a, atol=1e-10)
        np.testing.assert_allclose(R.b, S.b, atol=1e-10)

    @given(atoms_strategy, st.integers(1, 30))
    def test_truncation(self, atoms, nbar):
        m = DiscreteMeasure(*zip(*atoms))
        full = rkpw_jacobi(m, len(m))
        part = rkpw_jacobi(m, nbar)
        k = part.rank
        assert np.max(np.abs(part.a - full.a[:k]), initial=0) <= 1e-14
        assert np.max(np.abs(part.b - full.b[:k]), initial=0) <= 1e-14

    @given(atoms_strategy, st.randoms(use_true_random=False))
    def test_permutation(self, atoms, rnd):
        m = DiscreteMeasure(*zip(*atoms))
        shuffled = list(atoms)
        rnd.shuffle(shuffled)
        p = DiscreteMeasure(*zip(*shuffled))
        A, B = rkpw_jacobi(m, len(m)), rkpw_jacobi(p, len(p))
        np.testing.assert_allclose(A.a, B.a, atol=1e-12)
        np.testing.assert_allclose(A.b, B.b, atol=1e-12)

    @given(atoms_strategy)
    def test_support_bounds(self, atoms):
        m = DiscreteMeasure(*zip(*atoms))
        J = rkpw_jacobi(m, len(m))
        lo, hi = m.x[0], m.x[-1]
        assert np.all(J.a >= lo - 1e-12) and np.all(J.a <= hi + 1e-12)
        assert np.all(J.b <= (hi - lo) / 2 + 1e-12)

    @pytest.mark.parametrize("threads", [2, 3, 4])
    def test_threads(self, cantor, threads):
        m = balanced_atoms(cantor, 11)
        a = rkpw_jacobi(m, 300)
        b = rkpw_jacobi(m, 300, threads=threads)
        assert np.max(np.abs(a.a - b.a)) <= 1e-13
        assert np.max(np.abs(a.b - b.b)) <= 1e-13


class TestAddAtoms:
    def test_add_nothing(self):
        J = rkpw_jacobi(cheb20(), 8)
        K = rkpw_add_atoms(J, DiscreteMeasure.empty())
        np.testing.assert_array_equal(J.a, K.a)
        np.testing.assert_array_equal(J.b, K.b)

    def test_split(self):
        m = cheb20()
        one = rkpw_jacobi(m, 20)
        first, second = m.split(10)
        two = rkpw_add_atoms(rkpw_jacobi(first, 20), second, 20)
        np.testing.assert_allclose(two.a, one.a, atol=1e-13, rtol=0)
        np.testing.assert_allclose(two.b, one.b, atol=1e-13, rtol=0)
        assert two.mass == pytest.approx(one.mass, abs=1e-15)

    def test_from_empty(self):
        J = rkpw_add_atoms(JacobiMatrix.empty(), DiscreteMeasure([0.7], [0.2]))
        assert J.rank == 1 and J.a[0] == 0.7 and J.mass == pytest.approx(0.2)

    @given(atoms_strategy, st.integers(1, 29))
    def test_split_property(self, atoms, k):
        m = DiscreteMeasure(*zip(*atoms))
        k = min(k, len(m) - 1) if len(m) > 1 else 0
        if k == 0:
            return
        first, second = m.split(k)
        one = rkpw_jacobi(m, len(m))
        two = rkpw_add_atoms(rkpw_jacobi(first, len(m)), second, len(m))
        np.testing.assert_allclose(two.a, one.a, atol=1e-10)
        np.testing.assert_allclose(two.b, one.b, atol=1e-10)


class TestStieltjes:
    def test_two_atoms(self):
        m = DiscreteMeasure([-1, 1], [0.5, 0.5])
        S, R = stieltjes_jacobi(m, 2), rkpw_jacobi(m, 2)
        np.testing.assert_allclose(S.a, R.a, atol=1e-16)
        np.testing.assert_allclose(S.b, R.b, atol=1e-16)

    def test_three_point_gauss(self):
        S = stieltjes_jacobi(DiscreteMeasure(chebyshev_nodes(3), np.full(3, 1 / 3)), 3)
        np.testing.assert_allclose(S.a, 0, atol=1e-15)
        np.testing.assert_allclose(S.b[1:], [1 / math.sqrt(2), 0.5], atol=1e-15)

    def test_cap(self):
        with pytest.raises(ParameterError):
            stieltjes_jacobi(cheb20(), 65)


class TestGolubWelsch:
    def test_one(self):
        m = golub_welsch(JacobiMatrix([0.0], [0.0], 1.0), 1)
        assert m.x.tolist() == [0.0] and m.w.tolist() == [1.0]

    def test_two(self):
        m = golub_welsch(JacobiMatrix([0.0, 0.0], [0.0, 1.0], 1.0), 2)
        np.testing.assert_allclose(m.x, [-1, 1], atol=1e-15)
        np.testing.assert_allclose(m.w, [0.5, 0.5], atol=1e-15)

    @pytest.mark.parametrize("n", [3, 6, 8, 10])
    def test_round_trip(self, cantor, n):
        m = balanced_atoms(cantor, n)
        r = golub_welsch(rkpw_jacobi(m, len(m)))
        dx = np.mean(np.abs(r.x - m.x))
        dw = np.mean(np.abs(r.w - m.w))
        assert dw < 1e-8 and dx <= dw

    def test_against_scipy(self, cantor):
        from scipy.linalg import eigh_tridiagonal
        J = rkpw_jacobi(balanced_atoms(cantor, 6), 64)
        lam, vec = eigh_tridiagonal(J.a, J.b[1:])
        m = golub_welsch(J)
        np.testing.assert_allclose(m.x, lam, atol=1e-14)
        np.testing.assert_allclose(m.w, vec[0] ** 2, atol=1e-13)

    def test_rank_check(self):
        with pytest.raises(ParameterError):
            golub_welsch(JacobiMatrix([0.0], [0.0], 1.0), 2)


class TestCoincidence:
    def test_identical(self):
        J = rkpw_jacobi(cheb20(), 10)
        assert coincidence_range(J, J, 1e-12) == 10

    def test_perturbed_a0(self):
        J = rkpw_jacobi(cheb20(), 10)
        a = J.a.copy()
        a[0] += 2e-8
        assert coincidence_range(J, JacobiMatrix(a, J.b, J.mass), 1e-8) == 0

    def test_cantor_value(self, cantor):
        sys = solve_gap_roots(interval_union(cantor, 2))
        A = rkpw_jacobi(equilibrium_atoms(sys, 400), 1600)
        B = rkpw_jacobi(equilibrium_atoms(sys, 360), 1440)
        assert coincidence_range(A, B, 1e-8) == CANTOR_N2_G400_G360_RANGE

    @given(st.lists(st.floats(1e-16, 1e-1), min_size=2, max_size=6))
    def test_monotone_in_eps(self, epss):
        A = rkpw_jacobi(cheb20(), 20)
        B = rkpw_jacobi(DiscreteMeasure(0.5 + 0.5 * chebyshev_nodes(19), np.full(19, 1 / 19)),
                        19)
        epss = sorted(epss)
        N = [coincidence_range(A, B, e) for e in epss]
        assert N == sorted(N)

    def test_l1_row_error(self):
        J = rkpw_jacobi(cheb20(), 10)
        assert matrix_l1_row_error(J, J, 3) == 0
        b = J.b.copy()
        b[3] += 1e-3
        K = JacobiMatrix(J.a, b, J.mass)
        assert matrix_l1_row_error(J, K, 3) == pytest.approx(1e-3 / 4, rel=1e-9)


class TestMatrixType:
    def test_positive_b(self):
        with pytest.raises(NumericError):
            JacobiMatrix([0, 0], [0, -1], 1.0)

    @pytest.mark.parametrize("suffix", [".csv", ".json"])
    def test_file_round_trip(self, tmp_path, suffix):
        J = rkpw_jacobi(cheb20(), 12)
        path = tmp_path / f"j{suffix}"
        save_jacobi(J, path)
        K = load_jacobi(path)
        np.testing.assert_array_equal(J.a, K.a)
        np.testing.assert_array_equal(J.b, K.b)
        assert J.mass == K.mass

    def test_csv_layout(self, tmp_path):
        J = rkpw_jacobi(DiscreteMeasure([-1, 1], [0.5, 0.5]), 2)
        save_jacobi(J, tmp_path / "j.csv")
        lines = (tmp_path / "j.csv").read_text().splitlines()
        assert lines[0] == "# mass=1" and lines[1] == "j,a,b" and lines[2].endswith(",")
