import numpy as np
import pytest

from pinnls.geometry import Domain
from pinnls.linalg import seeded_rng
from pinnls.metrics import (ZeroTruthNorm, a_posteriori_certificate,
                            gagliardo_seminorm, mc_error)
from pinnls.network import Jet
from pinnls.problems import SIN3, TruthAnsatz, make_problem


class ZeroField:
    def jets(self, X):
        X = np.atleast_2d(X)
        n, d = X.shape
        return Jet(np.zeros((n, 1)), np.zeros((n, 1, d)), np.zeros((n, 1, d, d)))


class TestMcError:
    def test_zero_ansatz_against_sine_product(self):
        # |truth|_L2 = (1/2)^(3/2), |grad truth|_L2 = sqrt(3 pi^2 / 8)
        errs = mc_error(ZeroField(), SIN3, Domain(3), 100_000, seeded_rng(0, 4))
        l2_exact = 0.5 ** 1.5
        h1s_exact = np.sqrt(3.0 * np.pi ** 2 / 8.0)
        assert abs(errs["L2"][0] - l2_exact) <= 0.01 * l2_exact
        assert abs(errs["H1semi"][0] - h1s_exact) <= 0.01 * h1s_exact
        assert abs(errs["H1"][0] - np.hypot(errs["L2"][0], errs["H1semi"][0])) <= 1e-14
        # error of the zero ansatz relative to the truth is exactly 1
        assert abs(errs["L2"][1] - 1.0) <= 1e-12

    def test_truth_has_zero_error(self):
        errs = mc_error(TruthAnsatz(SIN3), SIN3, Domain(3), 1000, seeded_rng(1, 4))
        assert errs["L2"] == (0.0, 0.0)
        assert errs["H1"] == (0.0, 0.0)

    def test_deterministic(self):
        a = mc_error(ZeroField(), SIN3, Domain(3), 500, seeded_rng(2, 4))
        b = mc_error(ZeroField(), SIN3, Domain(3), 500, seeded_rng(2, 4))
        assert a == b

    def test_spacetime_gradient_includes_time(self):
        problem = make_problem("parabolic")
        errs = mc_error(ZeroField(), problem.truth["u"], problem.domain,
                        50_000, seeded_rng(3, 4))
        # |d_t u|^2 integrates to a nonzero amount, so H1semi > the purely
        # spatial seminorm of the initial slice would suggest
        assert errs["H1semi"][0] > errs["L2"][0]

    def test_zero_truth_raises(self):
        with pytest.raises(ZeroTruthNorm):
            mc_error(ZeroField(), ZeroField(), Domain(3), 100, seeded_rng(4, 4))


def grid_gagliardo_oracle(N, s, d=3, eps_cut=1e-3):
    """Exact pairwise Gagliardo sum of e(x) = x_1 over the N^d midpoint
    grid, reduced over difference vectors: the pair (i, j) only enters
    through k = i - j, with multiplicity prod_a (N - |k_a|)."""
    k = np.arange(-(N - 1), N)
    mult = (N - np.abs(k)).astype(float)
    Z = np.meshgrid(*([k / N] * d), indexing="ij")
    M = np.ones(Z[0].shape)
    for a in range(d):
        shape = [1] * d
        shape[a] = mult.size
        M = M * mult.reshape(shape)
    r = np.sqrt(sum(z ** 2 for z in Z))
    keep = r >= eps_cut
    val = np.zeros(r.shape)
    val[keep] = Z[0][keep] ** 2 / r[keep] ** (d + 2.0 * s)
    return (M * val).sum() / N ** (2 * d)


class TestGagliardo:
    def test_constant_function_is_zero(self):
        v = gagliardo_seminorm(lambda X: np.full(X.shape[0], 3.0), 0.5, 3,
                               10_000, seeded_rng(5, 4))
        assert v == 0.0

    def test_quadratic_homogeneity(self):
        a = gagliardo_seminorm(lambda X: X[:, 0], 0.5, 3, 50_000, seeded_rng(6, 4))
        b = gagliardo_seminorm(lambda X: 2.0 * X[:, 0], 0.5, 3, 50_000,
                               seeded_rng(6, 4))
        assert np.isclose(b, 4.0 * a, rtol=1e-12)

    def test_reduction_matches_brute_force_pairs(self):
        N, s = 6, 0.5
        pts = (np.arange(N) + 0.5) / N
        X = np.stack(np.meshgrid(pts, pts, pts, indexing="ij"), axis=-1).reshape(-1, 3)
        total = 0.0
        for i in range(X.shape[0]):
            z = X[i] - X
            r = np.sqrt((z ** 2).sum(axis=1))
            keep = r >= 1e-3
            total += (z[keep, 0] ** 2 / r[keep] ** 4).sum()
        brute = total / N ** 6
        assert np.isclose(grid_gagliardo_oracle(N, s), brute, rtol=1e-12)

    def test_matches_grid_oracle_for_linear_function(self):
        oracle = grid_gagliardo_oracle(64, 0.5)
        mc = gagliardo_seminorm(lambda X: X[:, 0], 0.5, 3, 2_000_000,
                                seeded_rng(7, 4))
        assert abs(mc - oracle) <= 0.1 * oracle

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError):
            gagliardo_seminorm(lambda X: X[:, 0], 1.5, 3, 100, seeded_rng(8, 4))
        with pytest.raises(ValueError):
            gagliardo_seminorm(lambda X: X[:, 0], 0.5, 3, 100, seeded_rng(8, 4),
                               eps_cut=0.0)


class TestCertificate:
    @pytest.mark.parametrize("loss, gap, expected", [
        (1.0, 0.0, 2.0),
        (0.5, 0.25, 1.5),
        (0.5, -0.25, 1.0),   # negative gap estimates are clipped
        (0.0, 0.0, 0.0),
    ])
    def test_examples(self, loss, gap, expected):
        assert a_posteriori_certificate(loss, gap) == expected

    def test_rejects_negative_loss(self):
        with pytest.raises(ValueError):
            a_posteriori_certificate(-1.0, 0.0)
