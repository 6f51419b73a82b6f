import numpy as np
import pytest

from pinnls.assembly import (DimensionMismatch, NonFiniteResidual,
                             ResidualSystem, assemble, draw_samples,
                             estimate_quadrature_gap, fd_residual_jacobian,
                             gram_matrix, loss_gradient)
from pinnls.geometry import Domain
from pinnls.linalg import seeded_rng
from pinnls.network import NetworkField, NetworkParams
from pinnls.problems import (Block, FieldSpec, PdeProblem, TruthAnsatz,
                             make_problem)


def constant_source_problem(value=1.0):
    """u-independent unit residual on the interior: the loss is exactly
    0.5 * value^2 * |Omega| for any sample, any ansatz."""
    blocks = [
        Block("pde", "interior", 1, ("u",),
              lin=lambda jets, X: 0.0 * jets["u"].value,
              data=lambda X: np.full((X.shape[0], 1), value)),
    ]
    return PdeProblem("constant", Domain(3), [FieldSpec("u", 1, 4)], blocks,
                      truth={})


def small_fields(problem, seed=0, width=3):
    fields = {}
    for i, spec in enumerate(problem.fields):
        rng = seeded_rng(seed, 0, i)
        fields[spec.name] = NetworkField(
            NetworkParams.init(problem.domain.n_coords, spec.d_out, width, rng))
    return fields


def small_samples(problem, seed=0, n_interior=20, n_boundary=10):
    return draw_samples(problem, n_interior, n_boundary,
                        seeded_rng(seed, 1), seeded_rng(seed, 2),
                        seeded_rng(seed, 3))


class TestLossValues:
    def test_constant_residual_loss_is_exact(self):
        problem = constant_source_problem()
        samples = small_samples(problem, n_interior=17)
        loss, _ = assemble(problem, samples, small_fields(problem))
        assert np.isclose(loss, 0.5, rtol=0, atol=1e-15)

    def test_constant_residual_loss_scales_quadratically(self):
        problem = constant_source_problem(value=3.0)
        samples = small_samples(problem)
        loss, _ = assemble(problem, samples, small_fields(problem))
        assert np.isclose(loss, 4.5, rtol=0, atol=1e-14)

    def test_loss_matches_scalar_accumulation(self):
        problem = make_problem("poisson")
        samples = small_samples(problem, seed=1)
        loss, sys = assemble(problem, samples, small_fields(problem, seed=1))
        acc = 0.0
        for ri in sys.r:
            acc += 0.5 * ri * ri
        assert abs(loss - acc) <= 1e-12 * max(1.0, acc)

    def test_truth_ansatz_loss_vanishes(self):
        problem = make_problem("poisson")
        samples = small_samples(problem, seed=2, n_interior=100, n_boundary=50)
        fields = {"u": TruthAnsatz(problem.truth["u"])}
        loss, _ = assemble(problem, samples, fields, need_jacobian=False)
        assert loss <= 1e-16

    def test_row_weighting(self):
        # interior rows carry sqrt(1/n_int), boundary rows sqrt(6/n_bnd)
        problem = make_problem("poisson")
        samples = small_samples(problem, seed=3, n_interior=25, n_boundary=6)
        _, sys = assemble(problem, samples, small_fields(problem, seed=3),
                          need_jacobian=False)
        X = samples["boundary"].points
        fields = small_fields(problem, seed=3)
        raw = fields["u"].jets(X).value[:, 0]
        assert np.allclose(sys.r[sys.block_rows["dirichlet"]], raw, rtol=1e-15)


class TestJacobian:
    @pytest.mark.parametrize("name", ["poisson", "darcy", "parabolic", "inverse"])
    def test_matches_finite_differences(self, name):
        problem = make_problem(name)
        samples = small_samples(problem, seed=4, n_interior=10, n_boundary=6)
        fields = small_fields(problem, seed=4)
        _, sys = assemble(problem, samples, fields)
        J_fd = fd_residual_jacobian(problem, samples, fields)
        scale = max(1.0, np.abs(J_fd).max())
        assert np.abs(sys.J - J_fd).max() <= 1e-6 * scale

    def test_field_column_layout(self):
        problem = make_problem("darcy")
        samples = small_samples(problem, seed=5)
        fields = small_fields(problem, seed=5, width=3)
        _, sys = assemble(problem, samples, fields)
        P_sigma = fields["sigma"].n_params
        P_p = fields["p"].n_params
        assert sys.field_cols["sigma"] == slice(0, P_sigma)
        assert sys.field_cols["p"] == slice(P_sigma, P_sigma + P_p)
        # the mass block only involves sigma, so its p columns are zero
        rows = sys.block_rows["mass"]
        assert np.all(sys.J[rows, sys.field_cols["p"]] == 0.0)

    def test_missing_field_raises(self):
        problem = make_problem("poisson")
        samples = small_samples(problem)
        with pytest.raises(DimensionMismatch):
            assemble(problem, samples, {})


class TestAggregateBlock:
    def test_mean_row(self):
        problem = make_problem("stokes", average_penalty=True)
        samples = small_samples(problem, seed=6)
        fields = small_fields(problem, seed=6)
        _, sys = assemble(problem, samples, fields, need_jacobian=False)
        rows = sys.block_rows["pressure-mean"]
        assert rows.stop - rows.start == 1
        p_vals = fields["p"].jets(samples["interior"].points).value[:, 0]
        assert np.isclose(sys.r[rows][0], p_vals.mean(), rtol=1e-14)


class TestGradientAndGram:
    def test_loss_gradient_example(self):
        sys = ResidualSystem(np.array([1.0, 2.0]),
                             np.array([[1.0, 0.0], [0.0, 3.0]]), {}, {})
        assert np.array_equal(loss_gradient(sys), [1.0, 6.0])

    def test_loss_gradient_matches_finite_differences(self):
        problem = make_problem("poisson")
        samples = small_samples(problem, seed=7, n_interior=15, n_boundary=8)
        fields = small_fields(problem, seed=7)
        _, sys = assemble(problem, samples, fields)
        g = loss_gradient(sys)
        theta = fields["u"].theta
        step = 1e-6
        for j in range(theta.size):
            e = np.zeros(theta.size)
            e[j] = step
            Lp, _ = assemble(problem, samples,
                             {"u": fields["u"].with_theta(theta + e)},
                             need_jacobian=False)
            Lm, _ = assemble(problem, samples,
                             {"u": fields["u"].with_theta(theta - e)},
                             need_jacobian=False)
            fd = (Lp - Lm) / (2 * step)
            assert abs(fd - g[j]) <= 1e-5 * max(1.0, abs(fd))

    def test_gram_example(self):
        sys = ResidualSystem(np.zeros(2), np.array([[1.0, 2.0], [0.0, 1.0]]), {}, {})
        G = gram_matrix(sys, 0.5)
        assert np.array_equal(G, [[1.5, 2.0], [2.0, 5.5]])

    def test_gram_matches_row_accumulation(self):
        problem = make_problem("poisson")
        samples = small_samples(problem, seed=8, n_interior=12, n_boundary=5)
        _, sys = assemble(problem, samples, small_fields(problem, seed=8))
        G = gram_matrix(sys, 0.0)
        P = sys.J.shape[1]
        acc = np.zeros((P, P))
        for row in sys.J:
            acc += np.outer(row, row)
        assert np.abs(G - acc).max() <= 1e-12 * max(1.0, np.abs(acc).max())

    def test_gram_damping_only_touches_diagonal(self):
        sys = ResidualSystem(np.zeros(2), np.eye(2), {}, {})
        assert np.array_equal(gram_matrix(sys, 1e-5), (1 + 1e-5) * np.eye(2))


def test_non_finite_residual_raises():
    problem = constant_source_problem(value=np.inf)
    samples = small_samples(problem)
    with pytest.raises(NonFiniteResidual):
        assemble(problem, samples, small_fields(problem))


class TestQuadratureGap:
    def test_constant_residual_has_zero_gap(self):
        problem = constant_source_problem()
        samples = small_samples(problem, seed=9)
        gap = estimate_quadrature_gap(problem, samples, small_fields(problem, seed=9),
                                      seeded_rng(9, 5, 0), seeded_rng(9, 5, 1))
        assert gap == 0.0

    def test_gap_is_small_relative_to_loss(self):
        problem = make_problem("poisson")
        samples = small_samples(problem, seed=10, n_interior=500, n_boundary=100)
        fields = small_fields(problem, seed=10, width=8)
        loss, _ = assemble(problem, samples, fields, need_jacobian=False)
        gap = estimate_quadrature_gap(problem, samples, fields,
                                      seeded_rng(10, 5, 0), seeded_rng(10, 5, 1))
        assert abs(gap) < 0.5 * loss

    def test_deterministic(self):
        problem = make_problem("parabolic")
        samples = small_samples(problem, seed=11)
        fields = small_fields(problem, seed=11)
        args = (seeded_rng(11, 5, 0), seeded_rng(11, 5, 1), seeded_rng(11, 5, 2))
        g1 = estimate_quadrature_gap(problem, samples, fields, *args)
        args = (seeded_rng(11, 5, 0), seeded_rng(11, 5, 1), seeded_rng(11, 5, 2))
        g2 = estimate_quadrature_gap(problem, samples, fields, *args)
        assert g1 == g2


def test_spacetime_budget_split():
    problem = make_problem("parabolic")
    samples = draw_samples(problem, 100, 70, seeded_rng(12, 1),
                           seeded_rng(12, 2), seeded_rng(12, 3))
    assert samples["boundary"].points.shape[0] == 60
    assert samples["initial"].points.shape[0] == 10
