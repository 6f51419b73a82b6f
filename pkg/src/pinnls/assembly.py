"""Stacked weighted residual vector and its parameter Jacobian.

Each residual row carries sqrt(weight) so that J^T J is exactly the
weighted Gram matrix and J^T r the exact loss gradient; the loss is
L = 0.5 |r|^2 with no further weighting anywhere.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import sample_interior, sample_boundary, sample_initial, split_boundary_budget


class NonFiniteResidual(Exception):
    pass


class DimensionMismatch(Exception):
    pass


@dataclass
class ResidualSystem:
    r: np.ndarray
    J: np.ndarray            # None when assembled without Jacobian
    block_rows: dict         # block name -> slice into r
    field_cols: dict         # field name -> slice into J columns

    @property
    def loss(self):
        return 0.5 * float(self.r @ self.r)


def draw_samples(problem, n_interior, n_boundary, rng_interior, rng_boundary,
                 rng_initial=None):
    """Sample sets per tag; space-time problems split the boundary budget
    6:1 between the lateral boundary and the initial slice."""
    dom = problem.domain
    samples = {"interior": sample_interior(dom, n_interior, rng_interior)}
    tags = {b.tag for b in problem.blocks}
    if dom.spacetime and "initial" in tags:
        n_lat, n_init = split_boundary_budget(n_boundary)
        samples["boundary"] = sample_boundary(dom, n_lat, rng_boundary)
        samples["initial"] = sample_initial(dom, n_init, rng_initial or rng_boundary)
    else:
        samples["boundary"] = sample_boundary(dom, n_boundary, rng_boundary)
    return samples


def assemble(problem, samples, fields, need_jacobian=True):
    """Build (loss, ResidualSystem) for the given per-field ansatz functions.

    samples: tag -> SampleSet; fields: field name -> ansatz with
    jets(X) / param_jets(X) and n_params.
    """
    for spec in problem.fields:
        if spec.name not in fields:
            raise DimensionMismatch(f"missing params for field '{spec.name}'")

    field_order = [spec.name for spec in problem.fields]
    p_sizes = {name: fields[name].n_params for name in field_order}
    field_cols = {}
    col = 0
    for name in field_order:
        field_cols[name] = slice(col, col + p_sizes[name])
        col += p_sizes[name]
    p_total = col

    # one jet (and param-jet) evaluation per field and tag
    jet_cache = {}
    pjet_cache = {}
    needed = set()
    for blk in problem.blocks:
        for fname in blk.fields:
            needed.add((fname, blk.tag))
    for fname, tag in needed:
        X = samples[tag].points
        if need_jacobian:
            jet, pjet = fields[fname].param_jets(X)
            pjet_cache[(fname, tag)] = pjet
        else:
            jet = fields[fname].jets(X)
        jet_cache[(fname, tag)] = jet

    n_rows = 0
    block_rows = {}
    for blk in problem.blocks:
        n = 1 if blk.aggregate else samples[blk.tag].points.shape[0]
        block_rows[blk.name] = slice(n_rows, n_rows + n * blk.m)
        n_rows += n * blk.m

    r = np.empty(n_rows)
    J = np.zeros((n_rows, p_total)) if need_jacobian else None

    for blk in problem.blocks:
        ss = samples[blk.tag]
        X = ss.points
        n = X.shape[0]
        jets = {fname: jet_cache[(fname, blk.tag)] for fname in blk.fields}
        vals = blk.lin(jets, X)
        if blk.data is not None:
            vals = vals + blk.data(X)
        rows = block_rows[blk.name]
        if blk.aggregate:
            measure = ss.weight * n
            r[rows] = np.sqrt(measure) * vals.mean(axis=0)
        else:
            r[rows] = np.sqrt(ss.weight) * vals.reshape(n * blk.m)
        if need_jacobian:
            for fname in blk.fields:
                jac_vals = blk.lin({fname: pjet_cache[(fname, blk.tag)]}, X)
                cols = field_cols[fname]
                if blk.aggregate:
                    measure = ss.weight * n
                    J[rows, cols] = np.sqrt(measure) * jac_vals.mean(axis=0)
                else:
                    J[rows, cols] = np.sqrt(ss.weight) * jac_vals.reshape(
                        n * blk.m, p_sizes[fname])

    if not np.isfinite(r).all():
        raise NonFiniteResidual("residual vector contains non-finite entries")
    sys = ResidualSystem(r, J, block_rows, field_cols)
    return sys.loss, sys


def loss_gradient(sys):
    """Gradient of L = 0.5 |r|^2, i.e. J^T r."""
    return sys.J.T @ sys.r


def gram_matrix(sys, mu):
    """Damped Gram matrix J^T J + mu * Id."""
    G = sys.J.T @ sys.J
    if mu != 0.0:
        G[np.diag_indices_from(G)] += mu
    return G


def fd_residual_jacobian(problem, samples, fields, step=1e-5):
    """Central finite differences of r in theta; the independent oracle
    against which the closed-form Jacobian is checked."""
    order = [spec.name for spec in problem.fields]
    theta = np.concatenate([fields[name].theta for name in order])

    def residual_at(th):
        pos = 0
        fl = {}
        for name in order:
            P = fields[name].n_params
            fl[name] = fields[name].with_theta(th[pos: pos + P])
            pos += P
        _, sys = assemble(problem, samples, fl, need_jacobian=False)
        return sys.r

    P_total = theta.size
    J = np.empty((residual_at(theta).size, P_total))
    for j in range(P_total):
        e = np.zeros(P_total)
        e[j] = step
        J[:, j] = (residual_at(theta + e) - residual_at(theta - e)) / (2.0 * step)
    return J


def estimate_quadrature_gap(problem, samples, fields, rng_interior, rng_boundary,
                            rng_initial=None, factor=10):
    """Estimate eta = E - L by re-assembling the loss on an independent
    sample `factor` times larger and differencing."""
    L_small, _ = assemble(problem, samples, fields, need_jacobian=False)
    n_int = samples["interior"].points.shape[0]
    n_bnd = samples["boundary"].points.shape[0]
    if "initial" in samples:
        n_bnd += samples["initial"].points.shape[0]
    big = draw_samples(problem, factor * n_int, factor * n_bnd,
                       rng_interior, rng_boundary, rng_initial)
    L_big, _ = assemble(problem, big, fields, need_jacobian=False)
    return L_big - L_small
