"""Levenberg-Marquardt damped natural-gradient training loop.

Update rule: d = (J^T J + mu Id)^{-1} J^T r with mu = min(L, 1e-5),
followed by an exhaustive dyadic line search on the true loss.  The
step grid contains alpha = 0, so the loss history is non-increasing by
construction.
"""

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .assembly import assemble, draw_samples, estimate_quadrature_gap, gram_matrix, loss_gradient
from .linalg import seeded_rng, solve_spd
from .metrics import a_posteriori_certificate, mc_error
from .network import HardBoundaryField, NetworkField, NetworkParams, unit_cube_bubble, zero_lift

MU_CAP = 1e-5
LINE_SEARCH_GRID = np.concatenate([[0.0], 2.0 ** -np.arange(31, dtype=np.float64)])


@dataclass
class TrainConfig:
    iterations: int = 500
    n_interior: int = 1000
    n_boundary: int = 100
    n_eval: int = 10000
    seed: int = 0
    widths: dict = dc_field(default_factory=dict)   # field name -> width override
    checkpoint_stride: int = 50
    hard_boundary: bool = False
    loss_floor: float = 1e-14
    stall_limit: int = 10
    gap_factor: int = 10


@dataclass
class Checkpoint:
    iteration: int
    loss: float
    mu: float
    quadrature_gap: float
    certificate: float
    errors: dict     # field -> {"L2": (abs, rel), "H1": ..., "H1semi": ...}


@dataclass
class TrainReport:
    problem: str
    config: TrainConfig
    loss_history: list
    alphas: list
    mus: list
    checkpoints: list
    fields: dict             # field name -> trained ansatz
    stopped_early: bool
    stop_reason: str
    wall_time: float

    @property
    def final_loss(self):
        return self.loss_history[-1]


def lm_direction(sys, mu):
    """Solve (J^T J + mu Id) d = J^T r."""
    return solve_spd(gram_matrix(sys, mu), loss_gradient(sys))


def line_search(loss_at, grid=LINE_SEARCH_GRID):
    """argmin of the re-assembled loss over the step grid.

    Ties break toward the larger step so a flat landscape still moves.
    Returns (alpha, loss at alpha).
    """
    best_alpha, best_loss = None, np.inf
    for alpha in sorted(grid, reverse=True):
        L = loss_at(alpha)
        if L < best_loss:
            best_alpha, best_loss = alpha, L
    return best_alpha, best_loss


def _split_theta(theta, fields, order):
    out = {}
    pos = 0
    for name in order:
        P = fields[name].n_params
        out[name] = theta[pos: pos + P]
        pos += P
    return out


def init_fields(problem, config):
    """Seeded per-field networks; optional hard-boundary wrap for problems
    with homogeneous Dirichlet data on the unit cube."""
    fields = {}
    for i, spec in enumerate(problem.fields):
        width = config.widths.get(spec.name, spec.default_width)
        rng = seeded_rng(config.seed, 0, i)
        params = NetworkParams.init(problem.domain.n_coords, spec.d_out, width, rng)
        if config.hard_boundary:
            if problem.name != "poisson":
                raise ValueError("hard-boundary ansatz is only wired up for poisson")
            fields[spec.name] = HardBoundaryField(params, zero_lift, unit_cube_bubble)
        else:
            fields[spec.name] = NetworkField(params)
    return fields


def evaluate_checkpoint(problem, fields, samples, config, iteration, loss, mu):
    errors = {}
    for spec in problem.fields:
        errors[spec.name] = mc_error(fields[spec.name], problem.truth[spec.name],
                                     problem.domain, config.n_eval,
                                     seeded_rng(config.seed, 4))
    gap = estimate_quadrature_gap(
        problem, samples, fields,
        seeded_rng(config.seed, 5, iteration, 0),
        seeded_rng(config.seed, 5, iteration, 1),
        seeded_rng(config.seed, 5, iteration, 2),
        factor=config.gap_factor)
    cert = a_posteriori_certificate(loss, gap)
    return Checkpoint(iteration, loss, mu, gap, cert, errors)


def train(problem, config):
    """Full training recipe: fixed collocation points, LM natural-gradient
    steps, dyadic line search, periodic error checkpoints."""
    t0 = time.perf_counter()
    fields = init_fields(problem, config)
    order = [spec.name for spec in problem.fields]
    samples = draw_samples(problem, config.n_interior, config.n_boundary,
                           seeded_rng(config.seed, 1),
                           seeded_rng(config.seed, 2),
                           seeded_rng(config.seed, 3))

    def loss_only(fl):
        L, _ = assemble(problem, samples, fl, need_jacobian=False)
        return L

    theta = np.concatenate([fields[name].theta for name in order])

    def fields_at(th):
        parts = _split_theta(th, fields, order)
        return {name: fields[name].with_theta(parts[name]) for name in order}

    loss_history, alphas, mus, checkpoints = [], [], [], []
    stopped_early, stop_reason = False, "completed"
    stall = 0

    L, sys = assemble(problem, samples, fields_at(theta))
    for k in range(config.iterations):
        loss_history.append(L)
        if L < config.loss_floor:
            stopped_early, stop_reason = True, f"loss below {config.loss_floor}"
            break
        mu = min(L, MU_CAP)
        mus.append(mu)
        d = lm_direction(sys, mu)
        alpha, _ = line_search(lambda a: loss_only(fields_at(theta - a * d)))
        alphas.append(alpha)
        theta = theta - alpha * d
        if alpha == 0.0:
            stall += 1
            if stall >= config.stall_limit:
                stopped_early, stop_reason = True, f"no progress for {stall} steps"
                loss_history.append(L)
                break
        else:
            stall = 0
        L, sys = assemble(problem, samples, fields_at(theta))
        if (k + 1) % config.checkpoint_stride == 0:
            checkpoints.append(evaluate_checkpoint(
                problem, fields_at(theta), samples, config, k + 1, L, mu))
    else:
        loss_history.append(L)

    final_fields = fields_at(theta)
    if not checkpoints or checkpoints[-1].iteration != len(loss_history) - 1:
        checkpoints.append(evaluate_checkpoint(
            problem, final_fields, samples, config,
            len(loss_history) - 1, loss_history[-1],
            min(loss_history[-1], MU_CAP)))

    return TrainReport(problem.name, config, loss_history, alphas, mus,
                       checkpoints, final_fields, stopped_early, stop_reason,
                       time.perf_counter() - t0)
