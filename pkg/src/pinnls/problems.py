"""Catalogue of the seven least-squares PDE formulations.

Each problem bundles its unknown fields, residual blocks over tagged
sample sets, coefficient data, and a closed-form manufactured truth from
which the right-hand sides are derived analytically.  Residual blocks
are affine in the field jets; the linear part is written so that it maps
parameter-Jacobian jets (arrays with one trailing parameter axis) the
same way it maps plain jets, which is what the assembler relies on.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .geometry import Domain
from .network import Jet

LAME_LAMBDA = 0.5769
LAME_MU = 0.3846

PROBLEM_NAMES = ("poisson", "darcy", "elasticity", "stokes",
                 "transient-stokes", "parabolic", "hyperbolic", "inverse")


class InvalidRegularization(Exception):
    pass


@dataclass(frozen=True)
class FieldSpec:
    name: str
    d_out: int
    default_width: int


@dataclass
class Block:
    """One residual component: r(x) = lin(jets, x) + data(x)."""

    name: str
    tag: str                  # interior | boundary | initial
    m: int
    fields: tuple
    lin: callable
    data: callable = None
    aggregate: bool = False   # single row over the whole sample set


@dataclass
class PdeProblem:
    name: str
    domain: Domain
    fields: list
    blocks: list
    truth: dict
    error_norms: dict = dc_field(default_factory=dict)

    def field_spec(self, name):
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)


# ---------------------------------------------------------------------------
# closed-form manufactured solutions

class SeparableField:
    """Jets of u(x) = prod_i f_i(x_i) from per-coordinate derivative tables.

    Each factor callable maps a coordinate array to a list of derivatives
    [f, f', f'', f'''] (the third derivative feeds gradient-of-gradient
    fields such as the Darcy velocity).
    """

    def __init__(self, factors):
        self.factors = factors

    def _tables(self, X):
        return [fac(X[:, i]) for i, fac in enumerate(self.factors)]

    def _deriv(self, tabs, orders):
        out = np.ones(tabs[0][0].shape)
        for t, o in zip(tabs, orders):
            out = out * t[o]
        return out

    def jets(self, X):
        X = np.atleast_2d(X)
        d = len(self.factors)
        tabs = self._tables(X)
        n = X.shape[0]
        value = self._deriv(tabs, [0] * d)[:, None]
        gradient = np.empty((n, 1, d))
        hessian = np.empty((n, 1, d, d))
        for a in range(d):
            oa = [0] * d
            oa[a] = 1
            gradient[:, 0, a] = self._deriv(tabs, oa)
            for b in range(a, d):
                ob = list(oa)
                ob[b] += 1
                hessian[:, 0, a, b] = hessian[:, 0, b, a] = self._deriv(tabs, ob)
        return Jet(value, gradient, hessian)

    def grad_jets(self, X):
        """Jets of the gradient field: value = grad u, and so on one order up."""
        X = np.atleast_2d(X)
        d = len(self.factors)
        tabs = self._tables(X)
        n = X.shape[0]
        value = np.empty((n, d))
        gradient = np.empty((n, d, d))
        hessian = np.empty((n, d, d, d))
        for k in range(d):
            ok = [0] * d
            ok[k] = 1
            value[:, k] = self._deriv(tabs, ok)
            for a in range(d):
                oa = list(ok)
                oa[a] += 1
                gradient[:, k, a] = self._deriv(tabs, oa)
                for b in range(d):
                    ob = list(oa)
                    ob[b] += 1
                    hessian[:, k, a, b] = self._deriv(tabs, ob)
        return Jet(value, gradient, hessian)


class VectorTruth:
    """Stacks scalar truth components into one vector-valued jet."""

    def __init__(self, components):
        self.components = components

    def jets(self, X):
        parts = [c.jets(X) for c in self.components]
        return Jet(np.concatenate([p.value for p in parts], axis=1),
                   np.concatenate([p.gradient for p in parts], axis=1),
                   np.concatenate([p.hessian for p in parts], axis=1))


class GradTruth:
    def __init__(self, separable):
        self.separable = separable

    def jets(self, X):
        return self.separable.grad_jets(X)


def _sin_factor(s):
    ps = np.pi * s
    return [np.sin(ps), np.pi * np.cos(ps),
            -np.pi ** 2 * np.sin(ps), -np.pi ** 3 * np.cos(ps)]


def _bubble_factor(s):
    # q(s) = s(1-s)
    return [s * (1.0 - s), 1.0 - 2.0 * s,
            np.full(s.shape, -2.0), np.zeros(s.shape)]


def _elasticity_factor(s):
    # h(s) = (s^2+1) e^s
    es = np.exp(s)
    return [(s * s + 1.0) * es, (s + 1.0) ** 2 * es,
            (s * s + 4.0 * s + 3.0) * es, (s * s + 6.0 * s + 7.0) * es]


def _quartic(s):
    # g(s) = s^2 (s-1)^2 and derivatives
    return (s * s * (s - 1.0) ** 2,
            4.0 * s ** 3 - 6.0 * s ** 2 + 2.0 * s,
            12.0 * s ** 2 - 12.0 * s + 2.0,
            24.0 * s - 12.0)


SIN3 = SeparableField([_sin_factor] * 3)
SIN4 = SeparableField([_sin_factor] * 4)


class ParabolicTruth:
    """u(t, x) = exp(-pi^2 t / 4) (cos(pi x) + cos(pi y) + cos(pi z))."""

    def jets(self, X):
        X = np.atleast_2d(X)
        n = X.shape[0]
        t, xs = X[:, 0], X[:, 1:]
        T = np.exp(-np.pi ** 2 * t / 4.0)
        cos = np.cos(np.pi * xs)
        sin = np.sin(np.pi * xs)
        S = cos.sum(axis=1)
        value = (T * S)[:, None]
        gradient = np.zeros((n, 1, 4))
        gradient[:, 0, 0] = -np.pi ** 2 / 4.0 * T * S
        gradient[:, 0, 1:] = -np.pi * T[:, None] * sin
        hessian = np.zeros((n, 1, 4, 4))
        hessian[:, 0, 0, 0] = np.pi ** 4 / 16.0 * T * S
        for a in range(3):
            hessian[:, 0, 0, a + 1] = hessian[:, 0, a + 1, 0] = np.pi ** 3 / 4.0 * T * sin[:, a]
            hessian[:, 0, a + 1, a + 1] = -np.pi ** 2 * T * cos[:, a]
        return Jet(value, gradient, hessian)


class StokesVelocityTruth:
    """u = curl(psi, 0, 0) = (0, 0, -d_y psi), psi = x^2 y^2 (x-1)^2 (y-1)^2.

    With decay_rate r > 0 the field is e^{-r t} u(x) on (t, x, y, z).
    """

    def __init__(self, decay_rate=0.0):
        self.decay_rate = decay_rate

    def jets(self, X):
        X = np.atleast_2d(X)
        n = X.shape[0]
        st = self.decay_rate > 0.0
        off = 1 if st else 0
        d = X.shape[1]
        x, y = X[:, off], X[:, off + 1]
        g = _quartic(x)
        h = _quartic(y)
        value = np.zeros((n, 3))
        gradient = np.zeros((n, 3, d))
        hessian = np.zeros((n, 3, d, d))
        value[:, 2] = -g[0] * h[1]
        gradient[:, 2, off] = -g[1] * h[1]
        gradient[:, 2, off + 1] = -g[0] * h[2]
        hessian[:, 2, off, off] = -g[2] * h[1]
        hessian[:, 2, off, off + 1] = hessian[:, 2, off + 1, off] = -g[1] * h[2]
        hessian[:, 2, off + 1, off + 1] = -g[0] * h[3]
        if st:
            r = self.decay_rate
            T = np.exp(-r * X[:, 0])
            gradient[:, 2, 0] = -r * T * value[:, 2]
            hessian[:, 2, 0, 0] = r * r * T * value[:, 2]
            hessian[:, 2, 0, 1:] = hessian[:, 2, 1:, 0] = -r * T[:, None] * gradient[:, 2, 1:]
            value *= T[:, None]
            gradient[:, :, 1:] *= T[:, None, None]
            hessian[:, :, 1:, 1:] *= T[:, None, None, None]
        return Jet(value, gradient, hessian)


class DecayedSeparableTruth:
    """e^{-r t} times a separable spatial field, on (t, x...) coordinates."""

    def __init__(self, separable, decay_rate):
        self.separable = separable
        self.decay_rate = decay_rate

    def jets(self, X):
        X = np.atleast_2d(X)
        n = X.shape[0]
        r = self.decay_rate
        T = np.exp(-r * X[:, 0])
        s = self.separable.jets(X[:, 1:])
        d = X.shape[1]
        value = T[:, None] * s.value
        gradient = np.zeros((n, 1, d))
        gradient[:, :, 0] = -r * value
        gradient[:, :, 1:] = T[:, None, None] * s.gradient
        hessian = np.zeros((n, 1, d, d))
        hessian[:, :, 0, 0] = r * r * value
        hessian[:, 0, 0, 1:] = hessian[:, 0, 1:, 0] = -r * T[:, None] * s.gradient[:, 0]
        hessian[:, :, 1:, 1:] = T[:, None, None, None] * s.hessian
        return Jet(value, gradient, hessian)


# ---------------------------------------------------------------------------
# residual-block helpers (work with or without a trailing parameter axis)

def _lap(jet, spatial):
    h = jet.hessian
    return sum(h[:, :, a, a] for a in spatial)


def _div(jet, spatial):
    g = jet.gradient
    return np.stack([g[:, k, spatial[k]] for k in range(len(spatial))],
                    axis=1).sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# problem factories

def poisson():
    truth = SIN3

    def f_data(X):
        return 3.0 * np.pi ** 2 * np.prod(np.sin(np.pi * X), axis=1, keepdims=True)

    blocks = [
        Block("pde", "interior", 1, ("u",),
              lin=lambda jets, X: _lap(jets["u"], range(3)),
              data=f_data),
        Block("dirichlet", "boundary", 1, ("u",),
              lin=lambda jets, X: jets["u"].value),
    ]
    return PdeProblem("poisson", Domain(3), [FieldSpec("u", 1, 64)], blocks,
                      {"u": truth})


def elasticity():
    lam, mu = LAME_LAMBDA, LAME_MU
    phi = SeparableField([_elasticity_factor] * 3)
    truth = VectorTruth([phi, phi, phi])

    def interior_lin(jets, X):
        u = jets["u"]
        lap = _lap(u, range(3))
        grad_div = np.stack([u.hessian[:, j, :, j] for j in range(3)]).sum(axis=0)
        return mu * lap + (lam + mu) * grad_div

    def f_data(X):
        # f = -(mu lap(phi) + (lam+mu) grad(div u)) with u = (phi, phi, phi)
        tabs = [_elasticity_factor(X[:, i]) for i in range(3)]
        second = {}
        for a in range(3):
            for b in range(a, 3):
                orders = [0, 0, 0]
                orders[a] += 1
                orders[b] += 1
                v = np.ones(X.shape[0])
                for i in range(3):
                    v = v * tabs[i][orders[i]]
                second[(a, b)] = second[(b, a)] = v
        lap = sum(second[(a, a)] for a in range(3))
        f = np.empty((X.shape[0], 3))
        for k in range(3):
            grad_div_k = sum(second[(k, j)] for j in range(3))
            f[:, k] = -(mu * lap + (lam + mu) * grad_div_k)
        return f

    def g_data(X):
        return -truth.jets(X).value

    blocks = [
        Block("pde", "interior", 3, ("u",), lin=interior_lin, data=lambda X: f_data(X)),
        Block("dirichlet", "boundary", 3, ("u",),
              lin=lambda jets, X: jets["u"].value, data=g_data),
    ]
    return PdeProblem("elasticity", Domain(3), [FieldSpec("u", 3, 64)], blocks,
                      {"u": truth})


def darcy():
    p_truth = SIN3
    sigma_truth = GradTruth(SIN3)

    def grad_p(X):
        g = np.empty((X.shape[0], 3))
        sin = np.sin(np.pi * X)
        cos = np.cos(np.pi * X)
        for k in range(3):
            rest = np.prod(np.delete(sin, k, axis=1), axis=1)
            g[:, k] = np.pi * cos[:, k] * rest
        return g

    def flux_lin(jets, X):
        out = None
        if "sigma" in jets:
            out = jets["sigma"].value
        if "p" in jets:
            gp = jets["p"].gradient[:, 0]
            out = gp if out is None else out + gp
        return out

    blocks = [
        Block("flux", "interior", 3, ("sigma", "p"),
              lin=flux_lin, data=lambda X: -2.0 * grad_p(X)),
        Block("mass", "interior", 1, ("sigma",),
              lin=lambda jets, X: _div(jets["sigma"], [0, 1, 2]),
              data=lambda X: 3.0 * np.pi ** 2 * np.prod(np.sin(np.pi * X), axis=1, keepdims=True)),
        Block("dirichlet", "boundary", 1, ("p",),
              lin=lambda jets, X: jets["p"].value),
    ]
    return PdeProblem("darcy", Domain(3),
                      [FieldSpec("sigma", 3, 32), FieldSpec("p", 1, 32)], blocks,
                      {"sigma": sigma_truth, "p": p_truth},
                      error_norms={"sigma": "L2", "p": "L2"})


def _stokes_common(transient, average_penalty):
    decay = 0.5 if transient else 0.0
    u_truth = StokesVelocityTruth(decay)
    p_sep = SeparableField([_bubble_factor] * 3)
    p_truth = DecayedSeparableTruth(p_sep, decay) if transient else p_sep
    domain = Domain(3, spacetime=transient)
    off = 1 if transient else 0
    spatial = [off, off + 1, off + 2]

    def momentum_lin(jets, X):
        out = None
        if "u" in jets:
            u = jets["u"]
            out = -_lap(u, spatial)
            if transient:
                out = out + u.gradient[:, :, 0]
        if "p" in jets:
            gp = jets["p"].gradient[:, 0, off:]
            out = gp if out is None else out + gp
        return out

    def f_data(X):
        # f = (dt u) - lap u + grad p on the truth
        n = X.shape[0]
        x, y = X[:, off], X[:, off + 1]
        g = _quartic(x)
        h = _quartic(y)
        gp = np.empty((n, 3))
        q = [None] * 3
        for i in range(3):
            s = X[:, off + i]
            q[i] = (s * (1.0 - s), 1.0 - 2.0 * s)
        for k in range(3):
            rest = 1.0
            for i in range(3):
                rest = rest * (q[i][1] if i == k else q[i][0])
            gp[:, k] = rest
        f = gp.copy()
        u3 = -g[0] * h[1]
        f[:, 2] += g[2] * h[1] + g[0] * h[3]        # -lap(u3)
        if transient:
            T = np.exp(-0.5 * X[:, 0])
            f[:, 2] += -0.5 * u3                    # dt u3 (before decay factor)
            f *= T[:, None]
        return -f

    def g_data(X):
        return -u_truth.jets(X).value

    blocks = [
        Block("momentum", "interior", 3, ("u", "p"), lin=momentum_lin, data=f_data),
        Block("divergence", "interior", 1, ("u",),
              lin=lambda jets, X: _div(jets["u"], spatial)),
        Block("dirichlet", "boundary", 3, ("u",),
              lin=lambda jets, X: jets["u"].value, data=g_data),
    ]
    if average_penalty:
        blocks.append(Block("pressure-mean", "interior", 1, ("p",),
                            lin=lambda jets, X: jets["p"].value, aggregate=True))
    if transient:
        blocks.append(Block("initial", "initial", 3, ("u",),
                            lin=lambda jets, X: jets["u"].value, data=g_data))
    name = "transient-stokes" if transient else "stokes"
    return PdeProblem(name, domain,
                      [FieldSpec("u", 3, 32), FieldSpec("p", 1, 32)], blocks,
                      {"u": u_truth, "p": p_truth},
                      error_norms={"u": "L2", "p": "H1semi"})


def stokes(transient=False, average_penalty=False):
    return _stokes_common(transient, average_penalty)


def parabolic():
    truth = ParabolicTruth()

    def f_data(X):
        T = np.exp(-np.pi ** 2 * X[:, 0] / 4.0)
        S = np.cos(np.pi * X[:, 1:]).sum(axis=1)
        return (-0.75 * np.pi ** 2 * T * S)[:, None]

    def g_data(X):
        return -truth.jets(X).value

    blocks = [
        Block("pde", "interior", 1, ("u",),
              lin=lambda jets, X: jets["u"].gradient[:, :, 0] - _lap(jets["u"], [1, 2, 3]),
              data=f_data),
        Block("dirichlet", "boundary", 1, ("u",),
              lin=lambda jets, X: jets["u"].value, data=g_data),
        Block("initial", "initial", 1, ("u",),
              lin=lambda jets, X: jets["u"].value,
              data=lambda X: -np.cos(np.pi * X[:, 1:]).sum(axis=1, keepdims=True)),
    ]
    return PdeProblem("parabolic", Domain(3, spacetime=True),
                      [FieldSpec("u", 1, 64)], blocks, {"u": truth})


def hyperbolic():
    truth = SIN4

    def f_data(X):
        return -2.0 * np.pi ** 2 * np.prod(np.sin(np.pi * X), axis=1, keepdims=True)

    blocks = [
        Block("pde", "interior", 1, ("u",),
              lin=lambda jets, X: jets["u"].hessian[:, :, 0, 0] - _lap(jets["u"], [1, 2, 3]),
              data=f_data),
        Block("dirichlet", "boundary", 1, ("u",),
              lin=lambda jets, X: jets["u"].value),
        Block("initial-value", "initial", 1, ("u",),
              lin=lambda jets, X: jets["u"].value),
        Block("initial-velocity", "initial", 1, ("u",),
              lin=lambda jets, X: jets["u"].gradient[:, :, 0],
              data=lambda X: -np.pi * np.prod(np.sin(np.pi * X[:, 1:]), axis=1, keepdims=True)),
    ]
    return PdeProblem("hyperbolic", Domain(3, spacetime=True),
                      [FieldSpec("u", 1, 64)], blocks, {"u": truth})


def inverse_source(eta_reg=3e-3, observation_noise=0.0, noise_seed=0):
    if eta_reg <= 0:
        raise InvalidRegularization(f"eta_reg must be > 0, got {eta_reg}")
    u_truth = SIN3
    f_truth = ScaledTruth(SIN3, 3.0 * np.pi ** 2)

    def u_d(X):
        obs = np.prod(np.sin(np.pi * X), axis=1, keepdims=True)
        if observation_noise > 0.0:
            from .linalg import seeded_rng
            obs = obs + observation_noise * seeded_rng(noise_seed, 77).standard_normal(obs.shape)
        return obs

    def pde_lin(jets, X):
        out = None
        if "u" in jets:
            out = _lap(jets["u"], range(3))
        if "f" in jets:
            fv = jets["f"].value
            out = fv if out is None else out + fv
        return out

    blocks = [
        Block("pde", "interior", 1, ("u", "f"), lin=pde_lin),
        Block("observation", "interior", 1, ("u",),
              lin=lambda jets, X: jets["u"].value, data=lambda X: -u_d(X)),
        Block("dirichlet", "boundary", 1, ("u",),
              lin=lambda jets, X: jets["u"].value),
        Block("regularization", "interior", 1, ("f",),
              lin=lambda jets, X: eta_reg * jets["f"].value),
    ]
    return PdeProblem("inverse", Domain(3),
                      [FieldSpec("u", 1, 32), FieldSpec("f", 1, 32)], blocks,
                      {"u": u_truth, "f": f_truth})


class TruthAnsatz:
    """Manufactured truth viewed as a parameterless ansatz, so it can be
    pushed through the assembler for consistency checks."""

    n_params = 0

    def __init__(self, truth):
        self.truth = truth

    def jets(self, X):
        return self.truth.jets(X)


class ScaledTruth:
    def __init__(self, base, scale):
        self.base = base
        self.scale = scale

    def jets(self, X):
        j = self.base.jets(X)
        return Jet(self.scale * j.value, self.scale * j.gradient, self.scale * j.hessian)


def make_problem(name, **kwargs):
    """Problem lookup by CLI name."""
    factories = {
        "poisson": poisson,
        "darcy": darcy,
        "elasticity": elasticity,
        "stokes": lambda **kw: stokes(transient=False, **kw),
        "transient-stokes": lambda **kw: stokes(transient=True, **kw),
        "parabolic": parabolic,
        "hyperbolic": hyperbolic,
        "inverse": inverse_source,
    }
    if name not in factories:
        raise KeyError(f"unknown pde '{name}'; valid: {', '.join(PROBLEM_NAMES)}")
    return factories[name](**kwargs)
