"""Shallow tanh networks with closed-form input derivatives and parameter Jacobians.

A network is u_k(x) = sum_i V[k,i] tanh(W[i,:].x + b[i]) + c[k].  All
derivative information needed by the PDE residuals (values, gradients,
full Hessians, and their derivatives with respect to every parameter)
is evaluated in closed form, batched over points.
"""

import json
from dataclasses import dataclass

import numpy as np


class DimensionMismatch(Exception):
    pass


def tanh_derivs(z):
    """tanh and its first three derivatives, elementwise."""
    s0 = np.tanh(z)
    s1 = 1.0 - s0 * s0
    s2 = -2.0 * s0 * s1
    s3 = -2.0 * (s1 * s1 + s0 * s2)
    return s0, s1, s2, s3


@dataclass
class NetworkParams:
    """Flat parameter vector of a depth-2 network.

    theta layout (part of the checkpoint contract):
    [W row-major (width x d_in), b (width), V row-major (d_out x width), c (d_out)].
    """

    d_in: int
    d_out: int
    width: int
    theta: np.ndarray

    @property
    def n_params(self):
        return self.width * self.d_in + self.width + self.d_out * self.width + self.d_out

    def _offsets(self):
        w, di, do = self.width, self.d_in, self.d_out
        return w * di, w * di + w, w * di + w + do * w

    @property
    def W(self):
        return self.theta[: self._offsets()[0]].reshape(self.width, self.d_in)

    @property
    def b(self):
        o = self._offsets()
        return self.theta[o[0]: o[1]]

    @property
    def V(self):
        o = self._offsets()
        return self.theta[o[1]: o[2]].reshape(self.d_out, self.width)

    @property
    def c(self):
        return self.theta[self._offsets()[2]:]

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (self.n_params,):
            raise DimensionMismatch(
                f"theta has length {self.theta.size}, expected {self.n_params}")

    @classmethod
    def init(cls, d_in, d_out, width, rng):
        """Seeded initialization: W, b ~ U(-1,1); V, c ~ U(-1/sqrt(w), 1/sqrt(w)).

        Keeps pre-activations O(1) on the unit cube and the initial Gram
        matrix well scaled.
        """
        s = 1.0 / np.sqrt(width)
        theta = np.concatenate([
            rng.uniform(-1.0, 1.0, width * d_in),
            rng.uniform(-1.0, 1.0, width),
            rng.uniform(-s, s, d_out * width),
            rng.uniform(-s, s, d_out),
        ])
        return cls(d_in, d_out, width, theta)

    def with_theta(self, theta):
        return NetworkParams(self.d_in, self.d_out, self.width, theta)


@dataclass
class Jet:
    """Value, gradient and Hessian of a (possibly vector-valued) field.

    Batched shapes: value (n, d_out), gradient (n, d_out, d_in),
    hessian (n, d_out, d_in, d_in).  Arrays may carry one extra trailing
    parameter axis when produced by eval_param_jets.
    """

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray


def eval_jets(params, X):
    """Batched value/gradient/Hessian of the network at points X (n, d_in)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.d_in:
        raise DimensionMismatch(f"points have dim {X.shape[1]}, network expects {params.d_in}")
    W, b, V = params.W, params.b, params.V
    z = X @ W.T + b
    s0 = np.tanh(z)
    s1 = 1.0 - s0 * s0
    s2 = -2.0 * s0 * s1
    value = s0 @ V.T + params.c
    # gradient[n,k,a] = sum_i V[k,i] s1[n,i] W[i,a], via BLAS
    gradient = (s1[:, None, :] * V) @ W
    WW = W[:, :, None] * W[:, None, :]
    hessian = np.tensordot(s2[:, None, :] * V, WW, axes=(2, 0))
    return Jet(value, gradient, hessian)


def eval_param_jets(params, X):
    """Jets plus their derivatives with respect to every network parameter.

    Returns (jet, param_jet) where param_jet arrays carry a trailing axis
    of length n_params in the theta layout of NetworkParams.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.d_in:
        raise DimensionMismatch(f"points have dim {X.shape[1]}, network expects {params.d_in}")
    n = X.shape[0]
    w, di, do = params.width, params.d_in, params.d_out
    P = params.n_params
    W, V = params.W, params.V
    z = X @ W.T + params.b
    s0, s1, s2, s3 = tanh_derivs(z)

    # same code path as eval_jets, so the returned jets agree bit-for-bit
    jet = eval_jets(params, X)

    oW, ob, oV = w * di, w * di + w, w * di + w + do * w

    vj = np.zeros((n, do, P))
    vj[:, :, :oW] = np.einsum("ki,ni,nj->nkij", V, s1, X).reshape(n, do, oW)
    vj[:, :, oW:ob] = np.einsum("ki,ni->nki", V, s1)
    vj_V = np.zeros((n, do, do, w))
    for k in range(do):
        vj_V[:, k, k, :] = s0
        vj[:, k, oV + k] = 1.0
    vj[:, :, ob:oV] = vj_V.reshape(n, do, do * w)

    gj = np.zeros((n, do, di, P))
    gW = np.einsum("ki,ni,nj,ia->nkaij", V, s2, X, W)
    vs1 = np.einsum("ki,ni->nki", V, s1)
    for a in range(di):
        gW[:, :, a, :, a] += vs1
    gj[:, :, :, :oW] = gW.reshape(n, do, di, oW)
    gj[:, :, :, oW:ob] = np.einsum("ki,ni,ia->nkai", V, s2, W)
    gj_V = np.zeros((n, do, di, do, w))
    s1W = np.einsum("nj,ja->naj", s1, W)
    for k in range(do):
        gj_V[:, k, :, k, :] = s1W
    gj[:, :, :, ob:oV] = gj_V.reshape(n, do, di, do * w)

    hj = np.zeros((n, do, di, di, P))
    hW = np.einsum("ki,ni,nj,ia,ib->nkabij", V, s3, X, W, W)
    vs2W = np.einsum("ki,ni,ia->nkai", V, s2, W)
    for a in range(di):
        hW[:, :, a, :, :, a] += vs2W
        hW[:, :, :, a, :, a] += vs2W
    hj[:, :, :, :, :oW] = hW.reshape(n, do, di, di, oW)
    hj[:, :, :, :, oW:ob] = np.einsum("ki,ni,ia,ib->nkabi", V, s3, W, W)
    hj_V = np.zeros((n, do, di, di, do, w))
    s2WW = np.einsum("nj,ja,jb->nabj", s2, W, W)
    for k in range(do):
        hj_V[:, k, :, :, k, :] = s2WW
    hj[:, :, :, :, ob:oV] = hj_V.reshape(n, do, di, di, do * w)

    return jet, Jet(vj, gj, hj)


def eval_jet(params, x):
    """Single-point jet with unbatched arrays."""
    jet = eval_jets(params, np.asarray(x, dtype=np.float64)[None, :])
    return Jet(jet.value[0], jet.gradient[0], jet.hessian[0])


def eval_param_jet(params, x):
    """Single-point (jet, param_jet) with unbatched arrays."""
    jet, pj = eval_param_jets(params, np.asarray(x, dtype=np.float64)[None, :])
    return (Jet(jet.value[0], jet.gradient[0], jet.hessian[0]),
            Jet(pj.value[0], pj.gradient[0], pj.hessian[0]))


class NetworkField:
    """Plain network ansatz exposing batched jet evaluation."""

    def __init__(self, params):
        self.params = params

    @property
    def n_params(self):
        return self.params.n_params

    @property
    def theta(self):
        return self.params.theta

    def with_theta(self, theta):
        return NetworkField(self.params.with_theta(theta))

    def jets(self, X):
        return eval_jets(self.params, X)

    def param_jets(self, X):
        return eval_param_jets(self.params, X)


class HardBoundaryField:
    """Ansatz u = G + B * N enforcing boundary values exactly.

    G is a jet-valued lift matching the Dirichlet data on the boundary and
    B a jet-valued scalar bubble vanishing there; both are parameter-free
    closed forms, so the trace of u equals G exactly.
    """

    def __init__(self, params, lift, bubble):
        self.params = params
        self.lift = lift
        self.bubble = bubble

    @property
    def n_params(self):
        return self.params.n_params

    @property
    def theta(self):
        return self.params.theta

    def with_theta(self, theta):
        return HardBoundaryField(self.params.with_theta(theta), self.lift, self.bubble)

    def _combine(self, X, nj):
        G = self.lift(X)
        B = self.bubble(X)
        bv = B.value[:, 0]            # bubble is scalar
        bg = B.gradient[:, 0, :]
        bh = B.hessian[:, 0, :, :]
        value = G.value + bv[:, None] * nj.value
        gradient = (G.gradient
                    + nj.value[:, :, None] * bg[:, None, :]
                    + bv[:, None, None] * nj.gradient)
        cross = bg[:, None, :, None] * nj.gradient[:, :, None, :]
        hessian = (G.hessian
                   + nj.value[:, :, None, None] * bh[:, None, :, :]
                   + cross + cross.transpose(0, 1, 3, 2)
                   + bv[:, None, None, None] * nj.hessian)
        return Jet(value, gradient, hessian)

    def jets(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self._combine(X, eval_jets(self.params, X))

    def param_jets(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        nj, npj = eval_param_jets(self.params, X)
        B = self.bubble(X)
        bv = B.value[:, 0]
        bg = B.gradient[:, 0, :]
        bh = B.hessian[:, 0, :, :]
        vj = bv[:, None, None] * npj.value
        gj = (bg[:, None, :, None] * npj.value[:, :, None, :]
              + bv[:, None, None, None] * npj.gradient)
        cross = bg[:, None, :, None, None] * npj.gradient[:, :, None, :, :]
        hj = (bh[:, None, :, :, None] * npj.value[:, :, None, None, :]
              + cross + cross.transpose(0, 1, 3, 2, 4)
              + bv[:, None, None, None, None] * npj.hessian)
        return self._combine(X, nj), Jet(vj, gj, hj)


def unit_cube_bubble(X):
    """Jet of B(x) = prod_i x_i (1 - x_i), vanishing on the unit-cube boundary."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    f = X * (1.0 - X)
    f1 = 1.0 - 2.0 * X
    value = f.prod(axis=1)
    gradient = np.empty((n, d))
    hessian = np.empty((n, d, d))
    for a in range(d):
        rest = np.delete(f, a, axis=1).prod(axis=1)
        gradient[:, a] = f1[:, a] * rest
        hessian[:, a, a] = -2.0 * rest
        for bb in range(a + 1, d):
            rest2 = np.delete(f, [a, bb], axis=1).prod(axis=1)
            hessian[:, a, bb] = hessian[:, bb, a] = f1[:, a] * f1[:, bb] * rest2
    return Jet(value[:, None], gradient[:, None, :], hessian[:, None, :, :])


def zero_lift(X):
    """Jet of the zero boundary lift (for homogeneous Dirichlet data)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    return Jet(np.zeros((n, 1)), np.zeros((n, 1, d)), np.zeros((n, 1, d, d)))


def save_checkpoint(path, params, seed=None, meta=None):
    """JSON checkpoint; float round-trip is bit-exact via shortest repr."""
    doc = {
        "d_in": params.d_in,
        "d_out": params.d_out,
        "width": params.width,
        "theta": params.theta.tolist(),
        "seed": seed,
        "meta": meta or {},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    params = NetworkParams(doc["d_in"], doc["d_out"], doc["width"],
                           np.asarray(doc["theta"], dtype=np.float64))
    return params, doc
