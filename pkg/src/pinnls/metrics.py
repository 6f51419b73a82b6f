"""Monte Carlo error norms, the Gagliardo fractional seminorm, and the
a posteriori residual certificate."""

import numpy as np

from .linalg import uniform_points


class ZeroTruthNorm(Exception):
    pass


def mc_error(field, truth, domain, n_points, rng):
    """Absolute and relative L2 / H1 / H1-seminorm errors on fresh points.

    The H1 quantities use the full gradient (including the time direction
    for space-time fields).  Returns
    {"L2": (abs, rel), "H1semi": (abs, rel), "H1": (abs, rel)}.
    """
    X = uniform_points(rng, n_points, domain.n_coords)
    approx = field.jets(X)
    exact = truth.jets(X)
    w = domain.interior_measure / n_points

    dv = approx.value - exact.value
    dg = approx.gradient - exact.gradient
    l2_err2 = w * (dv ** 2).sum()
    h1s_err2 = w * (dg ** 2).sum()
    l2_tru2 = w * (exact.value ** 2).sum()
    h1s_tru2 = w * (exact.gradient ** 2).sum()

    def rel(err2, tru2):
        if np.sqrt(tru2) < 1e-14:
            raise ZeroTruthNorm("truth norm too small for a relative error")
        return np.sqrt(err2 / tru2)

    return {
        "L2": (np.sqrt(l2_err2), rel(l2_err2, l2_tru2)),
        "H1semi": (np.sqrt(h1s_err2), rel(h1s_err2, h1s_tru2)),
        "H1": (np.sqrt(l2_err2 + h1s_err2), rel(l2_err2 + h1s_err2, l2_tru2 + h1s_tru2)),
    }


def gagliardo_seminorm(e, s, d, n_pairs, rng, eps_cut=1e-3):
    """Monte Carlo estimate of the squared order-s Gagliardo seminorm on
    the unit cube: the double integral of |e(x)-e(y)|^2 / |x-y|^(d+2s)
    over pairs with |x-y| >= eps_cut.

    The kernel is truncated at eps_cut, so the estimate is a lower bound
    of the (possibly infinite) untruncated integral; report it together
    with eps_cut.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("order s must lie in (0,1)")
    if eps_cut <= 0.0:
        raise ValueError("eps_cut must be positive")
    total = 0.0
    remaining = n_pairs
    while remaining > 0:
        m = min(remaining, 200_000)
        x = uniform_points(rng, m, d)
        y = uniform_points(rng, m, d)
        r = np.sqrt(((x - y) ** 2).sum(axis=1))
        keep = r >= eps_cut
        diff = np.zeros(m)
        diff[keep] = (e(x[keep]) - e(y[keep])) ** 2 / r[keep] ** (d + 2.0 * s)
        total += diff.sum()
        remaining -= m
    # |Omega|^2 = 1 for the unit cube
    return total / n_pairs


def a_posteriori_certificate(loss, quadrature_gap):
    """Computable bracket 2 (L + max(eta, 0)) of the residual error bound.

    The rigorous bound carries an unknown coercivity constant 1/alpha in
    front; it is normalized to 1 here, so the certificate controls the
    squared error only up to a per-problem constant.
    """
    if loss < 0:
        raise ValueError("loss must be non-negative")
    return 2.0 * (loss + max(quadrature_gap, 0.0))
