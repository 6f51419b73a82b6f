"""Unit-cube and space-time domains with Monte Carlo samplers.

Space-time points are ordered (t, x_1, ..., x_d) with I = (0,1) and
Omega = (0,1)^d.  Every sampler returns a SampleSet whose weight times
point count equals the measure of the sampled region exactly, so that
sum(weight * r(x_i)^2) discretizes the squared L2 norm.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import uniform_points


class WrongDomainKind(Exception):
    pass


@dataclass(frozen=True)
class Domain:
    """Benchmark geometry: the unit cube, optionally extended by time."""

    d: int
    spacetime: bool = False

    @property
    def n_coords(self):
        return self.d + 1 if self.spacetime else self.d

    @property
    def interior_measure(self):
        return 1.0

    @property
    def boundary_measure(self):
        # |dOmega| = 2d for the cube; the lateral boundary I x dOmega has
        # the same measure since |I| = 1.
        return 2.0 * self.d


@dataclass
class SampleSet:
    points: np.ndarray
    weight: float
    tag: str


def sample_interior(domain, n, rng):
    """n uniform points in Omega (or I x Omega), weight = measure / n."""
    pts = uniform_points(rng, n, domain.n_coords)
    return SampleSet(pts, domain.interior_measure / n, "interior")


def sample_boundary(domain, n, rng):
    """Uniform points on dOmega (or the lateral boundary I x dOmega).

    A face is chosen uniformly among the 2d spatial faces, then the free
    coordinates are uniform; the fixed coordinate is exactly 0 or 1.
    """
    pts = uniform_points(rng, n, domain.n_coords)
    faces = rng.integers(0, 2 * domain.d, n)
    axis = faces // 2 + (1 if domain.spacetime else 0)
    pts[np.arange(n), axis] = (faces % 2).astype(np.float64)
    return SampleSet(pts, domain.boundary_measure / n, "boundary")


def sample_initial(domain, n, rng):
    """n points on the initial slice {0} x Omega, weight = |Omega| / n."""
    if not domain.spacetime:
        raise WrongDomainKind("initial slice requires a space-time domain")
    pts = uniform_points(rng, n, domain.n_coords)
    pts[:, 0] = 0.0
    return SampleSet(pts, domain.interior_measure / n, "initial")


def split_boundary_budget(n):
    """Split a parabolic-boundary budget 6:1 between lateral boundary and
    initial slice, proportional to their measures (6 vs 1 for d = 3)."""
    n_lateral = max(1, round(n * 6 / 7))
    return n_lateral, max(1, n - n_lateral)
