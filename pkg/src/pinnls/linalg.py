"""Dense SPD solves and seeded random streams shared by all modules."""

import numpy as np


class NotPositiveDefinite(Exception):
    """Raised when the symmetric factorization hits a non-positive pivot."""


_SYMMETRY_RTOL = 1e-10


def solve_spd(A, b):
    """Solve A x = b for symmetric positive-definite A via Cholesky.

    Raises NotPositiveDefinite if the factorization fails, which in the
    optimizer signals a damping parameter that is too small or a
    degenerate Jacobian.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected square matrix, got shape {A.shape}")
    scale = np.abs(A).max()
    if scale > 0 and np.abs(A - A.T).max() > _SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    try:
        c = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as err:
        raise NotPositiveDefinite(str(err)) from err
    y = np.linalg.solve(c, b)
    return np.linalg.solve(c.T, y)


def seeded_rng(seed, *stream):
    """Deterministic PCG64 generator for (seed, stream-id...) pairs.

    The generator family is fixed so that checkpointed experiments
    replay bit-exactly across platforms and runs.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


def uniform_points(rng, n, d):
    """n i.i.d. uniform points in [0,1)^d as an (n, d) array."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    return rng.random((n, d))
