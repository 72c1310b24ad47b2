"""Deterministic sample generators shared by the estimators."""

import numpy as np
from scipy.stats import qmc


def unit_ball_points(dim, count, seed):
    """Axis extremes ``+-e_i`` followed by `count` scrambled Halton points in
    the closed unit ball (points falling outside are pulled onto the sphere)."""
    axes = np.vstack([np.eye(dim), -np.eye(dim)])
    if count <= 0:
        return axes
    u = 2.0 * qmc.Halton(d=dim, scramble=True, seed=seed).random(count) - 1.0
    norms = np.linalg.norm(u, axis=1)
    outside = norms > 1.0
    u[outside] /= norms[outside, None]
    return np.vstack([axes, u])


def shell_scales(radius, decades, per_decade=2):
    """Geometric radii ``radius * 10**(-k/per_decade)``, k = 0 .. decades*per_decade."""
    k = np.arange(decades * per_decade + 1)
    return radius * 10.0 ** (-k / per_decade)


def sample_pairs(dim, count, low=-5.0, high=5.0, seed=0):
    """`count` pairs of uniform points in the cube [low, high]^dim."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(low, high, size=(count, 2, dim))
    return [(p[0], p[1]) for p in pts]
