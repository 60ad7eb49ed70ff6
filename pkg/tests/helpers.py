"""Instance builders shared by the solver tests."""

import numpy as np

from privpref.datagen import GenSpec, generate_dataset, generate_theta_star, randomize_labels
from privpref.privacy import RngStream


def clipped_instance(seed, n, d=5, B=1.0, L=1.0, model="btl", K=2, eps=None):
    spec = GenSpec(d, n, B, L, "gaussian-clipped", model, K)
    theta = generate_theta_star(d, B, RngStream(seed, 0))
    data = generate_dataset(spec, theta, RngStream(seed, 1))
    if eps is not None:
        data = randomize_labels(data, eps, RngStream(seed, 2))
    return theta, data


def random_feasible(g, d, B):
    q = g.standard_normal(d)
    q -= q.mean()
    return q * (B * g.uniform() ** (1 / d) / np.linalg.norm(q))
