"""Shared oracles for the test suite."""

import math

import numpy as np

from specdyn.relu_net import design_matrix, gd_step, init_network
from specdyn.sphere_data import build_dataset, make_polynomial_target, sample_uniform_sphere


def fd_gradient_worst_error(n, m, d, states, h=1e-6):
    """Worst per-coordinate relative error between the GD step direction and
    a central finite-difference gradient of the empirical risk.

    Only valid away from activation thresholds; asserts every |<w_j, x_i>|
    clears 1e-6 so the risk is locally smooth.
    """
    worst = 0.0
    for seed in range(states):
        feats = sample_uniform_sphere(n, d, 50 + seed)
        ds = build_dataset(make_polynomial_target(1, d, seed), feats)
        net = init_network(m, d, 0.5, False, 60 + seed)
        pre = np.abs(design_matrix(feats, False) @ net.W.T)
        assert pre.min() > 1e-6, "activation too close to its threshold"
        grad_fd = np.zeros_like(net.W)
        X = feats.points
        for j in range(m):
            for k in range(d):
                for sign in (1.0, -1.0):
                    W = net.W.copy()
                    W[j, k] += sign * h
                    r = ds.responses - np.maximum(X @ W.T, 0.0) @ net.a / math.sqrt(m)
                    grad_fd[j, k] += sign * float(r @ r) / (2 * n)
        grad_fd /= 2 * h
        step = gd_step(net, ds, eta=1.0)
        grad_step = -(step.W - net.W)
        rel = np.abs(grad_step - grad_fd) / np.maximum(np.abs(grad_fd), 1e-12)
        worst = max(worst, float(rel.max()))
    return worst
