"""Independent reference implementations used as test oracles."""

import numpy as np
from scipy.special import expit


def normal_equations(X, y, ridge=0.0):
    A = np.column_stack([np.ones(len(X)), X])
    P = ridge * np.eye(A.shape[1])
    P[0, 0] = 0.0
    return np.linalg.solve(A.T @ A + P, A.T @ y)


def gd_logistic(X, y, ridge, iters=200_000):
    """Plain full-batch gradient descent on NLL + ridge/2 * |beta[1:]|^2."""
    A = np.column_stack([np.ones(len(X)), X])
    pen = np.full(A.shape[1], float(ridge))
    pen[0] = 0.0
    # sigmoid weights are at most 1/4, which bounds the curvature
    lr = 1.0 / (0.25 * np.linalg.eigvalsh(A.T @ A).max() + ridge)
    b = np.zeros(A.shape[1])
    for _ in range(iters):
        g = A.T @ (expit(A @ b) - y) + pen * b
        b -= lr * g
        if np.abs(g).max() < 1e-11:
            break
    return b


def logistic_instance(seed, n=40, p=2):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = (rng.random(n) < expit(0.3 + X @ rng.normal(size=p))).astype(float)
    return X, y


def random_distance_matrix(rng, n, integer=False):
    A = rng.integers(1, 5, size=(n, n)).astype(float) if integer else rng.random((n, n))
    D = np.triu(A, 1)
    return D + D.T
