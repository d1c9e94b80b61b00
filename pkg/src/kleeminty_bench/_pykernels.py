"""Numpy implementation of the evaluation kernels.

Every reduction runs left to right (``cumsum`` rather than ``sum``) so the
results match the compiled kernel bit for bit.
"""
import numpy as np


def _seqsum(a):
    # sequential row sums; np.sum would use pairwise summation
    return np.cumsum(a, axis=1)[:, -1]


def rotate_batch(D, alpha, beta, q):
    """Apply the plane rotation to every row of ``D``.

    The rotation acts as ``x = d + v1*(alpha*a + beta*b) + v2*(alpha*b - beta*a)``
    with ``a = d[-1]`` and ``b = q * sum(d[:-1])``.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[1]
    if n == 1:
        return D + (alpha * D[:, :1] + beta * 0.0)
    a = D[:, -1]
    b = _seqsum(D[:, :-1]) * q
    X = np.empty_like(D)
    X[:, -1] = D[:, -1] + (alpha * a + beta * b)
    h = (alpha * b - beta * a) * q
    X[:, :-1] = D[:, :-1] + h[:, None]
    return X


def evaluate_batch(Y, t, eps, alpha, beta, q):
    """Objective values and summed constraint violations for the rows of ``Y``."""
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    X = rotate_batch(Y - t, alpha, beta, q)
    prev = np.zeros_like(X)
    prev[:, 1:] = eps * X[:, :-1]
    upper = np.empty_like(X)
    upper[:, 0] = X[:, 0] - 1.0
    upper[:, 1:] = (X[:, 1:] + prev[:, 1:]) - 1.0
    lower = np.empty_like(X)
    lower[:, 0] = -X[:, 0]
    lower[:, 1:] = prev[:, 1:] - X[:, 1:]
    rows = np.concatenate([upper, lower], axis=1)
    rows = np.where(rows > 0.0, rows, 0.0)
    return Y[:, -1].copy(), _seqsum(rows)


def improvement_indices(f, nu, best_f, best_nu):
    """Positions in the batch that strictly improve the running lexicographic best."""
    f = np.asarray(f, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    out = []
    start = 0
    n = len(f)
    while start < n:
        fs, ns = f[start:], nu[start:]
        better = (ns < best_nu) | ((ns == best_nu) & (fs < best_f))
        hit = np.flatnonzero(better)
        if hit.size == 0:
            break
        j = start + int(hit[0])
        out.append(j)
        best_f, best_nu = f[j], nu[j]
        start = j + 1
    return np.asarray(out, dtype=np.intp)
