"""Small dense linear algebra for the hot kernels.

Under numba, BLAS/LAPACK calls on 3x3..7x7 operands are dominated by call
overhead, so explicit loops are compiled instead. The numpy fallback keeps
the vectorized operators.
"""
import numpy as np

from aerobat_guard._accel import USE_NUMBA, kernel

@kernel
def matvec(A, x):
    out = np.zeros(A.shape[0])
    for i in range(A.shape[0]):
        acc = 0.0
        for j in range(A.shape[1]):
            acc += A[i, j] * x[j]
        out[i] = acc
    return out


@kernel
def tmatvec(A, x):
    """``A.T @ x`` without forming the transpose."""
    out = np.zeros(A.shape[1])
    for j in range(A.shape[1]):
        acc = 0.0
        for i in range(A.shape[0]):
            acc += A[i, j] * x[i]
        out[j] = acc
    return out


@kernel
def matmul(A, B):
    out = np.zeros((A.shape[0], B.shape[1]))
    for i in range(A.shape[0]):
        for k in range(A.shape[1]):
            aik = A[i, k]
            for j in range(B.shape[1]):
                out[i, j] += aik * B[k, j]
    return out


@kernel
def inv3(A):
    c00 = A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1]
    c01 = A[1, 2] * A[2, 0] - A[1, 0] * A[2, 2]
    c02 = A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0]
    det = A[0, 0] * c00 + A[0, 1] * c01 + A[0, 2] * c02
    out = np.empty((3, 3))
    out[0, 0] = c00 / det
    out[1, 0] = c01 / det
    out[2, 0] = c02 / det
    out[0, 1] = (A[0, 2] * A[2, 1] - A[0, 1] * A[2, 2]) / det
    out[1, 1] = (A[0, 0] * A[2, 2] - A[0, 2] * A[2, 0]) / det
    out[2, 1] = (A[0, 1] * A[2, 0] - A[0, 0] * A[2, 1]) / det
    out[0, 2] = (A[0, 1] * A[1, 2] - A[0, 2] * A[1, 1]) / det
    out[1, 2] = (A[0, 2] * A[1, 0] - A[0, 0] * A[1, 2]) / det
    out[2, 2] = (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]) / det
    return out


@kernel
def newton_polar(R, iterations):
    """Polar factor by Newton iteration ``R <- (R + R^-T) / 2``; for near-rotations."""
    X = R.copy()
    for _ in range(iterations):
        Xi = inv3(X)
        X = 0.5 * (X + Xi.T)
    return X


@kernel
def cho_solve_spd(A, b):
    """Solve ``A x = b`` for small symmetric positive definite ``A``."""
    n = A.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        acc = A[j, j]
        for k in range(j):
            acc -= L[j, k] * L[j, k]
        if acc <= 0.0:
            return np.full(n, np.nan)
        L[j, j] = np.sqrt(acc)
        for i in range(j + 1, n):
            acc = A[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / L[j, j]
    y = np.zeros(n)
    for i in range(n):
        acc = b[i]
        for k in range(i):
            acc -= L[i, k] * y[k]
        y[i] = acc / L[i, i]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for k in range(i + 1, n):
            acc -= L[k, i] * x[k]
        x[i] = acc / L[i, i]
    return x


@kernel
def add_gram(D, J, w):
    """``D += w * J.T @ J`` in place."""
    for i in range(J.shape[1]):
        for j in range(i, J.shape[1]):
            acc = 0.0
            for r in range(J.shape[0]):
                acc += J[r, i] * J[r, j]
            D[i, j] += w * acc
            if j != i:
                D[j, i] += w * acc


if not USE_NUMBA:
    def add_gram(D, J, w):  # noqa: F811
        D += w * (J.T @ J)

    def matvec(A, x):  # noqa: F811
        return A @ x

    def tmatvec(A, x):  # noqa: F811
        return A.T @ x

    def matmul(A, B):  # noqa: F811
        return A @ B

    def inv3(A):  # noqa: F811
        return np.linalg.inv(A)

    def cho_solve_spd(A, b):  # noqa: F811
        return np.linalg.solve(A, b)
