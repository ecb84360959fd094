"""Compiled forward/backward pass for memory training.

All arithmetic stays in the dtype of the input arrays, so float32 inputs
overflow where float32 would. Scalars must be passed already cast to that
dtype.
"""

import numba
import numpy as np

POLYNOMIAL, RECTIFIED, LEAKY, EXPONENTIAL = 0, 1, 2, 3


@numba.njit(cache=True, inline="always")
def _ipow(x, n, one):
    r = one
    b = x
    while n:
        if n & 1:
            r = r * b
        n >>= 1
        if n:
            b = b * b
    return r


@numba.njit(cache=True, inline="always")
def _f_df(x, code, n, nf, leak, one, zero):
    # selects rather than branches: the sign of x is unpredictable
    if code == EXPONENTIAL:
        e = np.exp(x)
        return e, e
    pm = _ipow(x, n - 1, one)
    f = pm * x
    df = nf * pm
    if code == POLYNOMIAL:
        return f, df
    neg = x < zero
    kink = x == zero
    if code == RECTIFIED:
        return (zero if neg else f), (zero if neg or kink else df)
    return (-leak * x if neg else f), (-leak if neg else (zero if kink else df))


@numba.njit(cache=True, inline="always")
def _bump(cur, v):
    # running max of |v|, with nan treated as unbounded
    a = abs(v)
    if a <= cur:
        return cur
    return a if a == a else np.inf


@numba.njit(cache=True)
def forward_backward(xi, Z, code, n, nf, leak, inner, outer, one, m, want_grad):
    """Loss, gradient and tanh arguments for all states and neurons.

    ``xi`` is ``(K, N)``, ``Z`` is ``(P, N)`` with entries +-1. For state
    ``a``, memory ``mu`` and neuron ``i`` the clamped similarity scores are
    ``d = inner * xi_mu . z_a`` (neuron at its own value) and
    ``w = d - 2 * inner * z_ai * xi_mu_i`` (neuron flipped), so the tanh
    argument is ``outer * z_ai * sum_mu (F(d) - F(w))``.

    Returns ``(loss, grad, h, max_arg, max_val, nonfinite)``.
    """
    P, N = Z.shape
    K = xi.shape[0]
    dt = xi.dtype
    zero = one - one
    two = one + one
    D = inner * np.dot(Z, xi.T)
    fD = np.empty((P, K), dt)
    dD = np.empty((P, K), dt)
    max_arg = zero
    max_val = zero
    for a in range(P):
        for mu in range(K):
            d = D[a, mu]
            f, df = _f_df(d, code, n, nf, leak, one, zero)
            fD[a, mu] = f
            dD[a, mu] = df
            max_arg = _bump(max_arg, d)
            max_val = _bump(max_val, f)

    h = np.zeros((P, N), dt)
    dW = np.empty((P, K, N), dt) if want_grad else np.empty((0, 0, 0), dt)
    step = two * inner
    for a in range(P):
        for mu in range(K):
            d = D[a, mu]
            fd = fD[a, mu]
            for i in range(N):
                w = d - step * Z[a, i] * xi[mu, i]
                f, df = _f_df(w, code, n, nf, leak, one, zero)
                h[a, i] += fd - f
                if want_grad:
                    dW[a, mu, i] = df
                max_arg = _bump(max_arg, w)
                max_val = _bump(max_val, f)

    loss = zero
    fm = zero
    for _ in range(m):
        fm += one
    nonfinite = 0
    g = np.empty((P, N), dt)
    for a in range(P):
        for i in range(N):
            arg = outer * Z[a, i] * h[a, i]
            h[a, i] = arg
            if not np.isfinite(arg):
                nonfinite += 1
            c = np.tanh(arg)
            err = Z[a, i] - c
            e2m1 = _ipow(err, 2 * m - 1, one)
            loss += e2m1 * err
            # dL/d(sum_mu F(d) - F(w)) for this (a, i)
            g[a, i] = -two * fm * e2m1 * (one - c * c) * outer * Z[a, i]

    grad = np.zeros((K, N), dt)
    if not want_grad:
        return loss, grad, h, max_arg, max_val, nonfinite

    # d sum_mu(F(d) - F(w_i)) / d xi_mu_k
    #   = inner * z_ak * (F'(d) - F'(w_i)) + 2 * inner * delta_ik * z_ai * F'(w_i)
    gz = g * Z
    sz = np.empty((P, K), dt)
    for a in range(P):
        gsum = zero
        for i in range(N):
            gsum += g[a, i]
        for mu in range(K):
            s = zero
            for i in range(N):
                s += g[a, i] * dW[a, mu, i]
                grad[mu, i] += gz[a, i] * dW[a, mu, i]
            sz[a, mu] = dD[a, mu] * gsum - s
    grad = inner * np.dot(sz.T, Z) + step * grad
    return loss, grad, h, max_arg, max_val, nonfinite
