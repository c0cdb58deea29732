"""Reference computations that share no code with the package."""

import numpy as np


def project_capped_simplex(y, n, lo=1e-9, hi=1.0):
    """Euclidean projection onto {x : sum x = n, lo <= x <= hi}.

    x = clip(y - tau) and the sum is piecewise linear in tau, so tau is found exactly
    between the two breakpoints that bracket n.
    """
    y = np.asarray(y, dtype=float)
    taus = np.unique(np.concatenate([y - lo, y - hi]))
    sums = np.clip(y[None, :] - taus[:, None], lo, hi).sum(axis=1)  # nonincreasing in tau
    k = np.searchsorted(-sums, -n)  # first breakpoint with sum <= n
    if k == 0:
        return np.clip(y - taus[0], lo, hi)
    if k == taus.size:
        return np.clip(y - taus[-1], lo, hi)
    t0, t1, s0, s1 = taus[k - 1], taus[k], sums[k - 1], sums[k]
    tau = t1 if s0 == s1 else t0 + (s0 - n) * (t1 - t0) / (s0 - s1)
    return np.clip(y - tau, lo, hi)


def trace_criterion(pi, v, n):
    """(1/n) (sum pi) (sum v^2 / pi)."""
    return np.sum(pi) * np.sum(v**2 / pi) / n


def pgd_minimize(v, n, rng, restarts=20, iters=4000):
    """Best criterion value over projected-gradient runs from random interior starts."""
    v = np.asarray(v, dtype=float)
    N = v.shape[0]
    best = np.inf
    for _ in range(restarts):
        # convex mix with the uniform point keeps every start well inside the box
        x = 0.5 * np.full(N, n / N) + 0.5 * project_capped_simplex(rng.uniform(0, 1, N) * n, n)
        f = trace_criterion(x, v, n)
        step = 1e-2
        for _ in range(iters):
            g = -(v**2) / x**2
            while True:
                cand = project_capped_simplex(x - step * g, n)
                fc = trace_criterion(cand, v, n)
                if fc <= f - 1e-4 * np.dot(g, x - cand) or step < 1e-14:
                    break
                step *= 0.5
            if fc >= f:
                break
            done = f - fc < 1e-15
            x, f = cand, fc
            if done:
                break
            step *= 2.0
        best = min(best, f)
    return best


def direct_sigma_blocks(r_y, r_s, x, pi, selected, jb, jg, N):
    """Scalar (p = 1) Sigma_12 and Sigma_22 by explicit loops."""
    m12 = 0.0
    m22 = 0.0
    for i in range(len(x)):
        if not selected[i]:
            continue
        k = (1.0 / pi[i]) * (1.0 / pi[i] - 1.0)
        m12 += k * (r_y[i] * x[i]) * (r_s[i] * x[i])
        m22 += k * (r_s[i] * x[i]) ** 2
    m12 /= N * N
    m22 /= N * N
    return m12 / (jb * jg), m22 / (jg * jg)
