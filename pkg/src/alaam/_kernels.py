"""Compiled inner loops for the basic ALAAM sampler.

Random numbers are drawn by the caller (numpy ``Generator``) and passed in,
so these functions are pure given their inputs.  ``y`` is a 0/1 int8 vector
with structural-NA nodes stored as 0; they are never in ``free``.
"""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def change_stats_into(i, y, static, lin_ptr, lin_idx, lin_w, q_ptr, q_u, q_v, q_w, out):
    p = out.shape[0]
    for k in range(p):
        out[k] = static[i, k]
    for e in range(lin_ptr[i], lin_ptr[i + 1]):
        if y[lin_idx[e]] == 1:
            for k in range(p):
                out[k] += lin_w[e, k]
    for e in range(q_ptr[i], q_ptr[i + 1]):
        if y[q_u[e]] == 1 and y[q_v[e]] == 1:
            for k in range(p):
                out[k] += q_w[e, k]


@njit(cache=True, inline="always")
def _propose(i, y, theta, delta, static, lin_ptr, lin_idx, lin_w, q_ptr, q_u, q_v, q_w):
    """Change statistics into ``delta``; returns (sign, log acceptance ratio)."""
    change_stats_into(i, y, static, lin_ptr, lin_idx, lin_w, q_ptr, q_u, q_v, q_w, delta)
    lr = 0.0
    for k in range(delta.shape[0]):
        lr += theta[k] * delta[k]
    if y[i] == 1:
        return -1.0, -lr
    return 1.0, lr


@njit(cache=True)
def metropolis_run(y, free, theta, z_rel, node_draws, uniforms,
                   static, lin_ptr, lin_idx, lin_w, q_ptr, q_u, q_v, q_w):
    """Run ``len(node_draws)`` basic-sampler proposals in place; returns accepts."""
    p = theta.shape[0]
    delta = np.empty(p)
    accepted = 0
    for s in range(node_draws.shape[0]):
        i = free[node_draws[s]]
        sign, lr = _propose(i, y, theta, delta, static, lin_ptr, lin_idx, lin_w, q_ptr, q_u, q_v, q_w)
        if lr >= 0.0 or uniforms[s] < np.exp(lr):
            y[i] = 1 - y[i]
            for k in range(p):
                z_rel[k] += sign * delta[k]
            accepted += 1
    return accepted


@njit(cache=True)
def state_visits(y, free, theta, node_draws, uniforms, thin, counts,
                 static, lin_ptr, lin_idx, lin_w, q_ptr, q_u, q_v, q_w):
    """Like ``metropolis_run`` but tallies the state code after every ``thin`` steps.

    The state code is sum_j y[free[j]] << j; only for small free sets.
    """
    p = theta.shape[0]
    delta = np.empty(p)
    code = 0
    for j in range(free.shape[0]):
        if y[free[j]] == 1:
            code |= 1 << j
    for s in range(node_draws.shape[0]):
        j = node_draws[s]
        i = free[j]
        sign, lr = _propose(i, y, theta, delta, static, lin_ptr, lin_idx, lin_w, q_ptr, q_u, q_v, q_w)
        if lr >= 0.0 or uniforms[s] < np.exp(lr):
            y[i] = 1 - y[i]
            code ^= 1 << j
        if (s + 1) % thin == 0:
            counts[code] += 1


@njit(cache=True, inline="always")
def _ee_update(theta, dz, r, c):
    for k in range(theta.shape[0]):
        if dz[k] > 0.0:
            theta[k] = theta[k] - r * max(abs(theta[k]), c)
        elif dz[k] < 0.0:
            theta[k] = theta[k] + r * max(abs(theta[k]), c)


@njit(cache=True)
def contrastive_steps(y, free, theta, r, c, node_draws, uniforms,
                      static, lin_ptr, lin_idx, lin_w, q_ptr, q_u, q_v, q_w):
    """Parameter updates from proposals that are never applied to ``y``.

    ``node_draws``/``uniforms`` have one row per update step; each step's
    d_z sums the signed change statistics of the accepted proposals.
    """
    p = theta.shape[0]
    delta = np.empty(p)
    dz = np.empty(p)
    for t in range(node_draws.shape[0]):
        dz[:] = 0.0
        for s in range(node_draws.shape[1]):
            i = free[node_draws[t, s]]
            sign, lr = _propose(i, y, theta, delta, static, lin_ptr, lin_idx, lin_w, q_ptr, q_u, q_v, q_w)
            if lr >= 0.0 or uniforms[t, s] < np.exp(lr):
                for k in range(p):
                    dz[k] += sign * delta[k]
        _ee_update(theta, dz, r, c)


@njit(cache=True)
def ee_iterations(y, free, theta, dz, r, c, max_abs, node_draws, uniforms,
                  theta_trace, dz_trace, accept_trace, row0,
                  static, lin_ptr, lin_idx, lin_w, q_ptr, q_u, q_v, q_w):
    """Equilibrium-expectation iterations.

    Row ``row0 + t`` of the traces records the parameters used in iteration
    t, d_z after its proposals, and its acceptance rate.  Returns the number
    of iterations completed and 1 if the parameters diverged, else 0.
    """
    p = theta.shape[0]
    ms = node_draws.shape[1]
    delta = np.empty(p)
    for t in range(node_draws.shape[0]):
        for k in range(p):
            theta_trace[row0 + t, k] = theta[k]
        accepted = 0
        for s in range(ms):
            i = free[node_draws[t, s]]
            sign, lr = _propose(i, y, theta, delta, static, lin_ptr, lin_idx, lin_w, q_ptr, q_u, q_v, q_w)
            if lr >= 0.0 or uniforms[t, s] < np.exp(lr):
                y[i] = 1 - y[i]
                for k in range(p):
                    dz[k] += sign * delta[k]
                accepted += 1
        for k in range(p):
            dz_trace[row0 + t, k] = dz[k]
        accept_trace[row0 + t] = accepted / ms
        _ee_update(theta, dz, r, c)
        for k in range(p):
            if not np.isfinite(theta[k]) or abs(theta[k]) > max_abs:
                return t + 1, 1
    return node_draws.shape[0], 0
