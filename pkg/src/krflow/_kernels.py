"""Compiled inner loops for the Monge-Ampère time stepper.

The background at time t is always ``p(t)*A + q(t)*B`` for one of three
family codes, which lets a whole run between samples stay inside numba.
"""
import math

import numpy as np
from numba import njit

STATIC, LINEAR, EXPONENTIAL = 0, 1, 2


@njit(cache=True)
def blend(kind, t, t_prime):
    if kind == LINEAR:
        return (t_prime - t) / t_prime, t / t_prime
    if kind == EXPONENTIAL:
        e = math.exp(-t)
        return e, 1.0 - e
    return 1.0, 0.0


@njit(cache=True)
def density_min(phi, a, b, p, q, c, out):
    """out = p*a + q*b + c*lap5(phi); returns (min, flat index of min)."""
    n = phi.shape[0]
    lo = np.inf
    where = 0
    for i in range(n):
        im = i - 1 if i > 0 else n - 1
        ip = i + 1 if i < n - 1 else 0
        for j in range(n):
            jm = j - 1 if j > 0 else n - 1
            jp = j + 1 if j < n - 1 else 0
            d = p * a[i, j] + q * b[i, j] + c * (
                (phi[im, j] + phi[ip, j]) + (phi[i, jm] + phi[i, jp]) - 4.0 * phi[i, j]
            )
            out[i, j] = d
            if d < lo:
                lo = d
                where = i * n + j
    return lo, where


@njit(cache=True)
def rhs_into(phi, t, kind, t_prime, a, b, c, log_omega, nu, rescale, floor, out):
    """Right-hand side into ``out``; returns (min density, index).

    When the density drops to ``floor`` the log is skipped and ``out`` holds
    the density itself, so callers must check the returned minimum first.
    """
    p, q = blend(kind, t, t_prime)
    lo, where = density_min(phi, a, b, p, q, c, out)
    if lo <= floor:
        return lo, where
    n = phi.shape[0]
    shift = rescale * t
    for i in range(n):
        for j in range(n):
            out[i, j] = math.log(out[i, j]) - log_omega[i, j] - nu * phi[i, j] + shift
    return lo, where


@njit(cache=True)
def rk4_step(phi, t, dt, kind, t_prime, a, b, c, log_omega, nu, rescale, floor,
             k1, k2, k3, k4, tmp, new):
    """Classical RK4; returns the smallest density met at any stage.

    ``k1`` holds the right-hand side at the starting state afterwards.
    """
    n = phi.shape[0]
    lo, _ = rhs_into(phi, t, kind, t_prime, a, b, c, log_omega, nu, rescale, floor, k1)
    if lo <= floor:
        return lo
    for i in range(n):
        for j in range(n):
            tmp[i, j] = phi[i, j] + 0.5 * dt * k1[i, j]
    m, _ = rhs_into(tmp, t + 0.5 * dt, kind, t_prime, a, b, c, log_omega, nu, rescale, floor, k2)
    lo = min(lo, m)
    if lo <= floor:
        return lo
    for i in range(n):
        for j in range(n):
            tmp[i, j] = phi[i, j] + 0.5 * dt * k2[i, j]
    m, _ = rhs_into(tmp, t + 0.5 * dt, kind, t_prime, a, b, c, log_omega, nu, rescale, floor, k3)
    lo = min(lo, m)
    if lo <= floor:
        return lo
    for i in range(n):
        for j in range(n):
            tmp[i, j] = phi[i, j] + dt * k3[i, j]
    m, _ = rhs_into(tmp, t + dt, kind, t_prime, a, b, c, log_omega, nu, rescale, floor, k4)
    lo = min(lo, m)
    if lo <= floor:
        return lo
    sixth = dt / 6.0
    for i in range(n):
        for j in range(n):
            new[i, j] = phi[i, j] + sixth * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
    return lo


@njit(cache=True)
def advance(phi, t, t_target, dt_cap, wmin, kind, t_prime, a, b, c, log_omega, nu,
            rescale, floor, dt_floor, k1, k2, k3, k4, tmp, new):
    """Step ``phi`` in place from t to exactly t_target.

    The step is ``dt_cap * min(1, wmin)`` with ``wmin`` the smallest density
    seen in the previous step, halved on any stage positivity failure.
    Returns (status, t, dt_last, wmin, steps); status 1 means the step fell
    below ``dt_floor`` and ``phi`` holds the last valid state.
    """
    steps = 0
    dt_last = 0.0
    while t < t_target:
        dt = dt_cap * min(1.0, wmin)
        last = False
        remaining = t_target - t
        if remaining <= dt * (1.0 + 1e-9):
            dt = remaining
            last = True
        elif remaining < 2.0 * dt:
            # split the tail evenly rather than leave a sliver before the sample
            dt = 0.5 * remaining
        while True:
            if dt < dt_floor:
                return 1, t, dt_last, wmin, steps
            lo = rk4_step(phi, t, dt, kind, t_prime, a, b, c, log_omega, nu, rescale,
                          floor, k1, k2, k3, k4, tmp, new)
            if lo > floor:
                break
            dt *= 0.5
            last = False
        phi[:, :] = new
        wmin = lo
        t = t_target if last else t + dt
        dt_last = dt
        steps += 1
    return 0, t, dt_last, wmin, steps
