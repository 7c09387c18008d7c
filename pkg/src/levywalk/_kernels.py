"""Compiled batch engine: many independent chains per call.

The kernel mirrors the reference chain in ``walk.py`` operation for
operation (same expression trees, same libm calls), so a chain simulated
here is bit-identical to one simulated by the pure-Python engine.  Each
chain's randomness is one Philox4x64-10 block per step keyed by
``(seed, chain_index, step_index)``; thread count therefore cannot affect
any output.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from . import levy

_U1 = np.uint64(1)
_U11 = np.uint64(11)
_U32 = np.uint64(32)
_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)

# out_flag values
FLAG_OK = 0
FLAG_STEP_CAP = 1
FLAG_Y_BOUND = 2


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _U32
    b_lo = b & _MASK32
    b_hi = b >> _U32
    hi_lo = a_hi * b_lo
    cross = ((a_lo * b_lo) >> _U32) + (hi_lo & _MASK32) + a_lo * b_hi
    hi = a_hi * b_hi + (hi_lo >> _U32) + (cross >> _U32)
    return hi, a * b


@njit(cache=True, inline="always")
def _philox_block(c0, c1, key0):
    x0, x1, x2, x3 = c0, c1, np.uint64(0), np.uint64(0)
    k0 = key0
    k1 = np.uint64(0)
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, x0)
        hi1, lo1 = _mulhilo(_M1, x2)
        x0, x1, x2, x3 = hi1 ^ x1 ^ k0, lo1, hi0 ^ x3 ^ k1, lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return x0, x1, x2, x3


@njit(cache=True, inline="always")
def _to_unit(w):
    return (np.float64(w >> _U11) + 0.5) * 2.0**-53


_quantile = njit(cache=True, inline="always")(levy.quantile_scalar)


@njit(cache=True, parallel=True)
def simulate_chains(
    seed,
    chain_start,
    n,
    kind,
    kpack,
    d,
    x0,
    t0,
    T,
    h,
    lam,
    p_jump,
    drift,
    fvec,
    fbeta,
    jtable,
    dom_is_ball,
    dom_center,
    dom_radius2,
    monitor_on,
    monitor_slope,
    y_bound_tol,
    max_steps,
    out_time,
    out_x,
    out_y,
    out_z,
    out_steps,
    out_flag,
    out_min,
):
    for ii in prange(n):
        ci = np.uint64(chain_start + ii)
        x = np.empty(d)
        xn = np.empty(d)
        sxi = np.empty(d)
        m = np.empty(d)
        for j in range(d):
            x[j] = x0[j]
            m[j] = x0[j]
        t = t0
        y = 1.0
        z = 0.0
        k = 0
        flag = FLAG_OK
        while True:
            w0, w1, w2, w3 = _philox_block(ci, np.uint64(k), seed)
            jump = _to_unit(w0) < p_jump
            if jump:
                theta = -np.log1p(-_to_unit(w2) * p_jump) / lam
            else:
                theta = h
            sqt = np.sqrt(theta)
            eta = 1.0 if (w1 >> np.uint64(d)) & _U1 else -1.0

            if kind == 1:
                # built-in polynomial family: diagonal diffusion, d = 3
                s11 = np.sqrt(1.21 - x[1] * x[1] - x[2] * x[2])
                sxi[0] = s11 * (1.0 if w1 & _U1 else -1.0)
                sxi[1] = 1.0 if (w1 >> _U1) & _U1 else -1.0
                sxi[2] = 1.0 if (w1 >> np.uint64(2)) & _U1 else -1.0
                x1, x2, x3 = x[0], x[1], x[2]
                x1sq, x2sq = x1 * x1, x2 * x2
                E = np.exp(t - kpack[0])
                w = 1.0 - 0.5 * E
                gval = 0.5 * E * (1.21 - x1sq * x1sq - x2sq * x2sq)
                gval += 6.0 * w * (x1sq * (1.21 - x2sq - x3 * x3) + x2sq)
                gval += w * (
                    kpack[1] * (x1sq * x1 + x2sq * x2)
                    + kpack[2] * (x1sq + x2sq)
                    + kpack[3] * (x1 + x2)
                    + kpack[4]
                )
                cval = 0.0
            else:
                # constant coefficients: kpack = [sigma (d*d) | c | g]
                for j in range(d):
                    acc = 0.0
                    for l in range(d):
                        xil = 1.0 if (w1 >> np.uint64(l)) & _U1 else -1.0
                        acc += kpack[j * d + l] * xil
                    sxi[j] = acc
                cval = kpack[d * d]
                gval = kpack[d * d + 1]

            if jump:
                J = _quantile(jtable, _to_unit(w3))
            else:
                J = 0.0
            for j in range(d):
                v = x[j] + theta * drift[j] + sqt * (sxi[j] + fbeta[j] * eta)
                if jump:
                    v += fvec[j] * J
                xn[j] = v
            z = z + theta * gval * y
            y = y + theta * cval * y
            t_new = t + theta
            k += 1

            if y > y_bound_tol:
                flag = FLAG_Y_BOUND

            if t_new >= T:
                t_rep = T
                exited = True
            else:
                t_rep = t_new
                if dom_is_ball:
                    acc = 0.0
                    for j in range(d):
                        dv = xn[j] - dom_center[j]
                        acc += dv * dv
                    exited = acc >= dom_radius2
                else:
                    exited = False

            if monitor_on:
                dt = t_rep - t0
                for j in range(d):
                    mv = monitor_slope[j] * dt + xn[j]
                    if mv < m[j]:
                        m[j] = mv

            if not exited and k >= max_steps:
                flag = FLAG_STEP_CAP
                exited = True
                t_rep = t_new if t_new < T else T

            if exited:
                out_time[ii] = t_rep
                for j in range(d):
                    out_x[ii, j] = xn[j]
                    out_min[ii, j] = m[j]
                out_y[ii] = y
                out_z[ii] = z
                out_steps[ii] = k
                out_flag[ii] = flag
                break

            for j in range(d):
                x[j] = xn[j]
            t = t_new


@njit(cache=True)
def accumulate_expansion(values, partials, count):
    """Grow a Shewchuk non-overlapping expansion by exact two-sums.

    ``partials[:count]`` holds the current expansion; returns the new count
    or -1 on buffer overflow (callers treat that as an internal error).
    """
    n = count
    for idx in range(values.size):
        xv = values[idx]
        i = 0
        for j in range(n):
            yv = partials[j]
            if abs(xv) < abs(yv):
                xv, yv = yv, xv
            hi = xv + yv
            lo = yv - (hi - xv)
            if lo != 0.0:
                partials[i] = lo
                i += 1
            xv = hi
        if i >= partials.size:
            return -1
        partials[i] = xv
        n = i + 1
    return n
