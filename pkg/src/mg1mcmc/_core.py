"""Compiled inner loops shared by the public kernels and the chain runner.

Everything here works on raw arrays so numba can compile it. Random deviates
are always passed in, never drawn here, which keeps the public per-kernel API
and the block runner on exactly the same arithmetic.

State layout used throughout:

    v    : (n,) arrival times, mutated in place
    vbuf : (n,) scratch for MHG proposals
    eta  : (3,) natural parameters (theta1, theta2 - theta1, log theta3)
    st   : (5,) cache [v_n, theta1_cap, theta2_floor, ordered, log_post]
    prior: (8,) [t1_lo, t1_hi, rg_lo, rg_hi, r3_lo, r3_hi, log r3_lo, log r3_hi]
    counts: (4, 2) int64 [proposals, accepts] for metropolis/shift/range/rate
"""

import math

import numpy as np
from numba import njit

NEG_INF = -np.inf

MET, SHIFT, RANGE, RATE = 0, 1, 2, 3
KERNEL_NAMES = ("metropolis", "shift", "range", "rate")


@njit(cache=True)
def constraint_summary(v, y, x):
    n = v.shape[0]
    ordered = v[0] >= 0.0
    t = y[0] - v[0]
    cap = t
    floor = t
    for i in range(1, n):
        if v[i] < v[i - 1]:
            ordered = False
        excess = v[i] - x[i - 1]
        if excess < 0.0:
            excess = 0.0
        t = y[i] - excess
        if t < cap:
            cap = t
        if t > floor:
            floor = t
    return v[n - 1], cap, floor, ordered


@njit(cache=True)
def log_post_theta(th1, th2, th3, n, vn, cap, floor, ordered, prior):
    if not ordered:
        return NEG_INF
    width = th2 - th1
    if not width > 0.0:
        return NEG_INF
    if th1 < prior[0] or th1 > prior[1] or width < prior[2] or width > prior[3]:
        return NEG_INF
    if not th3 > 0.0 or th3 < prior[4] or th3 >= prior[5]:
        return NEG_INF
    if th1 > cap or th2 < floor:
        return NEG_INF
    return n * math.log(th3) - th3 * vn - n * math.log(width)


@njit(cache=True)
def log_prior_eta(e1, e2, e3, prior):
    if e1 < prior[0] or e1 > prior[1] or e2 < prior[2] or e2 > prior[3]:
        return NEG_INF
    if e3 < prior[6] or e3 >= prior[7]:
        return NEG_INF
    return e3


@njit(cache=True)
def log_post_eta(e1, e2, e3, n, vn, cap, floor, ordered, prior):
    if not ordered:
        return NEG_INF
    lp = log_prior_eta(e1, e2, e3, prior)
    if lp == NEG_INF or not e2 > 0.0:
        return NEG_INF
    if e1 > cap or e1 + e2 < floor:
        return NEG_INF
    return lp + n * e3 - math.exp(e3) * vn - n * math.log(e2)


@njit(cache=True)
def refresh(v, y, x, eta, st, prior):
    vn, cap, floor, ordered = constraint_summary(v, y, x)
    st[0] = vn
    st[1] = cap
    st[2] = floor
    st[3] = 1.0 if ordered else 0.0
    st[4] = log_post_eta(eta[0], eta[1], eta[2], v.shape[0], vn, cap, floor, ordered, prior)


@njit(cache=True)
def trunc_exp(rate, lo, hi, u):
    if not hi > lo:
        return lo
    val = lo - math.log1p(u * math.expm1(-rate * (hi - lo))) / rate
    if val < lo:
        return lo
    if val > hi:
        return hi
    return val


@njit(cache=True)
def gibbs_bounds(v, y, x, th1, th2, i):
    n = v.shape[0]
    prev = v[i - 1] if i > 0 else 0.0
    if y[i] > th2:
        lo = x[i] - th2
        if lo < prev:
            lo = prev
    else:
        lo = prev
    hi = x[i] - th1
    if i < n - 1 and v[i + 1] < hi:
        hi = v[i + 1]
    return lo, hi


@njit(cache=True)
def gibbs_one(v, y, x, th1, th2, th3, i, u):
    """Redraw v[i] from its full conditional; False if the interval is empty."""
    lo, hi = gibbs_bounds(v, y, x, th1, th2, i)
    if hi < lo:
        # an interval collapsed onto a point can invert by rounding
        if lo - hi > 1e-9 * (1.0 + abs(lo)):
            return False
        hi = lo
    if i < v.shape[0] - 1:
        val = lo + u * (hi - lo)
        if val > hi:
            val = hi
    else:
        val = trunc_exp(th3, lo, hi, u)
    v[i] = _settle(val, y, x, th1, th2, i, lo, hi)
    return True


@njit(cache=True)
def _term(val, y, x, i):
    if i == 0:
        return y[0] - val
    excess = val - x[i - 1]
    if excess < 0.0:
        excess = 0.0
    return y[i] - excess


@njit(cache=True)
def _settle(val, y, x, th1, th2, i, lo, hi):
    # bounds are computed as x_i - theta, the support check as y_i - (v_i - x_{i-1});
    # near an endpoint the two can disagree by an ulp, so step inside
    for _ in range(16):
        t = _term(val, y, x, i)
        if t < th1 and val > lo:
            val = max(np.nextafter(val, -np.inf), lo)
        elif t > th2 and val < hi:
            val = min(np.nextafter(val, np.inf), hi)
        else:
            break
    return val


@njit(cache=True)
def gibbs_sweep(v, y, x, eta, u):
    """Ascending sweep; returns the failing index or -1."""
    th1 = eta[0]
    th2 = eta[0] + eta[1]
    th3 = math.exp(eta[2])
    for i in range(v.shape[0]):
        if not gibbs_one(v, y, x, th1, th2, th3, i, u[i]):
            return i
    return -1


@njit(cache=True)
def metropolis(eta, st, n, prior, sd, z, u, counts):
    for k in range(z.shape[0]):
        p1 = eta[0] + sd[0] * z[k, 0]
        p2 = eta[1] + sd[1] * z[k, 1]
        p3 = eta[2] + sd[2] * z[k, 2]
        counts[MET, 0] += 1
        if p1 < prior[0] or p1 > prior[1] or p2 < prior[2] or p2 > prior[3]:
            continue
        lps = log_post_eta(p1, p2, p3, n, st[0], st[1], st[2], st[3] > 0.5, prior)
        if math.log(u[k]) < lps - st[4]:
            eta[0] = p1
            eta[1] = p2
            eta[2] = p3
            st[4] = lps
            counts[MET, 1] += 1


@njit(cache=True)
def shift_map(v, s, out):
    for i in range(v.shape[0]):
        out[i] = v[i] - s


@njit(cache=True)
def range_map(v, x, th1, cz, out):
    for i in range(v.shape[0]):
        top = x[i] - th1
        out[i] = top - cz * (top - v[i])


@njit(cache=True)
def rate_map(v, cz, out):
    for i in range(v.shape[0]):
        out[i] = cz * v[i]


@njit(cache=True)
def _accept_joint(v, vbuf, y, x, e1, e2, e3, eta, st, prior, log_jac, logu):
    vn, cap, floor, ordered = constraint_summary(vbuf, y, x)
    lps = log_post_eta(e1, e2, e3, v.shape[0], vn, cap, floor, ordered, prior)
    if logu < lps - st[4] + log_jac:
        v[:] = vbuf
        eta[0] = e1
        eta[1] = e2
        eta[2] = e3
        st[0] = vn
        st[1] = cap
        st[2] = floor
        st[3] = 1.0 if ordered else 0.0
        st[4] = lps
        return True
    return False


@njit(cache=True)
def shift_update(v, vbuf, y, x, eta, st, prior, s, logu, counts):
    counts[SHIFT, 0] += 1
    e1 = eta[0] + s
    if e1 < 0.0 or v[0] - s < 0.0:
        return
    shift_map(v, s, vbuf)
    if _accept_joint(v, vbuf, y, x, e1, eta[1], eta[2], eta, st, prior, 0.0, logu):
        counts[SHIFT, 1] += 1


@njit(cache=True)
def range_update(v, vbuf, y, x, eta, st, prior, c, uz, logu, counts):
    counts[RANGE, 0] += 1
    z = 1.0 if uz < 0.5 else -1.0
    cz = c if z > 0 else 1.0 / c
    e2 = cz * eta[1]
    if e2 < prior[2] or e2 > prior[3]:
        return
    range_map(v, x, eta[0], cz, vbuf)
    log_jac = z * (v.shape[0] + 1) * math.log(c)
    if _accept_joint(v, vbuf, y, x, eta[0], e2, eta[2], eta, st, prior, log_jac, logu):
        counts[RANGE, 1] += 1


@njit(cache=True)
def rate_update(v, vbuf, y, x, eta, st, prior, c, uz, logu, counts):
    counts[RATE, 0] += 1
    z = 1.0 if uz < 0.5 else -1.0
    cz = c if z > 0 else 1.0 / c
    logc = math.log(c)
    e3 = eta[2] - z * logc
    if e3 < prior[6] or e3 >= prior[7]:
        return
    rate_map(v, cz, vbuf)
    log_jac = z * v.shape[0] * logc
    if _accept_joint(v, vbuf, y, x, eta[0], eta[1], e3, eta, st, prior, log_jac, logu):
        counts[RATE, 1] += 1


@njit(cache=True)
def iterate(v, vbuf, y, x, eta, st, prior, sd, flags, sig_shift, c_range, c_rate,
            gu, mz, mu, sdev, rdev, qdev, counts):
    """One scheme iteration. Returns the failing Gibbs index, -2 on a lost
    support after the sweep, or -1 on success."""
    bad = gibbs_sweep(v, y, x, eta, gu)
    if bad >= 0:
        return bad
    refresh(v, y, x, eta, st, prior)
    if st[4] == NEG_INF:
        return -2
    metropolis(eta, st, v.shape[0], prior, sd, mz, mu, counts)
    if flags[0]:
        shift_update(v, vbuf, y, x, eta, st, prior, sig_shift * sdev[0], math.log(sdev[1]), counts)
    if flags[1]:
        range_update(v, vbuf, y, x, eta, st, prior, c_range, rdev[0], math.log(rdev[1]), counts)
    if flags[2]:
        rate_update(v, vbuf, y, x, eta, st, prior, c_rate, qdev[0], math.log(qdev[1]), counts)
    return -1


@njit(cache=True)
def run_block(v, vbuf, y, x, eta, st, prior, sd, flags, sig_shift, c_range, c_rate,
              gu, mz, mu, sdev, rdev, qdev, counts, trace, start, thin):
    """Run gu.shape[0] iterations, storing eta into trace every `thin` steps.

    `start` is the global index of the first iteration in this block; row r
    of trace receives the state after global iteration r * thin + thin - 1.
    Returns (number of rows written, error code)."""
    rows = 0
    for b in range(gu.shape[0]):
        code = iterate(v, vbuf, y, x, eta, st, prior, sd, flags, sig_shift, c_range, c_rate,
                       gu[b], mz[b], mu[b], sdev[b], rdev[b], qdev[b], counts)
        if code != -1:
            return rows, code
        if (start + b + 1) % thin == 0:
            trace[rows, 0] = eta[0]
            trace[rows, 1] = eta[1]
            trace[rows, 2] = eta[2]
            rows += 1
    return rows, -1
