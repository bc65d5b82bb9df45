"""Pure numpy/scipy fallback for the propagation kernels.

Mirrors numba_backend step for step; summation order inside dot products
differs, so cross-backend agreement is at the 1e-12 level rather than
bitwise.  Select with ZENO_NH_BACKEND=numpy.
"""

import numpy as np
import scipy.sparse as sp

from ..rng import uniform as _xoshiro_uniform

UNDERFLOW = 1e-300
BISECT_RTOL = 1e-6
SPREAD_CAP = 0.35
OCCUPIED_EPS = 1e-12


def _uniform_open(state):
    u = _xoshiro_uniform(state)
    while u == 0.0:
        u = _xoshiro_uniform(state)
    return u


class _CsrDrift:
    def __init__(self, indptr, indices, data, dc):
        dim = dc.size
        self.h = sp.csr_matrix((data, indices, indptr), shape=(dim, dim))
        self.dc = dc

    def __call__(self, x, s=0.0):
        return -1j * (self.h @ x) + (self.dc - s) * x

    def mean_decay(self, x):
        p = np.abs(x) ** 2
        den = p.sum()
        if den == 0.0:
            return 0.0
        return float((self.dc.real @ p) / den)

    def occupied_spread(self, x, s):
        p = np.abs(x) ** 2
        occ = p > OCCUPIED_EPS * p.sum()
        if not np.any(occ):
            return 0.0
        return float(np.abs(self.dc.real[occ] - s).max())


class _DenseDrift:
    def __init__(self, A):
        self.A = A

    def __call__(self, x, s=0.0):
        return self.A @ x

    def mean_decay(self, x):
        return 0.0

    def occupied_spread(self, x, s):
        return 0.0


class _GenericDrift:
    def __init__(self, A_sparse):
        self.A = A_sparse

    def __call__(self, x, s=0.0):
        return self.A @ x

    def mean_decay(self, x):
        return 0.0

    def occupied_spread(self, x, s):
        return 0.0


def _krylov(drift, psi, s=0.0):
    v = np.empty((5, psi.size), dtype=np.complex128)
    v[0] = psi
    for p in range(1, 5):
        v[p] = drift(v[p - 1], s) / p
    return v


def _taylor(v, tau):
    powers = tau ** np.arange(5)
    return powers @ v


def _norm_poly(v):
    g = np.zeros(9)
    for p in range(5):
        for q in range(p, 5):
            d = np.vdot(v[p], v[q]).real
            g[p + q] += d if p == q else 2.0 * d
    return g


def _poly_eval(g, tau):
    acc = g[8]
    for s in range(7, -1, -1):
        acc = acc * tau + g[s]
    return acc


def _bisect_crossing(g, r, hi, dt, two_s):
    lo = 0.0
    tol = BISECT_RTOL * dt
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        val = _poly_eval(g, mid)
        if val > 0.0 and np.exp(two_s * mid) * val >= r:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _traj_loop(drift, apply_jump, psi0, dt, n_steps, steps_per_sample,
               rng_state, samples, sample_nrm2, jump_times):
    # event-driven segments re-anchored at detections; see the numba twin
    psi = psi0.copy()
    jump_cap = jump_times.size
    n_jumps = 0
    log_scale = 0.0
    samples[0] = psi
    sample_nrm2[0] = float(np.vdot(psi, psi).real)
    sidx = 1
    n_samples = samples.shape[0]
    sample_dt = steps_per_sample * dt
    t = 0.0
    tiny = 1e-12 * dt
    r = _uniform_open(rng_state)
    while sidx < n_samples:
        next_sample_t = sidx * sample_dt
        h = min(dt, next_sample_t - t)
        if dt - h <= tiny:
            h = dt
        s = drift.mean_decay(psi)
        spread = drift.occupied_spread(psi, s)
        if spread * h > SPREAD_CAP:
            h = SPREAD_CAP / spread
        v = _krylov(drift, psi, s)
        cand = _taylor(v, h)
        cand_nrm2 = float(np.vdot(cand, cand).real)
        nrm2 = np.exp(2.0 * (log_scale + s * h)) * cand_nrm2
        if nrm2 < r:
            g = _norm_poly(v)
            r_seg = r * np.exp(-2.0 * log_scale)
            tau = _bisect_crossing(g, r_seg, h, dt, 2.0 * s)
            jumped = apply_jump(_taylor(v, tau))
            jn2 = float(np.vdot(jumped, jumped).real)
            if jn2 < UNDERFLOW or not np.isfinite(jn2):
                return n_jumps, 2
            psi = jumped / np.sqrt(jn2)
            if n_jumps >= jump_cap:
                return n_jumps, 1
            jump_times[n_jumps] = t + tau
            n_jumps += 1
            r = _uniform_open(rng_state)
            log_scale = 0.0
            t = t + tau
            continue
        if cand_nrm2 < UNDERFLOW or not np.isfinite(cand_nrm2):
            return n_jumps, 2
        psi = cand / np.sqrt(cand_nrm2)
        log_scale += s * h + 0.5 * np.log(cand_nrm2)
        t = t + h
        if next_sample_t - t <= tiny:
            samples[sidx] = psi
            sample_nrm2[sidx] = np.exp(2.0 * log_scale)
            sidx += 1
            t = next_sample_t
    return n_jumps, 0


def traj_csr(indptr, indices, data, dc, c_diag, psi0, dt, n_steps,
             steps_per_sample, rng_state, samples, sample_nrm2, jump_times):
    drift = _CsrDrift(indptr, indices, data, dc)
    return _traj_loop(drift, lambda x: c_diag * x, psi0, dt, n_steps,
                      steps_per_sample, rng_state, samples, sample_nrm2,
                      jump_times)


def traj_dense(R, A, c_diag, psi0, dt, n_steps, steps_per_sample,
               rng_state, samples, sample_nrm2, jump_times):
    # the dense path steps through R in the numba twin; the Krylov form is
    # the same polynomial, so the fallback reuses the generic loop
    drift = _DenseDrift(A)
    return _traj_loop(drift, lambda x: c_diag * x, psi0, dt, n_steps,
                      steps_per_sample, rng_state, samples, sample_nrm2,
                      jump_times)


def traj_generic(A_sparse, c_sparse, psi0, dt, n_steps, steps_per_sample,
                 rng_state, samples, sample_nrm2, jump_times):
    """Arbitrary complex drift and jump operator; numpy backend only."""
    return _traj_loop(_GenericDrift(A_sparse), lambda x: c_sparse @ x, psi0,
                      dt, n_steps, steps_per_sample, rng_state, samples,
                      sample_nrm2, jump_times)


def _nonherm_loop(drift, psi0, dt, n_steps, steps_per_sample, samples, lognorm):
    psi = psi0.copy()
    samples[0] = psi
    lognorm[0] = 0.0
    acc_log = 0.0
    sidx = 1
    for step in range(n_steps):
        done = 0.0
        while done < dt - 1e-12 * dt:
            s = drift.mean_decay(psi)
            spread = drift.occupied_spread(psi, s)
            h = dt - done
            if spread * h > SPREAD_CAP:
                h = SPREAD_CAP / spread
            u = psi
            for k in (4, 3, 2, 1):
                u = psi + (h / k) * drift(u, s)
            nrm2 = float(np.vdot(u, u).real)
            if nrm2 < UNDERFLOW or not np.isfinite(nrm2):
                return 2
            psi = u / np.sqrt(nrm2)
            acc_log += s * h + 0.5 * np.log(nrm2)
            done += h
        if (step + 1) % steps_per_sample == 0:
            samples[sidx] = psi
            lognorm[sidx] = acc_log
            sidx += 1
    return 0


def nonherm_csr(indptr, indices, data, dc, psi0, dt, n_steps,
                steps_per_sample, samples, lognorm):
    drift = _CsrDrift(indptr, indices, data, dc)
    return _nonherm_loop(drift, psi0, dt, n_steps, steps_per_sample,
                         samples, lognorm)


def nonherm_dense(R, psi0, n_steps, steps_per_sample, samples, lognorm):
    """Dense path: R is the per-step propagator, norm tracked directly."""
    psi = psi0.copy()
    samples[0] = psi
    lognorm[0] = 0.0
    acc_log = 0.0
    sidx = 1
    for step in range(n_steps):
        psi = R @ psi
        nrm2 = float(np.vdot(psi, psi).real)
        if nrm2 < UNDERFLOW or not np.isfinite(nrm2):
            return 2
        psi = psi / np.sqrt(nrm2)
        acc_log += 0.5 * np.log(nrm2)
        if (step + 1) % steps_per_sample == 0:
            samples[sidx] = psi
            lognorm[sidx] = acc_log
            sidx += 1
    return 0
