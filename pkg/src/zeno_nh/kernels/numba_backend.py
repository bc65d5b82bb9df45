"""numba @njit kernels for the trajectory and non-Hermitian propagators.

The drift generator A is always applied through its split form
y = -i (H x) + dc * x with H a real CSR matrix and dc a complex diagonal;
every scenario in scope (density-coupled measurement) fits this shape.

One fixed RK4 step of size h on the linear, autonomous Schroedinger
equation equals the quartic Taylor propagator
x + hAx + (hA)^2 x/2 + (hA)^3 x/6 + (hA)^4 x/24, so the kernels step by
that polynomial: dense paths through a precomputed step matrix R, sparse
paths through Horner/Krylov application of A.  Jump times are located by
bisection on the degree-8 squared-norm polynomial of the Krylov vectors
v_p = A^p x / p!.

The measurement decay can span hundreds of 1/dt across the spectrum
(rates grow with the square of the measured value), which would sit far
outside the polynomial's accuracy window.  The sparse kernels therefore
factor out the state's mean decay before each segment,
e^{A tau} = e^{s tau} e^{(A - s) tau} with s = <Re diag>, so the
polynomial only resolves the spread of the occupied components; the
scalar factor is exact.

Status codes: 0 ok, 1 jump-buffer overflow, 2 norm underflow.
"""

import numpy as np
from numba import njit

#: norm**2 below this aborts with a numerical error
UNDERFLOW = 1e-300

#: jump-time bisection width, relative to the step size
BISECT_RTOL = 1e-6

#: occupied decay spread per chunk, |Re dc - s| * h, is capped at this;
#: chunks shrink below dt when the spectrum is stiffer (accuracy, not
#: stability: the quartic's tail error x^5/120 would otherwise bias the
#: relative weights of measurement components)
SPREAD_CAP = 0.35

#: occupation threshold |psi_j|^2 below which a component's decay rate
#: does not constrain the chunk length (its weight error is negligible)
OCCUPIED_EPS = 1e-12

# ---------------------------------------------------------------- RNG ----

@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True, inline="always")
def _xoshiro_next(s):
    result = _rotl(s[0] + s[3], 23) + s[0]
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True, inline="always")
def _uniform_open(s):
    # uniform in (0, 1): the threshold draw must be strictly positive
    u = (_xoshiro_next(s) >> np.uint64(11)) * (2.0 ** -53)
    while u == 0.0:
        u = (_xoshiro_next(s) >> np.uint64(11)) * (2.0 ** -53)
    return u


# ------------------------------------------------------------- helpers ---

@njit(cache=True)
def _drift_csr(indptr, indices, data, dc, x, out):
    n = x.size
    for i in range(n):
        acc = 0.0 + 0.0j
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = -1j * acc + dc[i] * x[i]


@njit(cache=True, inline="always")
def _mean_real_diag(dc, x):
    num = 0.0
    den = 0.0
    for i in range(x.size):
        p = x[i].real * x[i].real + x[i].imag * x[i].imag
        num += dc[i].real * p
        den += p
    if den == 0.0:
        return 0.0
    return num / den


# The sparse hot path carries the state as separate real and imaginary
# arrays: the row accumulators then form independent real FMA chains,
# which the gather-latency-bound loop needs (~35% over complex128).

@njit(cache=True, fastmath=True)
def _krylov_shifted_split(indptr, indices, data, dcr, dci, s, vr, vi):
    # v[p] = ((A - s)^p / p!) v[0] with A x = -i H x + dc x
    dim = vr.shape[1]
    for p in range(1, 5):
        inv_p = 1.0 / p
        xr = vr[p - 1]
        xi = vi[p - 1]
        for i in range(dim):
            ar = 0.0
            ai = 0.0
            for q in range(indptr[i], indptr[i + 1]):
                h = data[q]
                j = indices[q]
                ar += h * xr[j]
                ai += h * xi[j]
            # -i (ar + i ai) = ai - i ar
            vr[p, i] = (ai + (dcr[i] - s) * xr[i] - dci[i] * xi[i]) * inv_p
            vi[p, i] = (-ar + (dcr[i] - s) * xi[i] + dci[i] * xr[i]) * inv_p


@njit(cache=True, fastmath=True)
def _taylor_combine_split(vr, vi, tau, outr, outi):
    t2 = tau * tau
    t3 = t2 * tau
    t4 = t3 * tau
    acc = 0.0
    for i in range(outr.size):
        re = vr[0, i] + tau * vr[1, i] + t2 * vr[2, i] + t3 * vr[3, i] + t4 * vr[4, i]
        im = vi[0, i] + tau * vi[1, i] + t2 * vi[2, i] + t3 * vi[3, i] + t4 * vi[4, i]
        outr[i] = re
        outi[i] = im
        acc += re * re + im * im
    return acc


@njit(cache=True, fastmath=True)
def _norm_poly_split(vr, vi, g):
    for s in range(9):
        g[s] = 0.0
    for p in range(5):
        for q in range(p, 5):
            dot = 0.0
            for i in range(vr.shape[1]):
                dot += vr[p, i] * vr[q, i] + vi[p, i] * vi[q, i]
            if p == q:
                g[p + q] += dot
            else:
                g[p + q] += 2.0 * dot
    return g


@njit(cache=True)
def _matvec_dense(mat, x, out):
    n = x.size
    for i in range(n):
        acc = 0.0 + 0.0j
        row = mat[i]
        for j in range(n):
            acc += row[j] * x[j]
        out[i] = acc


@njit(cache=True)
def _norm_sq(x):
    acc = 0.0
    for i in range(x.size):
        acc += x[i].real * x[i].real + x[i].imag * x[i].imag
    return acc


@njit(cache=True)
def _taylor_combine(v, tau, out):
    # out = sum_p tau^p v[p]; returns ||out||^2
    n = out.size
    t2 = tau * tau
    t3 = t2 * tau
    t4 = t3 * tau
    acc = 0.0
    for i in range(n):
        val = v[0, i] + tau * v[1, i] + t2 * v[2, i] + t3 * v[3, i] + t4 * v[4, i]
        out[i] = val
        acc += val.real * val.real + val.imag * val.imag
    return acc


@njit(cache=True)
def _norm_poly(v, g):
    # g[s] = sum_{p+q=s} <v_p|v_q>, real by conjugate pairing
    for s in range(9):
        g[s] = 0.0
    for p in range(5):
        for q in range(p, 5):
            dot_re = 0.0
            for i in range(v.shape[1]):
                dot_re += v[p, i].real * v[q, i].real + v[p, i].imag * v[q, i].imag
            if p == q:
                g[p + q] += dot_re
            else:
                g[p + q] += 2.0 * dot_re
    return g


@njit(cache=True, inline="always")
def _poly_eval(g, tau):
    acc = g[8]
    for s in range(7, -1, -1):
        acc = acc * tau + g[s]
    return acc


@njit(cache=True)
def _bisect_crossing(g, r, hi, dt, two_s):
    # true squared norm e^{2 s tau} g(tau) is monotone decreasing;
    # the polynomial tail may go negative for empty fast components,
    # which reads as already-crossed
    lo = 0.0
    width = hi
    tol = BISECT_RTOL * dt
    while width > tol:
        mid = 0.5 * (lo + hi)
        val = _poly_eval(g, mid)
        if val > 0.0 and np.exp(two_s * mid) * val >= r:
            lo = mid
        else:
            hi = mid
        width = hi - lo
    return 0.5 * (lo + hi)


# ------------------------------------------------------- trajectory ------

@njit(cache=True, nogil=True)
def traj_csr(indptr, indices, data, dc, c_diag, psi0, dt, n_steps,
             steps_per_sample, rng_state, samples, sample_nrm2, jump_times):
    """Quantum-jump unraveling with a real-CSR drift.  Returns (n_jumps, status).

    Event-driven segments: propagation restarts at every detection and at
    every sample boundary, in pieces of at most dt, so the Krylov build
    after a jump is also the build of the following segment.  The working
    vector stays O(1): the scalar decay factor accumulates in log_scale and
    the true squared norm since the last detection is
    e^{2 log_scale} ||psi||^2.
    """
    dim = psi0.size
    dcr = np.empty(dim, dtype=np.float64)
    dci = np.empty(dim, dtype=np.float64)
    cr = np.empty(dim, dtype=np.float64)
    ci = np.empty(dim, dtype=np.float64)
    for i in range(dim):
        dcr[i] = dc[i].real
        dci[i] = dc[i].imag
        cr[i] = c_diag[i].real
        ci[i] = c_diag[i].imag
    vr = np.empty((5, dim), dtype=np.float64)
    vi = np.empty((5, dim), dtype=np.float64)
    candr = np.empty(dim, dtype=np.float64)
    candi = np.empty(dim, dtype=np.float64)
    g = np.empty(9, dtype=np.float64)
    jump_cap = jump_times.size
    n_jumps = 0
    log_scale = 0.0

    for i in range(dim):
        vr[0, i] = psi0[i].real
        vi[0, i] = psi0[i].imag
        samples[0, i] = psi0[i]
    sample_nrm2[0] = _norm_sq(psi0)
    sidx = 1
    n_samples = samples.shape[0]
    sample_dt = steps_per_sample * dt
    t = 0.0
    tiny = 1e-12 * dt

    r = _uniform_open(rng_state)
    while sidx < n_samples:
        next_sample_t = sidx * sample_dt
        h = next_sample_t - t
        if h > dt:
            h = dt
        s = 0.0
        den = 0.0
        for i in range(dim):
            p2 = vr[0, i] * vr[0, i] + vi[0, i] * vi[0, i]
            s += dcr[i] * p2
            den += p2
        s /= den
        spread = 0.0
        for i in range(dim):
            p2 = vr[0, i] * vr[0, i] + vi[0, i] * vi[0, i]
            if p2 > OCCUPIED_EPS * den:
                dev = abs(dcr[i] - s)
                if dev > spread:
                    spread = dev
        if spread * h > SPREAD_CAP:
            h = SPREAD_CAP / spread
        _krylov_shifted_split(indptr, indices, data, dcr, dci, s, vr, vi)
        cand_nrm2 = _taylor_combine_split(vr, vi, h, candr, candi)
        nrm2 = np.exp(2.0 * (log_scale + s * h)) * cand_nrm2
        if nrm2 < r:
            # detection inside (t, t + h): locate, apply, re-anchor
            _norm_poly_split(vr, vi, g)
            r_seg = r * np.exp(-2.0 * log_scale)
            tau = _bisect_crossing(g, r_seg, h, dt, 2.0 * s)
            _taylor_combine_split(vr, vi, tau, candr, candi)
            jn2 = 0.0
            for i in range(dim):
                re = cr[i] * candr[i] - ci[i] * candi[i]
                im = cr[i] * candi[i] + ci[i] * candr[i]
                candr[i] = re
                candi[i] = im
                jn2 += re * re + im * im
            if jn2 < UNDERFLOW or not np.isfinite(jn2):
                return n_jumps, 2
            w = 1.0 / np.sqrt(jn2)
            for i in range(dim):
                vr[0, i] = candr[i] * w
                vi[0, i] = candi[i] * w
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
        w = 1.0 / np.sqrt(cand_nrm2)
        for i in range(dim):
            vr[0, i] = candr[i] * w
            vi[0, i] = candi[i] * w
        log_scale += s * h + 0.5 * np.log(cand_nrm2)
        t = t + h
        if next_sample_t - t <= tiny:
            for i in range(dim):
                samples[sidx, i] = complex(vr[0, i], vi[0, i])
            sample_nrm2[sidx] = np.exp(2.0 * log_scale)
            sidx += 1
            t = next_sample_t
    return n_jumps, 0


@njit(cache=True)
def _krylov_dense(A, psi, v):
    dim = psi.size
    v[0] = psi
    for p in range(1, 5):
        _matvec_dense(A, v[p - 1], v[p])
        for i in range(dim):
            v[p, i] /= p


@njit(cache=True, nogil=True)
def traj_dense(R, A, c_diag, psi0, dt, n_steps, steps_per_sample,
               rng_state, samples, sample_nrm2, jump_times):
    """Dense-propagator variant of traj_csr: full-dt segments step through
    the precomputed matrix R, partial segments through the Krylov form."""
    dim = psi0.size
    psi = psi0.copy()
    v = np.empty((5, dim), dtype=np.complex128)
    cand = np.empty(dim, dtype=np.complex128)
    g = np.empty(9, dtype=np.float64)
    jump_cap = jump_times.size
    n_jumps = 0
    log_scale = 0.0

    samples[0] = psi
    sample_nrm2[0] = _norm_sq(psi)
    sidx = 1
    n_samples = samples.shape[0]
    sample_dt = steps_per_sample * dt
    t = 0.0
    tiny = 1e-12 * dt

    r = _uniform_open(rng_state)
    while sidx < n_samples:
        next_sample_t = sidx * sample_dt
        h = next_sample_t - t
        if h > dt:
            h = dt
        have_krylov = False
        if dt - h <= tiny:
            h = dt
            _matvec_dense(R, psi, cand)
            cand_nrm2 = _norm_sq(cand)
        else:
            _krylov_dense(A, psi, v)
            have_krylov = True
            cand_nrm2 = _taylor_combine(v, h, cand)
        nrm2 = np.exp(2.0 * log_scale) * cand_nrm2
        if nrm2 < r:
            if not have_krylov:
                _krylov_dense(A, psi, v)
            _norm_poly(v, g)
            r_seg = r * np.exp(-2.0 * log_scale)
            tau = _bisect_crossing(g, r_seg, h, dt, 0.0)
            _taylor_combine(v, tau, cand)
            jn2 = 0.0
            for i in range(dim):
                cand[i] = c_diag[i] * cand[i]
                jn2 += cand[i].real * cand[i].real + cand[i].imag * cand[i].imag
            if jn2 < UNDERFLOW or not np.isfinite(jn2):
                return n_jumps, 2
            w = 1.0 / np.sqrt(jn2)
            for i in range(dim):
                psi[i] = cand[i] * w
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
        w = 1.0 / np.sqrt(cand_nrm2)
        for i in range(dim):
            psi[i] = cand[i] * w
        log_scale += 0.5 * np.log(cand_nrm2)
        t = t + h
        if next_sample_t - t <= tiny:
            samples[sidx] = psi
            sample_nrm2[sidx] = np.exp(2.0 * log_scale)
            sidx += 1
            t = next_sample_t
    return n_jumps, 0


# ---------------------------------------------------- deterministic ------

@njit(cache=True, nogil=True)
def nonherm_csr(indptr, indices, data, dc, psi0, dt, n_steps,
                steps_per_sample, samples, lognorm):
    """Decay-only propagation; renormalizes every step with log bookkeeping.

    The same mean-decay shift as traj_csr keeps the working vector O(1);
    emitted samples are unit norm and lognorm carries the raw decay.
    """
    dim = psi0.size
    dcr = np.empty(dim, dtype=np.float64)
    dci = np.empty(dim, dtype=np.float64)
    psir = np.empty(dim, dtype=np.float64)
    psii = np.empty(dim, dtype=np.float64)
    for i in range(dim):
        dcr[i] = dc[i].real
        dci[i] = dc[i].imag
        psir[i] = psi0[i].real
        psii[i] = psi0[i].imag
    ur = np.empty(dim, dtype=np.float64)
    ui = np.empty(dim, dtype=np.float64)
    tr = np.empty(dim, dtype=np.float64)
    ti = np.empty(dim, dtype=np.float64)

    samples[0] = psi0
    lognorm[0] = 0.0
    acc_log = 0.0
    sidx = 1
    for step in range(n_steps):
        # grid steps subdivide when the occupied decay spread is stiff,
        # same accuracy cap as the trajectory kernel
        done = 0.0
        while done < dt - 1e-12 * dt:
            s = 0.0
            den = 0.0
            for i in range(dim):
                p2 = psir[i] * psir[i] + psii[i] * psii[i]
                s += dcr[i] * p2
                den += p2
            s /= den
            spread = 0.0
            for i in range(dim):
                p2 = psir[i] * psir[i] + psii[i] * psii[i]
                if p2 > OCCUPIED_EPS * den:
                    dev = abs(dcr[i] - s)
                    if dev > spread:
                        spread = dev
            h = dt - done
            if spread * h > SPREAD_CAP:
                h = SPREAD_CAP / spread
            # Horner form of the quartic propagator for the shifted drift
            for i in range(dim):
                ur[i] = psir[i]
                ui[i] = psii[i]
            for k in (4, 3, 2, 1):
                coef = h / k
                for i in range(dim):
                    ar = 0.0
                    ai = 0.0
                    for q in range(indptr[i], indptr[i + 1]):
                        hq = data[q]
                        j = indices[q]
                        ar += hq * ur[j]
                        ai += hq * ui[j]
                    tr[i] = ai + (dcr[i] - s) * ur[i] - dci[i] * ui[i]
                    ti[i] = -ar + (dcr[i] - s) * ui[i] + dci[i] * ur[i]
                for i in range(dim):
                    ur[i] = psir[i] + coef * tr[i]
                    ui[i] = psii[i] + coef * ti[i]
            nrm2 = 0.0
            for i in range(dim):
                nrm2 += ur[i] * ur[i] + ui[i] * ui[i]
            if nrm2 < UNDERFLOW or not np.isfinite(nrm2):
                return 2
            w = 1.0 / np.sqrt(nrm2)
            for i in range(dim):
                psir[i] = ur[i] * w
                psii[i] = ui[i] * w
            acc_log += s * h + 0.5 * np.log(nrm2)
            done += h
        if (step + 1) % steps_per_sample == 0:
            for i in range(dim):
                samples[sidx, i] = complex(psir[i], psii[i])
            lognorm[sidx] = acc_log
            sidx += 1
    return 0


@njit(cache=True, nogil=True)
def nonherm_dense(R, psi0, n_steps, steps_per_sample, samples, lognorm):
    """Dense-propagator variant of nonherm_csr."""
    dim = psi0.size
    psi = psi0.copy()
    tmp = np.empty(dim, dtype=np.complex128)

    samples[0] = psi
    lognorm[0] = 0.0
    acc_log = 0.0
    sidx = 1
    for step in range(n_steps):
        _matvec_dense(R, psi, tmp)
        nrm2 = _norm_sq(tmp)
        if nrm2 < UNDERFLOW or not np.isfinite(nrm2):
            return 2
        w = 1.0 / np.sqrt(nrm2)
        for i in range(dim):
            psi[i] = tmp[i] * w
        acc_log += 0.5 * np.log(nrm2)
        if (step + 1) % steps_per_sample == 0:
            samples[sidx] = psi
            lognorm[sidx] = acc_log
            sidx += 1
    return 0
