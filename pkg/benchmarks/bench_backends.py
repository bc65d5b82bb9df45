"""Compare the numba kernels against the pure numpy fallback.

Usage: python benchmarks/bench_backends.py [--quick]

Times the trajectory and decay-only propagators on a small dense-path
system (3 atoms / 3 sites) and a large sparse-path system (6 atoms /
6 sites), then prints a table with the speedup.  Both backends run the
same segment algorithm; results agree to roundoff.
"""

import argparse
import time

import numpy as np

from zeno_nh import fockspace as fs
from zeno_nh import model as mdl
from zeno_nh.kernels import numba_backend, numpy_backend
from zeno_nh.rng import xoshiro_state
from zeno_nh.zeno_effective import _taylor4_matrix


def build(M, N, gamma, pattern):
    lat = fs.LatticeConfig(sites=M, atoms=N, boundary="periodic")
    basis = fs.build_basis(lat)
    H = mdl.build_hamiltonian(mdl.BhmParams(J=1.0, U=0.0, lattice=lat), basis)
    meas = mdl.MeasurementConfig(kappa=gamma, C=1.0, pattern=pattern, n0_k=1.0)
    c = mdl.build_jump_operator(meas, basis)
    h_real = H.tocsr().astype(np.float64)
    cd = c.diagonal().astype(np.complex128)
    psi0 = basis.state_vector(basis.states[1])
    return basis, h_real, cd, psi0


def bench_traj(backend, kind, h_real, cd, psi0, t_final, dt):
    dc = (-0.5 * np.abs(cd) ** 2).astype(np.complex128)
    n_samples = 11
    steps_per_sample = int(round(t_final / dt / (n_samples - 1)))
    n_steps = steps_per_sample * (n_samples - 1)
    dim = psi0.size
    samples = np.empty((n_samples, dim), dtype=np.complex128)
    nrm2 = np.empty(n_samples)
    jumps = np.empty(200000)
    state = xoshiro_state(12)
    start = time.perf_counter()
    if kind == "dense":
        A = (-1j) * h_real.toarray().astype(np.complex128)
        A[np.diag_indices(dim)] += dc
        R = _taylor4_matrix(A, dt)
        n_jumps, status = backend.traj_dense(
            R, A, cd, psi0, dt, n_steps, steps_per_sample, state,
            samples, nrm2, jumps)
    else:
        n_jumps, status = backend.traj_csr(
            h_real.indptr, h_real.indices, h_real.data, dc, cd, psi0, dt,
            n_steps, steps_per_sample, state, samples, nrm2, jumps)
    elapsed = time.perf_counter() - start
    assert status == 0
    return elapsed, n_jumps


def bench_nonherm(backend, h_real, cd, psi0, t_final, dt, n0):
    c0 = np.sqrt(2.0) * np.sqrt(50.0) * n0
    dc = (np.conj(c0) * cd - 0.5 * abs(c0) ** 2 - 0.5 * np.abs(cd) ** 2)
    n_samples = 11
    steps_per_sample = int(round(t_final / dt / (n_samples - 1)))
    n_steps = steps_per_sample * (n_samples - 1)
    samples = np.empty((n_samples, psi0.size), dtype=np.complex128)
    lognorm = np.empty(n_samples)
    start = time.perf_counter()
    status = backend.nonherm_csr(h_real.indptr, h_real.indices, h_real.data,
                                 dc.astype(np.complex128), psi0, dt, n_steps,
                                 steps_per_sample, samples, lognorm)
    elapsed = time.perf_counter() - start
    assert status == 0
    return elapsed


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true",
                        help="shorter horizons (for CI smoke runs)")
    args = parser.parse_args()
    t_small = 2.0 if args.quick else 20.0
    t_large = 0.2 if args.quick else 1.0

    print(f"{'case':<34}{'numba':>10}{'numpy':>10}{'speedup':>9}")
    rows = []

    basis, h_real, cd, psi0 = build(3, 3, 50.0, (0, 1, 0))
    # warm the JIT cache outside the timed region
    bench_traj(numba_backend, "dense", h_real, cd, psi0, 0.1, 1e-3)
    t_nb, jumps = bench_traj(numba_backend, "dense", h_real, cd, psi0, t_small, 1e-3)
    t_np, _ = bench_traj(numpy_backend, "dense", h_real, cd, psi0, t_small, 1e-3)
    rows.append((f"trajectory dense dim={basis.dim} ({jumps} jumps)", t_nb, t_np))

    basis, h_real, cd, psi0 = build(6, 6, 50.0, (0, 1, 0, 1, 0, 1))
    bench_traj(numba_backend, "csr", h_real, cd, psi0, 0.02, 1e-3)
    t_nb, jumps = bench_traj(numba_backend, "csr", h_real, cd, psi0, t_large, 1e-3)
    t_np, _ = bench_traj(numpy_backend, "csr", h_real, cd, psi0, t_large, 1e-3)
    rows.append((f"trajectory csr dim={basis.dim} ({jumps} jumps)", t_nb, t_np))

    bench_nonherm(numba_backend, h_real, cd, psi0, 0.02, 1e-3, 3.0)
    t_nb = bench_nonherm(numba_backend, h_real, cd, psi0, t_large, 1e-3, 3.0)
    t_np = bench_nonherm(numpy_backend, h_real, cd, psi0, t_large, 1e-3, 3.0)
    rows.append((f"decay-only csr dim={basis.dim}", t_nb, t_np))

    for name, t_nb, t_np in rows:
        print(f"{name:<34}{t_nb:>9.3f}s{t_np:>9.3f}s{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
