"""Acceptance suite: one test per primary criterion, each printing a
PASS/FAIL line (run with `pytest tests/test_acceptance.py -v -s`).

Tolerances are pinned here and nowhere else.  The runtime budgets read
"one laptop core, excluding ensemble parallelism" as: serial work must fit
the stated budget on one core, while trajectory ensembles are counted at
their per-core cost assuming a four-core laptop (they are embarrassingly
parallel and reductions are order-independent).
"""

import time

import numpy as np
import pytest

from zeno_nh import fockspace as fs
from zeno_nh import inference as inf
from zeno_nh import master_eq as meq
from zeno_nh import model as mdl
from zeno_nh import steady_state as sst
from zeno_nh import trajectories as trj
from zeno_nh import zeno_effective as zef
from zeno_nh.kernels import numba_backend
from zeno_nh.rng import stream_seed

GAMMA_FIG2 = 100.0
ENSEMBLE_SEED = 20160614
FIG3_SEED = 0
FIG3_T_FINAL = 120.0
LAPTOP_CORES = 4

#: laptop-core reference for the calibration matvec (seconds per pass of
#: the 8-site drift application)
REFERENCE_MATVEC = 65e-6

_scale_cache = []


def hardware_scale() -> float:
    """Wall budgets are stated for a laptop core; scale them by measured
    machine speed (never below 1x) so the assertions gate algorithmic cost
    rather than sandbox hardware."""
    if not _scale_cache:
        lat = fs.LatticeConfig(sites=8, atoms=8, boundary="periodic")
        basis = fs.build_basis(lat)
        H = mdl.build_hamiltonian(
            mdl.BhmParams(J=1.0, U=0.0, lattice=lat), basis).tocsr()
        dim = basis.dim
        rng = np.random.default_rng(0)
        vr = rng.normal(size=(5, dim))
        vi = rng.normal(size=(5, dim))
        dcr = -np.abs(H.diagonal()) - 1.0
        dci = np.zeros(dim)
        data = H.data.astype(np.float64)
        numba_backend._krylov_shifted_split(H.indptr, H.indices, data,
                                            dcr, dci, -1.0, vr, vi)
        reps = 12
        t0 = time.perf_counter()
        for _ in range(reps):
            numba_backend._krylov_shifted_split(H.indptr, H.indices, data,
                                                dcr, dci, -1.0, vr, vi)
        per_pass = (time.perf_counter() - t0) / (4 * reps)
        _scale_cache.append(max(1.0, per_pass / REFERENCE_MATVEC))
        print(f"[hardware calibration: matvec {per_pass * 1e6:.0f} us, "
              f"budget scale x{_scale_cache[0]:.2f}]", flush=True)
    return _scale_cache[0]


def report(name: str, ok: bool, detail: str = ""):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip(),
          flush=True)
    assert ok, f"{name}: {detail}"


def fig2_system(gamma=GAMMA_FIG2):
    lat = fs.LatticeConfig(sites=3, atoms=3, boundary="open")
    basis = fs.build_basis(lat)
    params = mdl.BhmParams(J=1.0, U=0.0, lattice=lat)
    meas = mdl.MeasurementConfig(kappa=gamma, C=1.0,
                                 pattern=mdl.named_pattern("middle_site", 3),
                                 n0_k=1.0)
    H = mdl.build_hamiltonian(params, basis)
    c = mdl.build_jump_operator(meas, basis)
    subs = mdl.enumerate_zeno_subspaces(meas, basis)
    return basis, params, meas, H, c, subs


def test_fig2_reproduction():
    basis, params, meas, H, c, subs = fig2_system()
    psi0 = basis.state_vector((2, 1, 0))
    idx = subs[1].indices

    t0 = time.perf_counter()
    heff = zef.build_effective_hamiltonian(H, c, meas.c0)
    res = zef.evolve_nonhermitian(psi0, heff, 100.0, 5e-4, sample_points=20)
    serial_elapsed = time.perf_counter() - t0

    final = res.populations(idx)[-1]
    curve_ok = np.allclose(final, [0.25, 0.50, 0.25], atol=0.02)
    report("fig2-steady-populations", curve_ok,
           f"final={np.round(final, 4)} target (0.25, 0.50, 0.25) +-0.02")

    t1 = time.perf_counter()
    ens = trj.run_ensemble(psi0, H, c, 100.0, 5e-4, n_traj=1000,
                           base_seed=ENSEMBLE_SEED, sample_points=20,
                           condition_on=idx)
    ens_elapsed = time.perf_counter() - t1
    dev = np.abs(ens.cond_mean_abs2[:, idx] - res.populations(idx)).max()
    survivors = int(ens.cond_fraction[-1] * 1000)
    report("fig2-ensemble-agreement", dev <= 0.05,
           f"max dev {dev:.3f} <= 0.05 at 20 sample times "
           f"({survivors} consistent trajectories at Jt=100)")

    budget = 60.0 * hardware_scale()
    budget_ok = serial_elapsed <= budget and ens_elapsed / LAPTOP_CORES <= budget
    report("fig2-runtime", budget_ok,
           f"serial {serial_elapsed:.1f}s, ensemble {ens_elapsed:.1f}s "
           f"(~{ens_elapsed / LAPTOP_CORES:.1f}s per laptop core; "
           f"budget {budget:.0f}s)")


def test_decay_rate_fits():
    basis, params, meas, H, c, subs = fig2_system()
    psi0 = basis.state_vector((2, 1, 0))
    heff = zef.build_effective_hamiltonian(H, c, meas.c0)
    res = zef.evolve_nonhermitian(psi0, heff, 50.0, 5e-4, sample_points=51)
    idx = [basis.index((2, 1, 0)), basis.index((1, 1, 1)), basis.index((0, 1, 2))]
    phi = res.states[:, idx]
    z1 = phi @ zef.THREE_SITE_V1
    z2 = phi @ zef.THREE_SITE_V2
    z3 = phi @ zef.THREE_SITE_V3
    # component ratios cancel the overall normalization
    slope2 = np.polyfit(res.times, np.log(np.abs(z2 / z1)), 1)[0]
    slope3 = np.polyfit(res.times, np.log(np.abs(z3 / z1)), 1)[0]
    want2, want3 = 6.0 / GAMMA_FIG2, 12.0 / GAMMA_FIG2
    ok2 = abs(-slope2 - want2) <= 0.05 * want2
    ok3 = abs(-slope3 - want3) <= 0.05 * want3
    report("decay-rates", ok2 and ok3,
           f"fit rates ({-slope2:.5f}, {-slope3:.5f}) vs "
           f"(6, 12) J^2/gamma = ({want2}, {want3}) within 5%")


def test_spectrum_partition():
    basis, params, meas, H, c, subs = fig2_system()
    heff = zef.build_effective_hamiltonian(H, c, meas.c0)
    t0 = time.perf_counter()
    spec = zef.spectrum(heff)
    elapsed = time.perf_counter() - t0
    im = np.abs(spec.eigenvalues.imag)
    slow = int((im <= 20.0 / GAMMA_FIG2).sum())
    fast = int((im >= 0.1 * GAMMA_FIG2).sum())
    report("spectrum-partition",
           slow == 3 and fast == 7 and elapsed <= 1.0 * hardware_scale(),
           f"slow={slow} (want 3), fast={fast} (want 7), {elapsed * 1e3:.0f} ms")


def test_unraveling_matches_master_equation():
    lat = fs.LatticeConfig(sites=2, atoms=2, boundary="open")
    basis = fs.build_basis(lat)
    params = mdl.BhmParams(J=1.0, U=0.0, lattice=lat)
    meas = mdl.MeasurementConfig(kappa=10.0, C=1.0, pattern=(1, 0), n0_k=2.0)
    H = mdl.build_hamiltonian(params, basis)
    c = mdl.build_jump_operator(meas, basis)
    subs = mdl.enumerate_zeno_subspaces(meas, basis)
    psi0 = basis.state_vector((2, 0))

    rho0 = meq.BlockDensityMatrix.from_state(psi0, subs)
    ref = meq.integrate_lindblad(rho0, H, c, 2.0, 5e-3, sample_points=11)

    t0 = time.perf_counter()
    ens = trj.run_ensemble(psi0, H, c, 2.0, 5e-3, n_traj=1000,
                           base_seed=ENSEMBLE_SEED, sample_points=11,
                           rho_snapshots=11)
    elapsed = time.perf_counter() - t0
    dists = [meq.trace_distance(ens.mean_rho[k], ref.rhos[k].mat)
             for k in range(len(ref.rhos))]
    worst = max(dists)
    report("unraveling-lindblad-equivalence",
           worst <= 0.05 and elapsed / LAPTOP_CORES <= 60.0 * hardware_scale(),
           f"max trace distance {worst:.4f} <= 0.05 over Jt <= 2 "
           f"({elapsed:.1f}s)")


def test_coherence_scaling_law():
    # the coherences are slaved to the diagonal blocks, so the K/lambda^2
    # scaling is read off at matched Raman phase (equal J^2 t / gamma, both
    # far past the 1/gamma transient); equal absolute times would compare
    # different diagonal-block configurations
    # blocks (1,0) and (1,2) are the hopping-connected coherences; (1,3)
    # has no direct Hamiltonian element and the eliminated value is zero
    norms = {}
    eliminated = {}
    for gamma in (10.0, 100.0):
        basis, params, meas, H, c, subs = fig2_system(gamma)
        psi0 = basis.state_vector((2, 1, 0))
        rho0 = meq.BlockDensityMatrix.from_state(psi0, subs, target=1)
        t_late = 0.2 * gamma  # gamma * t = 0.2 * gamma^2 >> 1
        res = meq.integrate_lindblad(rho0, H, c, t_late, 0.05 / gamma,
                                     sample_points=5)
        late = res.rhos[-1]
        elim = meq.adiabatic_eliminate(late, H, c)
        norms[gamma] = np.sqrt(sum(late.block_norm(1, n) ** 2 for n in (0, 2)))
        eliminated[gamma] = np.sqrt(sum(elim.block_norm(1, n) ** 2
                                        for n in (0, 2)))
    ratio = norms[10.0] / norms[100.0]
    ratio_ok = abs(ratio - 10.0) <= 2.0
    match_ok = all(
        abs(norms[g] - eliminated[g]) <= 0.10 * eliminated[g]
        for g in (10.0, 100.0)
    )
    report("coherence-scaling", ratio_ok and match_ok,
           f"norm ratio {ratio:.2f} (want 10 +- 2); elimination match "
           f"{[round(norms[g] / eliminated[g], 3) for g in (10.0, 100.0)]} within 10%")


@pytest.mark.slow
def test_fig3_qualitative():
    lat = fs.LatticeConfig(sites=8, atoms=8, boundary="periodic")
    basis = fs.build_basis(lat)
    params = mdl.BhmParams(J=1.0, U=0.0, lattice=lat)
    meas = mdl.MeasurementConfig(kappa=100.0, C=1.0,
                                 pattern=mdl.named_pattern("even_sites", 8),
                                 n0_k=4.0)
    H = mdl.build_hamiltonian(params, basis)
    c = mdl.build_jump_operator(meas, basis)
    psi0 = basis.state_vector((1,) * 8)

    t0 = time.perf_counter()
    res = trj.run_trajectory(psi0, H, c, FIG3_T_FINAL, 5e-4,
                             seed=FIG3_SEED, sample_points=121)
    elapsed = time.perf_counter() - t0
    obs = trj.observables_series(res.states, res.times, basis, meas)

    fluct = obs.columns["fluct_c"]
    running_max = np.maximum.accumulate(fluct).max()
    a_ok = fluct[-1] < 0.10 * running_max
    report("fig3-measured-fluctuations", a_ok,
           f"final fluct_c {fluct[-1]:.4f} < 10% of running max {running_max:.4f}")

    ldv = obs.columns["local_density_variance"]
    report("fig3-local-density-variance", ldv[-1] > 0.1,
           f"final {ldv[-1]:.3f} > 0.1 (started at {ldv[0]:.3f})")

    m_idx, ks = fs.momentum_grid(lat)
    nk = np.array([obs.columns[f"n_k_m{m}"][-1] for m in m_idx])
    sym_dev = max(
        abs(nk[list(m_idx).index(m)] - nk[list(m_idx).index(-m)])
        for m in (1, 2, 3)
    )
    peak_modes = set(np.array(m_idx)[nk >= nk.max() - 1e-9].tolist())
    nk0 = nk[list(m_idx).index(0)]
    c_ok = sym_dev <= 0.05 and peak_modes == {-2, 2} and nk0 < 0.1
    report("fig3-momentum-distribution", c_ok,
           f"symmetry dev {sym_dev:.4f} <= 0.05, maxima at m={sorted(peak_modes)} "
           f"(want [-2, 2] = +-pi/2a), n_k0 {nk0:.4f} < 0.1")

    budget = 900.0 * hardware_scale()
    report("fig3-runtime", elapsed <= budget,
           f"{elapsed:.0f}s <= {budget:.0f}s (900s at laptop-core speed)")


def test_steady_state_family():
    cases = []
    rng = np.random.default_rng(7)
    for M in (4, 8):
        for N in range(1, 5):
            for dn in range(-N, N + 1):
                if (N - abs(dn)) % 2:
                    continue
                lat = fs.LatticeConfig(sites=M, atoms=N, boundary="periodic")
                cases.append(sst.SteadyStateSpec(lattice=lat, delta_n=dn))
                n_pairs = (N - abs(dn)) // 2
                if n_pairs:
                    k_count = fs.pair_momenta(lat).size
                    coeff = rng.normal(size=(n_pairs, k_count)) \
                        + 1j * rng.normal(size=(n_pairs, k_count))
                    cases.append(sst.SteadyStateSpec(
                        lattice=lat, delta_n=dn, coefficients=coeff.tolist()))
    assert len(cases) >= 20
    worst = 0.0
    worst_sf = 0.0
    for spec in cases:
        psi, basis = sst.build_steady_state(spec)
        rep = sst.verify_dark_state(psi, basis)
        dn_target_residual = abs(rep.delta_n_value - spec.delta_n)
        worst = max(worst, rep.tunnelling_norm, rep.delta_n_residual,
                    dn_target_residual, rep.measured_variance,
                    rep.h0_residual, rep.lindblad_rhs_max or 0.0)
        worst_sf = max(worst_sf, rep.superfluid_overlap)
    report("steady-state-family", worst <= 1e-10 and worst_sf <= 1e-12,
           f"{len(cases)} cases; worst residual {worst:.2e} <= 1e-10, "
           f"superfluid overlap {worst_sf:.2e} <= 1e-12")


def test_momentum_identities():
    basis = fs.build_basis(fs.LatticeConfig(sites=4, atoms=2, boundary="periodic"))
    rep = sst.momentum_operator_identities(basis)
    ok = (rep.kinetic_residual <= 1e-12 and rep.delta_n_residual <= 1e-12
          and abs(rep.kinetic_factor - 2.0) <= 1e-12
          and abs(rep.delta_n_factor + 0.5) <= 1e-12)
    report("momentum-identities", ok,
           f"residuals ({rep.kinetic_residual:.1e}, {rep.delta_n_residual:.1e})"
           f" <= 1e-12; factors ({rep.kinetic_factor.real:g}, "
           f"{rep.delta_n_factor.real:g})")


def test_inference_closure():
    gamma = GAMMA_FIG2
    rates = 2.0 * gamma * np.array([0.0, 1.0, 4.0, 9.0])
    hyps = inf.uniform_hypotheses(rates)
    true_index = 1
    t_star = float(np.max(np.delete(
        inf.distinguishability_time(hyps, target=true_index), true_index)))
    wins = 0
    for i in range(1000):
        rec = inf.simulate_poisson_record(rates[true_index], t_star,
                                          stream_seed(ENSEMBLE_SEED, i))
        post = inf.bayes_update(hyps, rec.count, t_star)
        wins += post.probabilities[true_index] >= 0.99
    report("inference-closure", wins >= 950,
           f"{wins}/1000 records reach posterior >= 0.99 at t = {t_star:.4f} "
           f"(want >= 950)")


def test_conditioned_purity_bound():
    distances = {}
    for gamma in (100.0, 1000.0):
        basis, params, meas, H, c, subs = fig2_system(gamma)
        psi0 = basis.state_vector((2, 1, 0))
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        res = zef.evolve_nonhermitian(psi0, heff, 20.0, 0.05 / gamma,
                                      sample_points=21)
        rho0 = meq.BlockDensityMatrix.from_state(psi0, subs, target=1)
        lres = meq.integrate_lindblad(rho0, H, c, 20.0, 0.05 / gamma,
                                      sample_points=21, restrict_to=1)
        worst = 0.0
        for k in range(len(res.times)):
            sigma = np.outer(res.states[k], res.states[k].conj())
            rho = lres.rhos[k].mat
            rho = rho / np.trace(rho).real
            worst = max(worst, meq.trace_distance(sigma, rho))
        distances[gamma] = worst
    shrink = distances[100.0] / distances[1000.0]
    ok = distances[100.0] <= 0.02 and shrink >= 50.0
    report("conditioned-purity-bound", ok,
           f"trace distance {distances[100.0]:.2e} <= 0.02 at gamma/J=100; "
           f"shrinks {shrink:.0f}x >= 50x at gamma/J=1000")
