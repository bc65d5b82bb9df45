import numpy as np
import pytest
import scipy.sparse as sp

from zeno_nh import fockspace as fs
from zeno_nh import master_eq as meq
from zeno_nh import model as mdl
from zeno_nh import zeno_effective as zef
from zeno_nh.exceptions import DegenerateSpecError, ValidationError

GAMMA = 100.0

# two-hop matrix on {|2,1,0>, |1,1,1>, |0,1,2>}, enumerated by hand from
# the four boundary hops of the open three-site chain
Q_THREE_SITE = np.array([
    [8.0, 3.0 * np.sqrt(2.0), 0.0],
    [3.0 * np.sqrt(2.0), 8.0, 3.0 * np.sqrt(2.0)],
    [0.0, 3.0 * np.sqrt(2.0), 8.0],
])


def fig2_setup(gamma=GAMMA, J=1.0, U=0.0):
    lat = fs.LatticeConfig(sites=3, atoms=3, boundary="open")
    basis = fs.build_basis(lat)
    params = mdl.BhmParams(J=J, U=U, lattice=lat)
    meas = mdl.MeasurementConfig(kappa=gamma, C=1.0,
                                 pattern=mdl.named_pattern("middle_site", 3),
                                 n0_k=1.0)
    H = mdl.build_hamiltonian(params, basis)
    c = mdl.build_jump_operator(meas, basis)
    subs = mdl.enumerate_zeno_subspaces(meas, basis)
    return basis, params, meas, H, c, subs


class TestBuild:
    def test_uniform_measurement_is_backaction_free(self):
        lat = fs.LatticeConfig(sites=3, atoms=3, boundary="open")
        basis = fs.build_basis(lat)
        H = mdl.build_hamiltonian(mdl.BhmParams(J=1.0, U=0.0, lattice=lat), basis)
        meas = mdl.MeasurementConfig(kappa=1.0, C=1.0, pattern=(1, 1, 1), n0_k=3.0)
        c = mdl.build_jump_operator(meas, basis)
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        np.testing.assert_allclose(heff.matrix.toarray(), H.toarray(), atol=1e-12)

    def test_decay_entries_are_squared_deviations(self):
        basis, params, meas, H, c, subs = fig2_setup()
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        diag = heff.matrix.diagonal()
        middle = basis.occupations[:, 1]
        np.testing.assert_allclose(
            diag.imag, -GAMMA * (middle - 1.0) ** 2, atol=1e-12
        )
        assert set(np.round(np.unique(-diag.imag), 9)) == {0.0, GAMMA, 4 * GAMMA}

    def test_general_form_matches_density_form(self):
        basis, params, meas, H, c, subs = fig2_setup()
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        d = mdl.measurement_diagonal(meas, basis).real
        density_form = H - 1j * GAMMA * sp.diags((d - 1.0) ** 2)
        np.testing.assert_allclose(
            heff.matrix.toarray(), density_form.toarray(), atol=1e-12
        )
        assert heff.form == "density"

    def test_complex_scattering_keeps_density_form(self):
        # the C phase cancels in every term of the decay diagonal
        lat = fs.LatticeConfig(sites=3, atoms=3, boundary="open")
        basis = fs.build_basis(lat)
        H = mdl.build_hamiltonian(mdl.BhmParams(J=1.0, U=0.0, lattice=lat), basis)
        meas = mdl.MeasurementConfig(kappa=50.0, C=np.sqrt(2) * np.exp(0.3j),
                                     pattern=(0, 1, 0), n0_k=1.0)
        c = mdl.build_jump_operator(meas, basis)
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        d = mdl.measurement_diagonal(meas, basis).real
        expected = H - 1j * meas.gamma * sp.diags((d - 1.0) ** 2)
        np.testing.assert_allclose(heff.matrix.toarray(), expected.toarray(),
                                   atol=1e-10)

    def test_off_spectrum_reference_rejected(self):
        basis, params, meas, H, c, subs = fig2_setup()
        with pytest.raises(ValidationError):
            zef.build_effective_hamiltonian(H, c, c0=meas.c0 * 1.37)

    def test_no_gain(self):
        basis, params, meas, H, c, subs = fig2_setup()
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        assert zef.verify_no_gain(heff) <= 1e-9


class TestEvolve:
    def test_fig2_steady_populations(self):
        basis, params, meas, H, c, subs = fig2_setup()
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        res = zef.evolve_nonhermitian(basis.state_vector((2, 1, 0)), heff,
                                      t_final=100.0, dt=5e-4, sample_points=51)
        idx = [basis.index((2, 1, 0)), basis.index((1, 1, 1)), basis.index((0, 1, 2))]
        np.testing.assert_allclose(res.populations(idx)[-1], [0.25, 0.5, 0.25],
                                   atol=0.02)

    def test_zero_measurement_is_unitary(self):
        lat = fs.LatticeConfig(sites=2, atoms=1, boundary="open")
        basis = fs.build_basis(lat)
        H = mdl.build_hamiltonian(mdl.BhmParams(J=1.0, U=0.0, lattice=lat), basis)
        meas = mdl.MeasurementConfig(kappa=1.0, C=1e-9, pattern=(1, 0), n0_k=1.0)
        c = mdl.build_jump_operator(meas, basis)
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        res = zef.evolve_nonhermitian(basis.state_vector((1, 0)), heff,
                                      t_final=10.0, dt=1e-3, sample_points=21)
        np.testing.assert_allclose(res.norms, 1.0, atol=1e-8)
        np.testing.assert_allclose(res.populations([0])[:, 0],
                                   np.cos(res.times) ** 2, atol=1e-6)

    def test_population_outside_subspace_stays_small(self):
        basis, params, meas, H, c, subs = fig2_setup()
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        res = zef.evolve_nonhermitian(basis.state_vector((2, 1, 0)), heff,
                                      t_final=50.0, dt=5e-4, sample_points=26)
        outside = 1.0 - res.populations(subs[1].indices).sum(axis=1)
        assert outside.max() < 0.01

    def test_unnormalized_input_rejected(self):
        basis, params, meas, H, c, subs = fig2_setup()
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        with pytest.raises(ValidationError):
            zef.evolve_nonhermitian(2.0 * basis.state_vector((2, 1, 0)), heff,
                                    1.0, 5e-4)


class TestRaman:
    def test_matches_hand_enumerated_block(self):
        basis, params, meas, H, c, subs = fig2_setup()
        hphi = zef.build_projected_raman_hamiltonian(params, meas, basis, subs, 1)
        idx = subs[1].indices
        block = hphi.matrix.toarray()[np.ix_(idx, idx)]
        np.testing.assert_allclose(block, -1j / GAMMA * Q_THREE_SITE, atol=1e-12)
        outside = hphi.matrix.toarray().copy()
        outside[np.ix_(idx, idx)] = 0.0
        assert np.abs(outside).max() == 0.0

    def test_relative_decay_rates_and_vectors(self):
        basis, params, meas, H, c, subs = fig2_setup()
        hphi = zef.build_projected_raman_hamiltonian(params, meas, basis, subs, 1)
        idx = subs[1].indices
        block = hphi.matrix.toarray()[np.ix_(idx, idx)]
        vals, vecs = np.linalg.eig(block)
        order = np.argsort(-vals.imag)  # slowest decay first
        rates = -vals.imag[order]
        relative = rates - rates[0]
        np.testing.assert_allclose(relative, [0.0, 6.0 / GAMMA, 12.0 / GAMMA],
                                   atol=1e-10)
        expected = [zef.THREE_SITE_V1, zef.THREE_SITE_V2, zef.THREE_SITE_V3]
        for col, want in zip(order, expected):
            v = vecs[:, col]
            assert abs(np.vdot(want, v)) == pytest.approx(1.0, abs=1e-9)

    def test_no_hopping_gives_zero(self):
        basis, params, meas, H, c, subs = fig2_setup()
        params0 = mdl.BhmParams(J=0.0, U=0.0, lattice=params.lattice)
        hphi = zef.build_projected_raman_hamiltonian(params0, meas, basis, subs, 1)
        assert np.abs(hphi.matrix.toarray()).max() == 0.0

    def test_tracks_consistent_master_equation(self):
        # projected generator vs the record-consistent density-matrix flow
        basis, params, meas, H, c, subs = fig2_setup()
        hphi = zef.build_projected_raman_hamiltonian(params, meas, basis, subs, 1)
        psi0 = basis.state_vector((2, 1, 0))
        res = zef.evolve_nonhermitian(psi0, hphi, t_final=20.0, dt=5e-4,
                                      sample_points=11)
        rho0 = meq.BlockDensityMatrix.from_state(psi0, subs, target=1)
        lres = meq.integrate_lindblad(rho0, H, c, t_final=20.0, dt=5e-4,
                                      sample_points=11, restrict_to=1)
        idx = subs[1].indices
        raman_pops = res.populations(idx)
        for k, rho in enumerate(lres.rhos):
            diag = np.diag(rho.mat).real[idx]
            lind_pops = diag / diag.sum()
            np.testing.assert_allclose(raman_pops[k], lind_pops, atol=0.02)


class TestSpectrum:
    def test_three_slow_seven_fast(self):
        basis, params, meas, H, c, subs = fig2_setup()
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        spec = zef.spectrum(heff)
        im = np.abs(spec.eigenvalues.imag)
        assert int((im <= 20.0 / GAMMA).sum()) == 3
        assert int((im >= 0.1 * GAMMA).sum()) == 7

    def test_slow_vectors_live_in_subspace(self):
        basis, params, meas, H, c, subs = fig2_setup()
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        spec = zef.spectrum(heff)
        outside = np.setdiff1d(np.arange(basis.dim), subs[1].indices)
        for i in range(3):
            v = spec.eigenvectors[:, i]
            v = v / np.linalg.norm(v)
            assert np.sum(np.abs(v[outside]) ** 2) < 0.01

    def test_hermitian_limit_real(self):
        basis, params, meas, H, c, subs = fig2_setup()
        meas0 = mdl.MeasurementConfig(kappa=1.0, C=1e-10, pattern=(0, 1, 0), n0_k=1.0)
        c0op = mdl.build_jump_operator(meas0, basis)
        heff = zef.build_effective_hamiltonian(H, c0op, meas0.c0)
        spec = zef.spectrum(heff)
        assert np.abs(spec.eigenvalues.imag).max() <= 1e-9

    def test_dense_cap(self):
        basis, params, meas, H, c, subs = fig2_setup()
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        with pytest.raises(ValidationError):
            zef.spectrum(heff, dense_cap=5)


class TestThreeSiteAnalytic:
    def test_initial_state_recovered(self):
        psi0 = np.array([1.0, 0.0, 0.0])
        amps = zef.three_site_analytic(psi0, J=1.0, gamma=GAMMA, t=0.0)
        np.testing.assert_allclose(np.abs(amps[0]) ** 2, [1, 0, 0], atol=1e-12)

    def test_long_time_reaches_dark_combination(self):
        psi0 = np.array([1.0, 0.0, 0.0])
        amps = zef.three_site_analytic(psi0, J=1.0, gamma=GAMMA, t=1e5)
        np.testing.assert_allclose(np.abs(amps[0]) ** 2, [0.25, 0.5, 0.25],
                                   atol=1e-9)

    def test_matches_full_nonhermitian_evolution(self):
        basis, params, meas, H, c, subs = fig2_setup()
        heff = zef.build_effective_hamiltonian(H, c, meas.c0)
        res = zef.evolve_nonhermitian(basis.state_vector((2, 1, 0)), heff,
                                      t_final=100.0, dt=5e-4, sample_points=41)
        idx = [basis.index((2, 1, 0)), basis.index((1, 1, 1)), basis.index((0, 1, 2))]
        analytic = zef.three_site_analytic(np.array([1.0, 0, 0]), 1.0, GAMMA,
                                           res.times)
        np.testing.assert_allclose(res.populations(idx),
                                   np.abs(analytic) ** 2, atol=0.02)

    def test_orthonormal_triplet(self):
        vs = np.stack([zef.THREE_SITE_V1, zef.THREE_SITE_V2, zef.THREE_SITE_V3])
        np.testing.assert_allclose(vs @ vs.T, np.eye(3), atol=1e-12)

    def test_zero_input_rejected(self):
        with pytest.raises(DegenerateSpecError):
            zef.three_site_analytic(np.zeros(3), 1.0, GAMMA, 1.0)
