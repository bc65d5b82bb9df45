"""Stochastic quantum-jump unraveling of the photodetection record.

Between detections the state drifts under H0 - (i/2) c^dag c; the squared
norm decays monotonically and a detection fires when it crosses a uniform
threshold, located by bisection inside the step.  At each detection the
jump operator is applied and the state renormalized.  Ignoring the record
and averaging trajectories recovers the master equation.

Trajectory randomness comes from the package's pinned xoshiro256++ streams
(see rng.py); records are bit-reproducible for a fixed seed and backend.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import fockspace as fs
from . import kernels
from .exceptions import IntegrationError, ValidationError
from .model import MeasurementConfig, ZenoSubspace, measurement_diagonal
from .rng import stream_seed, xoshiro_state
from .zeno_effective import DENSE_THRESHOLD, _sampling_layout, _taylor4_matrix

#: ensemble density-matrix averaging is enabled at or below this dimension
RHO_AVERAGE_CAP = 400


@dataclass
class DetectionRecord:
    """Ordered photodetection times within [0, t_final]."""

    jump_times: np.ndarray
    t_final: float

    def __post_init__(self):
        self.jump_times = np.asarray(self.jump_times, dtype=np.float64)
        if self.jump_times.size:
            if np.any(np.diff(self.jump_times) <= 0):
                raise ValidationError("jump_times", "must be strictly increasing")
            if self.jump_times[0] < 0 or self.jump_times[-1] > self.t_final:
                raise ValidationError("jump_times", "outside [0, t_final]")

    @property
    def count(self) -> int:
        return int(self.jump_times.size)

    def counts_at(self, times) -> np.ndarray:
        """Cumulative detections m(t) on a time grid."""
        return np.searchsorted(self.jump_times, np.asarray(times), side="right")

    def to_json(self, path, extra: dict | None = None) -> None:
        payload = {"t_final": self.t_final, "jump_times": self.jump_times.tolist()}
        if extra:
            payload.update(extra)
        Path(path).write_text(json.dumps(payload, indent=2))

    @classmethod
    def from_json(cls, path) -> "DetectionRecord":
        payload = json.loads(Path(path).read_text())
        return cls(np.asarray(payload["jump_times"]), float(payload["t_final"]))


@dataclass
class TrajectoryResult:
    record: DetectionRecord
    times: np.ndarray
    states: np.ndarray  # (n_samples, dim), renormalized at sample points
    sample_nrm2: np.ndarray  # squared norm since the last detection
    seed: int
    engine_path: str = "unknown"

    def populations(self, indices) -> np.ndarray:
        return np.abs(self.states[:, indices]) ** 2


def _fast_parts(H0, c):
    """(h_real, dc, c_diag) when the drift fits the real-CSR kernels."""
    c = sp.csr_matrix(c)
    off = c - sp.diags(c.diagonal())
    if off.nnz and np.abs(off.data).max() > 0:
        return None
    H0 = sp.csr_matrix(H0)
    if np.iscomplexobj(H0.data) and H0.nnz and np.abs(H0.data.imag).max() > 0:
        return None
    cd = c.diagonal().astype(np.complex128)
    dc = (-0.5 * np.abs(cd) ** 2).astype(np.complex128)
    return sp.csr_matrix(H0.real), dc, cd


def _initial_rate(psi0, c) -> float:
    cpsi = sp.csr_matrix(c) @ psi0
    return float(np.vdot(cpsi, cpsi).real)


def run_trajectory(
    psi0: np.ndarray,
    H0,
    c,
    t_final: float,
    dt: float,
    seed: int,
    sample_points: int = 201,
    jump_cap: int | None = None,
) -> TrajectoryResult:
    """One conditioned trajectory with its detection record.

    Parameters
    ----------
    psi0 : normalized state over the Fock basis.
    H0, c : Hamiltonian and jump operator on the same basis.
    t_final, dt : horizon and RK4 step; dt is shrunk to land samples on
        exact step boundaries.
    seed : 64-bit stream seed (see rng.stream_seed for ensemble splitting).
    sample_points : states kept on a uniform grid including t=0.
    jump_cap : detection buffer size; grows automatically on overflow.
    """
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValidationError("psi0", "initial state must be normalized")
    n_samples, steps_per_sample, h, n_steps = _sampling_layout(t_final, dt, sample_points)
    dim = psi0.size

    if jump_cap is None:
        rate = _initial_rate(psi0, c)
        jump_cap = int(3.0 * rate * t_final + 10.0 * np.sqrt(rate * t_final + 1.0)) + 1000

    parts = _fast_parts(H0, c)
    for _attempt in range(6):
        samples = np.empty((n_samples, dim), dtype=np.complex128)
        sample_nrm2 = np.empty(n_samples, dtype=np.float64)
        jump_times = np.empty(jump_cap, dtype=np.float64)
        rng_state = xoshiro_state(seed)
        if parts is None:
            H0sp = sp.csr_matrix(H0).astype(np.complex128)
            csp = sp.csr_matrix(c).astype(np.complex128)
            A = (-1j * H0sp - 0.5 * (csp.conj().T @ csp)).tocsr()
            n_jumps, status = kernels.traj_generic(
                A, csp, psi0, h, n_steps, steps_per_sample, rng_state,
                samples, sample_nrm2, jump_times,
            )
            path = "generic-numpy"
        else:
            h_real, dc, cd = parts
            # the unshifted dense propagator needs the decay spectrum to
            # sit inside the quartic polynomial's accuracy window
            stiffness = float(np.abs(dc.real).max()) * h
            if dim <= DENSE_THRESHOLD and stiffness <= 0.75:
                A = (-1j) * h_real.toarray().astype(np.complex128)
                A[np.diag_indices(dim)] += dc
                R = _taylor4_matrix(A, h)
                n_jumps, status = kernels.traj_dense(
                    R, A, cd, psi0, h, n_steps, steps_per_sample, rng_state,
                    samples, sample_nrm2, jump_times,
                )
                path = f"dense-{kernels.BACKEND_NAME}"
            else:
                n_jumps, status = kernels.traj_csr(
                    h_real.indptr, h_real.indices, h_real.data.astype(np.float64),
                    dc, cd, psi0, h, n_steps, steps_per_sample, rng_state,
                    samples, sample_nrm2, jump_times,
                )
                path = f"csr-{kernels.BACKEND_NAME}"
        if status == 0:
            break
        if status == 1:
            jump_cap *= 4
            continue
        raise IntegrationError(
            "norm underflow during trajectory propagation; dt too large or "
            "pathological jump operator"
        )
    else:
        raise IntegrationError("detection buffer kept overflowing")

    record = DetectionRecord(jump_times[:n_jumps].copy(), t_final)
    times = np.linspace(0.0, t_final, n_samples)
    return TrajectoryResult(record, times, samples, sample_nrm2, seed, path)


#: a trajectory counts as consistent with the target subspace while its
#: in-subspace weight exceeds this; a weight below it means a switch is
#: underway (the conditioned description keeps virtual excursions only,
#: which stay within O(K/lambda^2) of unity)
CONSISTENT_THRESHOLD = 0.9


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean_abs2: np.ndarray  # (n_samples, dim) averaged |psi_i|^2
    jump_counts: np.ndarray
    n_traj: int
    base_seed: int
    rho_times: np.ndarray | None = None
    mean_rho: np.ndarray | None = None  # (n_rho, dim, dim)
    records: list[DetectionRecord] | None = None
    cond_mean_abs2: np.ndarray | None = None  # filtered + renormalized in-subspace
    cond_fraction: np.ndarray | None = None  # surviving-trajectory fraction

    def subspace_populations(self, subspaces: list[ZenoSubspace]) -> np.ndarray:
        return np.stack(
            [self.mean_abs2[:, s.indices].sum(axis=1) for s in subspaces], axis=1
        )


def run_ensemble(
    psi0: np.ndarray,
    H0,
    c,
    t_final: float,
    dt: float,
    n_traj: int,
    base_seed: int,
    sample_points: int = 201,
    rho_snapshots: int = 11,
    threads: int = 1,
    keep_records: bool = False,
    condition_on: np.ndarray | None = None,
) -> EnsembleResult:
    """Trajectory ensemble with deterministic seed splitting.

    Trajectory i runs on the stream stream_seed(base_seed, i); reductions
    are accumulated in trajectory order, so results do not depend on the
    thread count.  The averaged density matrix is kept at `rho_snapshots`
    evenly spaced sample times when the dimension allows it.

    condition_on takes the basis indices of one measurement eigenspace and
    additionally averages the in-subspace renormalized populations over the
    trajectories still consistent with it.  Consistency is monotone: once a
    trajectory's in-subspace weight drops below CONSISTENT_THRESHOLD it has
    switched (the detection rate visibly changed) and is excluded from
    every later sample, even if it wanders back.  The surviving fraction
    estimates the squared norm of the matching non-Hermitian evolution.
    """
    if n_traj < 1:
        raise ValidationError("n_traj", "must be >= 1")
    dim = np.asarray(psi0).size
    want_rho = dim <= RHO_AVERAGE_CAP and rho_snapshots > 0

    def run_one(i: int) -> TrajectoryResult:
        return run_trajectory(
            psi0, H0, c, t_final, dt, stream_seed(base_seed, i), sample_points
        )

    first: TrajectoryResult | None = None
    mean_abs2 = None
    rho_idx = None
    rho_sum = None
    cond_sum = None
    cond_weight = None
    cond_count = None
    counts = np.empty(n_traj, dtype=np.int64)
    records: list[DetectionRecord] = []

    def accumulate(i: int, res: TrajectoryResult):
        nonlocal first, mean_abs2, rho_idx, rho_sum, cond_sum, cond_weight, cond_count
        if first is None:
            first = res
            n_samples = res.times.size
            mean_abs2 = np.zeros((n_samples, dim))
            if want_rho:
                k = min(rho_snapshots, n_samples)
                rho_idx = np.unique(np.linspace(0, n_samples - 1, k).astype(int))
                rho_sum = np.zeros((rho_idx.size, dim, dim), dtype=np.complex128)
            if condition_on is not None:
                cond_sum = np.zeros((n_samples, dim))
                cond_weight = np.zeros(n_samples)
                cond_count = np.zeros(n_samples)
        abs2 = np.abs(res.states) ** 2
        mean_abs2 += abs2
        if want_rho:
            for out, s in zip(rho_sum, res.states[rho_idx]):
                out += np.outer(s, s.conj())
        if condition_on is not None:
            weight = abs2[:, condition_on].sum(axis=1)
            ok = np.logical_and.accumulate(weight > CONSISTENT_THRESHOLD)
            # normalized conditioned block average: accumulate raw weight
            # and populations, divide once at the end (ratio of means)
            cond_sum[ok] += abs2[ok]
            cond_weight[ok] += weight[ok]
            cond_count += ok
        counts[i] = res.record.count
        if keep_records:
            records.append(res.record)

    if threads <= 1:
        for i in range(n_traj):
            accumulate(i, run_one(i))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for i, res in enumerate(pool.map(run_one, range(n_traj))):
                accumulate(i, res)

    mean_abs2 /= n_traj
    cond_mean = None
    cond_frac = None
    if condition_on is not None:
        safe = np.maximum(cond_weight, 1e-300)
        cond_mean = cond_sum / safe[:, None]
        cond_frac = cond_count / n_traj
    return EnsembleResult(
        times=first.times,
        mean_abs2=mean_abs2,
        jump_counts=counts,
        n_traj=n_traj,
        base_seed=base_seed,
        rho_times=first.times[rho_idx] if want_rho else None,
        mean_rho=rho_sum / n_traj if want_rho else None,
        records=records if keep_records else None,
        cond_mean_abs2=cond_mean,
        cond_fraction=cond_frac,
    )


@dataclass
class ObservableSeries:
    """CSV-ready named columns on the sample grid."""

    times: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)

    def names(self) -> list[str]:
        return list(self.columns)


def observables_series(
    states: np.ndarray,
    times: np.ndarray,
    basis: fs.FockBasis,
    meas: MeasurementConfig | None = None,
    subspaces: list[ZenoSubspace] | None = None,
    momentum: bool = True,
) -> ObservableSeries:
    """Measured-operator fluctuations, local density variance, n_k, populations.

    fluct_c is <D^dag D> - |<D>|^2 scaled by 2 kappa |C|^2 so it carries the
    units of the jump operator.  The momentum panel needs a periodic lattice.
    """
    states = np.atleast_2d(states)
    abs2 = np.abs(states) ** 2
    occ = basis.occupations.astype(np.float64)
    out = ObservableSeries(times=np.asarray(times))

    if meas is not None:
        d = measurement_diagonal(meas, basis)
        mean_d = abs2 @ d
        mean_dd = abs2 @ (np.abs(d) ** 2)
        out.columns["fluct_c"] = (
            2.0 * meas.kappa * abs(meas.C) ** 2 * (mean_dd - np.abs(mean_d) ** 2)
        )

    mean_n = abs2 @ occ
    mean_n2 = abs2 @ occ**2
    out.columns["local_density_variance"] = (mean_n2 - mean_n**2).mean(axis=1)

    if momentum:
        if basis.config.boundary != "periodic":
            raise ValidationError("boundary", "momentum distribution needs a periodic lattice")
        m_idx, ks = fs.momentum_grid(basis.config)
        nk = _momentum_distribution(states, abs2, basis, ks)
        for col, m in enumerate(m_idx):
            out.columns[f"n_k_m{m}"] = nk[:, col]

    if subspaces is not None:
        for s_i, sub in enumerate(subspaces):
            out.columns[f"pop_sub_{s_i}"] = abs2[:, sub.indices].sum(axis=1)
    return out


def _momentum_distribution(states, abs2, basis, ks) -> np.ndarray:
    """n_k per sample via the one-body matrix G_jl = <b^dag_j b_l>."""
    M = basis.config.sites
    a = basis.config.lattice_spacing
    nt = states.shape[0]
    G = np.zeros((nt, M, M), dtype=np.complex128)
    occ_mean = abs2 @ basis.occupations.astype(np.float64)
    for j in range(M):
        G[:, j, j] = occ_mean[:, j]
    for (j, l), op in fs.single_particle_hops(basis).items():
        series = np.einsum("ti,it->t", states.conj(), op @ states.T)
        G[:, j, l] = series
        G[:, l, j] = series.conj()
    nk = np.empty((nt, ks.size))
    for col, k in enumerate(ks):
        v = np.exp(1j * k * a * np.arange(M))
        nk[:, col] = np.einsum("j,tjl,l->t", v.conj(), G, v).real / M
    return nk
