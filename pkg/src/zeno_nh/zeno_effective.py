"""Deterministic non-Hermitian dynamics in the weak quantum Zeno regime.

The conditioned state between detections evolves under
H_eff = H0 + i (c0* c - |c0|^2/2 - c^dag c / 2), whose anti-Hermitian part
only removes norm.  For density measurement this reduces to
H0 - i gamma (D - N0)^2 plus a real energy shift that vanishes for real
illumination patterns.  Projecting onto one measurement eigenspace and
keeping two-hop excursions through the neighbouring eigenspaces gives the
Raman-style generator
P [H0 - i (J^2/gamma) sum b^dag_i b_j b^dag_k b_l] P over boundary hops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fockspace as fs
from .exceptions import (
    DegenerateSpecError,
    IntegrationError,
    ValidationError,
)
from .kernels import nonherm_csr, nonherm_dense
from .model import BhmParams, MeasurementConfig, ZenoSubspace, measurement_diagonal

#: dimensions at or below this use a precomputed dense step matrix
DENSE_THRESHOLD = 512

#: dense eigendecomposition cap
DENSE_EIG_CAP = 4000


@dataclass
class EffectiveHamiltonian:
    """Non-Hermitian generator with optional split form for the fast kernels.

    h_real/diag, when present, satisfy matrix = h_real + diag(1j * ...) with
    h_real real symmetric; the propagators then run the real-CSR kernels.
    """

    matrix: sp.csr_matrix
    c0: complex | None
    form: str  # "general" | "density" | "projected_raman"
    h_real: sp.csr_matrix | None = None
    diag: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def drift_diag(self) -> np.ndarray | None:
        """Complex diagonal dc of the drift -i H_eff = -i h_real + dc."""
        if self.diag is None:
            return None
        return -1j * self.diag


def build_effective_hamiltonian(H0, c, c0: complex) -> EffectiveHamiltonian:
    """Assemble H_eff = H0 + i (c0* c - |c0|^2/2 - c^dag c / 2).

    c0 must sit in the spectrum of c.  For a diagonal jump operator the
    imaginary diagonal reduces exactly to -|c_j - c0|^2 / 2 (the squared
    measured-quantity deviation); the two assembly routes are compared at
    build time as an internal consistency check.
    """
    H0 = sp.csr_matrix(H0)
    c = sp.csr_matrix(c)
    dim = H0.shape[0]
    cd = _diag_or_none(c)
    if cd is None:
        raise ValidationError("c", "jump operator must be diagonal in the Fock basis")
    scale = 1.0 + float(np.abs(cd).max())
    if np.abs(cd - c0).min() > 1e-9 * scale:
        raise ValidationError("c0", f"{c0} is not an eigenvalue of the jump operator")

    g = np.conj(c0) * cd - 0.5 * abs(c0) ** 2 - 0.5 * np.abs(cd) ** 2
    # split route: real shift plus pure decay -|c_j - c0|^2 / 2
    shift = -np.imag(np.conj(c0) * cd)
    decay = -0.5 * np.abs(cd - c0) ** 2
    split = shift + 1j * decay
    if np.abs(1j * g - split).max() > 1e-12 * scale**2:
        raise AssertionError("effective-Hamiltonian assembly mismatch")

    diag_term = 1j * g
    matrix = (H0 + sp.diags(diag_term)).tocsr()
    h_real = sp.csr_matrix(H0.real) if _is_real(H0) else None
    form = "density" if np.abs(shift).max() <= 1e-12 * scale**2 else "general"
    return EffectiveHamiltonian(
        matrix=matrix, c0=complex(c0), form=form, h_real=h_real,
        diag=diag_term if h_real is not None else None,
    )


def _diag_or_none(c: sp.spmatrix) -> np.ndarray | None:
    off = c - sp.diags(c.diagonal())
    if off.nnz and np.abs(off.data).max() > 0:
        return None
    return c.diagonal().astype(np.complex128)


def _is_real(op: sp.spmatrix) -> bool:
    if not np.iscomplexobj(op.data):
        return True
    return op.nnz == 0 or float(np.abs(op.data.imag).max()) == 0.0


def verify_no_gain(heff: EffectiveHamiltonian, tol: float = 1e-9) -> float:
    """Largest eigenvalue of the anti-Hermitian part -i(H - H^dag)/2.

    Must be <= tol: measurement only removes norm.
    """
    if heff.diag is not None:
        top = float(heff.diag.imag.max())
    else:
        mat = heff.matrix
        if mat.shape[0] > DENSE_EIG_CAP:
            raise ValidationError("dim", "no-gain check needs a dense eigensolve")
        G = (mat - mat.conj().T).toarray() / 2j
        top = float(np.linalg.eigvalsh(G).max())
    if top > tol:
        raise ValidationError("gain", f"anti-Hermitian part has eigenvalue {top:.3e} > 0")
    return top


def boundary_hops(params: BhmParams, meas: MeasurementConfig) -> list[tuple[int, int]]:
    """Nearest-neighbour hops (i, j) that change the measured eigenvalue."""
    A = meas.pattern_array()
    out = []
    for i, j in fs.neighbour_pairs(params.lattice):
        if abs(A[i] - A[j]) > 1e-12:
            out.append((i, j))
    return out


def build_projected_raman_hamiltonian(
    params: BhmParams,
    meas: MeasurementConfig,
    basis: fs.FockBasis,
    subspaces: list[ZenoSubspace],
    target: int,
) -> EffectiveHamiltonian:
    """Second-order generator inside one measurement eigenspace.

    The quartic sum runs over ordered pairs of boundary hops; compositions
    that do not return to the target eigenspace are removed by the
    projector sandwich.
    """
    from .model import build_hamiltonian

    if not 0 <= target < len(subspaces):
        raise ValidationError("target", f"no subspace with index {target}")
    if meas.gamma <= 0:
        raise ValidationError("gamma", "projected generator needs gamma > 0")
    P = subspaces[target].projector(basis.dim)
    H0 = build_hamiltonian(params, basis)
    hops = boundary_hops(params, meas)
    B = sp.csr_matrix((basis.dim, basis.dim))
    for i, j in hops:
        B = B + params.J * fs.hop_op(basis, i, j)
    quartic = P @ (B @ B) @ P
    matrix = (P @ H0 @ P - 1j / meas.gamma * quartic).tocsr()
    return EffectiveHamiltonian(matrix=matrix, c0=meas.c0, form="projected_raman")


@dataclass
class NonHermitianResult:
    times: np.ndarray
    states: np.ndarray  # (n_samples, dim), unit norm
    log_norms: np.ndarray  # log ||psi_raw(t)||

    @property
    def norms(self) -> np.ndarray:
        return np.exp(self.log_norms)

    def populations(self, indices) -> np.ndarray:
        return np.abs(self.states[:, indices]) ** 2

    def raw_states(self) -> np.ndarray:
        return self.states * np.exp(self.log_norms)[:, None]


def _taylor4_matrix(A: np.ndarray, h: float) -> np.ndarray:
    dim = A.shape[0]
    R = np.eye(dim, dtype=np.complex128)
    term = np.eye(dim, dtype=np.complex128)
    for p in range(1, 5):
        term = (h / p) * (A @ term)
        R = R + term
    return R


def _sampling_layout(t_final, dt, sample_points):
    n_samples = max(2, int(sample_points))
    sample_dt = t_final / (n_samples - 1)
    steps_per_sample = max(1, int(np.ceil(sample_dt / dt - 1e-12)))
    h = sample_dt / steps_per_sample
    n_steps = steps_per_sample * (n_samples - 1)
    return n_samples, steps_per_sample, h, n_steps


def evolve_nonhermitian(
    psi0: np.ndarray,
    heff: EffectiveHamiltonian,
    t_final: float,
    dt: float,
    sample_points: int = 201,
    renormalize: bool = True,
) -> NonHermitianResult:
    """Propagate d psi/dt = -i H_eff psi with fixed-step RK4.

    States are renormalized at the sample points; the raw norm decay is
    kept as log_norms.  With renormalize=False the returned states carry
    the decayed norm back in (underflowing to zero where exp does).
    """
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValidationError("psi0", "initial state must be normalized")
    n_samples, steps_per_sample, h, n_steps = _sampling_layout(t_final, dt, sample_points)
    dim = heff.dim
    samples = np.empty((n_samples, dim), dtype=np.complex128)
    lognorm = np.empty(n_samples, dtype=np.float64)

    stiff = False
    if heff.h_real is not None:
        stiff = float(np.abs(heff.drift_diag().real).max()) * h > 0.75
    if heff.h_real is not None and (dim > DENSE_THRESHOLD or stiff):
        hs = heff.h_real.tocsr()
        status = nonherm_csr(
            hs.indptr, hs.indices, hs.data.astype(np.float64), heff.drift_diag(),
            psi0, h, n_steps, steps_per_sample, samples, lognorm,
        )
    else:
        if dim > DENSE_EIG_CAP and heff.h_real is None:
            raise ValidationError("dim", f"general dense propagation capped at {DENSE_EIG_CAP}")
        A = -1j * heff.matrix.toarray()
        R = _taylor4_matrix(A, h)
        status = nonherm_dense(R, psi0, n_steps, steps_per_sample, samples, lognorm)
    if status == 2:
        raise IntegrationError("norm underflow during non-Hermitian propagation")
    times = np.linspace(0.0, t_final, n_samples)
    result = NonHermitianResult(times=times, states=samples, log_norms=lognorm)
    if not renormalize:
        result = NonHermitianResult(times, result.raw_states(), lognorm)
    return result


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray  # sorted by |Im| ascending
    eigenvectors: np.ndarray  # columns aligned with eigenvalues
    residual: float

    def slow_count(self, im_cutoff: float) -> int:
        return int(np.sum(np.abs(self.eigenvalues.imag) <= im_cutoff))


def spectrum(heff: EffectiveHamiltonian, dense_cap: int = DENSE_EIG_CAP) -> SpectrumResult:
    """Complete dense eigendecomposition of H_eff."""
    dim = heff.dim
    if dim > dense_cap:
        raise ValidationError("dim", f"dimension {dim} above dense cap {dense_cap}")
    mat = heff.matrix.toarray()
    try:
        vals, vecs = np.linalg.eig(mat)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - library failure
        raise IntegrationError(f"eigendecomposition failed: {exc}") from exc
    order = np.lexsort((vals.real, np.abs(vals.imag)))
    vals = vals[order]
    vecs = vecs[:, order]
    scale = max(np.linalg.norm(mat), 1e-300)
    residual = max(
        float(np.linalg.norm(mat @ vecs[:, i] - vals[i] * vecs[:, i]))
        for i in range(dim)
    )
    if residual > 1e-8 * scale:
        raise IntegrationError(f"eigenpair residual {residual:.3e} exceeds 1e-8 * ||H||")
    return SpectrumResult(vals, vecs, residual)


# three-site closed form: slow eigenvectors over {|2,1,0>, |1,1,1>, |0,1,2>}
THREE_SITE_V1 = np.array([1.0, -np.sqrt(2.0), 1.0]) / 2.0
THREE_SITE_V2 = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
THREE_SITE_V3 = np.array([1.0, np.sqrt(2.0), 1.0]) / 2.0


@dataclass(frozen=True)
class ThreeSiteAnalytic:
    """Closed-form conditioned evolution for three atoms on three sites.

    Valid for U = 0 with only the middle site measured and one atom on it;
    the component along v1 persists while v2 and v3 decay at 6 J^2/gamma
    and 12 J^2/gamma relative to it.
    """

    J: float
    gamma: float

    @property
    def rates(self) -> tuple[float, float, float]:
        r = self.J**2 / self.gamma
        return (0.0, 6.0 * r, 12.0 * r)

    def overlaps(self, psi0: np.ndarray) -> np.ndarray:
        psi0 = np.asarray(psi0, dtype=np.complex128)
        return np.array(
            [
                np.vdot(THREE_SITE_V1, psi0),
                np.vdot(THREE_SITE_V2, psi0),
                np.vdot(THREE_SITE_V3, psi0),
            ]
        )

    def amplitudes(self, psi0: np.ndarray, t) -> np.ndarray:
        """Normalized 3-vector amplitudes at time(s) t."""
        z1, z2, z3 = self.overlaps(psi0)
        if np.all(np.abs([z1, z2, z3]) < 1e-15):
            raise DegenerateSpecError("initial state has no overlap with the slow triple")
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        e2 = np.exp(-self.rates[1] * t)
        e3 = np.exp(-self.rates[2] * t)
        out = np.empty((t.size, 3), dtype=np.complex128)
        out[:, 0] = z1 + np.sqrt(2.0) * z2 * e2 + z3 * e3
        out[:, 1] = -np.sqrt(2.0) * (z1 - z3 * e3)
        out[:, 2] = z1 - np.sqrt(2.0) * z2 * e2 + z3 * e3
        nrm = np.linalg.norm(out, axis=1)
        if np.any(nrm < 1e-300):
            raise DegenerateSpecError("analytic amplitudes vanished")
        return out / nrm[:, None]


def three_site_analytic(psi0: np.ndarray, J: float, gamma: float, t) -> np.ndarray:
    """Convenience wrapper; see ThreeSiteAnalytic.amplitudes."""
    return ThreeSiteAnalytic(J=J, gamma=gamma).amplitudes(psi0, t)
