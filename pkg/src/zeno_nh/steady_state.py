"""Tunnelling dark states of the measured lattice, built in momentum space.

With every second site illuminated the relevant operators fold into the
reduced Brillouin zone -pi/2a < k <= pi/2a with partner momentum
q = pi/a - k.  Pair constructors alpha^dag_k = b^dag_k b^dag_q -
b^dag_{-k} b^dag_{-q} and the single-particle beta^dag_s =
b^dag_{pi/2a} + s b^dag_{-pi/2a} commute with the hopping sum and ladder
the staggered population imbalance, so products of them build N-particle
states that are simultaneously tunnelling-dark and measurement
eigenstates: steady states even with the measurement off.

The imbalance operator used for eigenvalue bookkeeping is the staggered
sum DeltaN = sum_j (-1)^j n_j (0-based sites), which is exactly the folded
momentum-space form; it relates to the illuminated-site count through
DeltaN = -2 (N_even - N/2), the factor the identity checker documents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fockspace as fs
from .exceptions import (
    DegenerateSpecError,
    UnsupportedLatticeError,
    ValidationError,
)
from .model import BhmParams, MeasurementConfig, build_hamiltonian, build_jump_operator

#: documented global factors: real-space side = factor * momentum-space side
KINETIC_IDENTITY_FACTOR = 2.0
DELTA_N_IDENTITY_FACTOR = -0.5


@dataclass
class SteadyStateSpec:
    """Recipe for one dark state: lattice, imbalance, pair amplitudes.

    coefficients is either None (uniform) or one complex vector per pair
    index over the momenta 0 < k <= pi/2a in ascending order.
    """

    lattice: fs.LatticeConfig
    delta_n: int
    coefficients: list | None = None

    def __post_init__(self):
        if self.lattice.boundary != "periodic":
            raise UnsupportedLatticeError("dark-state construction needs periodic boundary")
        if self.lattice.sites % 2:
            raise UnsupportedLatticeError("dark-state construction needs even M")
        N = self.lattice.atoms
        if abs(self.delta_n) > N:
            raise ValidationError("delta_n", f"|delta_n| = {abs(self.delta_n)} exceeds N = {N}")
        if (N - abs(self.delta_n)) % 2:
            raise ValidationError(
                "delta_n", "N - |delta_n| must be even (pair construction)"
            )
        if self.delta_n != 0 and self.lattice.sites % 4:
            raise UnsupportedLatticeError(
                "beta constructor needs pi/2a on the momentum grid (M divisible by 4)"
            )
        ks = fs.pair_momenta(self.lattice)
        if self.n_pairs > 0 and ks.size == 0:
            raise UnsupportedLatticeError("no pair momenta available on this lattice")
        if self.coefficients is not None:
            if len(self.coefficients) != self.n_pairs:
                raise ValidationError(
                    "coefficients", f"expected {self.n_pairs} vectors, got {len(self.coefficients)}"
                )
            for i, vec in enumerate(self.coefficients):
                arr = np.asarray(vec, dtype=np.complex128)
                if arr.shape != (ks.size,):
                    raise ValidationError(
                        "coefficients", f"vector {i}: expected length {ks.size}"
                    )
                if np.abs(arr).max() == 0:
                    raise ValidationError("coefficients", f"vector {i} is identically zero")

    @property
    def n_pairs(self) -> int:
        return (self.lattice.atoms - abs(self.delta_n)) // 2

    @property
    def sign(self) -> int:
        return 0 if self.delta_n == 0 else int(np.sign(self.delta_n))

    def coefficient_matrix(self) -> np.ndarray:
        ks = fs.pair_momenta(self.lattice)
        if self.coefficients is None:
            return np.ones((self.n_pairs, ks.size), dtype=np.complex128)
        return np.asarray(self.coefficients, dtype=np.complex128)


def alpha_creation_op(lattice: fs.LatticeConfig, n_from: int, k: float) -> sp.csr_matrix:
    """Pair creation b^dag_k b^dag_q - b^dag_{-k} b^dag_{-q}, q = pi/a - k.

    Sector map N -> N+2.  At k = pi/2a the two products coincide mode-wise
    and the literal operator algebra yields (b^dag_k)^2 - (b^dag_{-k})^2.
    """
    a = lattice.lattice_spacing
    q = np.pi / a - k
    basis0 = fs.build_basis(lattice.with_atoms(n_from))
    basis1 = fs.build_basis(lattice.with_atoms(n_from + 1))
    k_w = _fold(k, lattice)
    q_w = _fold(q, lattice)
    first = fs.momentum_creation_op(basis1, k_w) @ fs.momentum_creation_op(basis0, q_w)
    second = fs.momentum_creation_op(basis1, _fold(-k, lattice)) @ fs.momentum_creation_op(
        basis0, _fold(-q, lattice)
    )
    return (first - second).tocsr()


def beta_creation_op(lattice: fs.LatticeConfig, n_from: int, sign: int) -> sp.csr_matrix:
    """Single-particle constructor b^dag_{pi/2a} + sign * b^dag_{-pi/2a}."""
    if lattice.sites % 4:
        raise UnsupportedLatticeError(
            "beta constructor needs pi/2a on the momentum grid (M divisible by 4)"
        )
    if sign not in (-1, 1):
        raise ValidationError("sign", f"must be +1 or -1, got {sign}")
    a = lattice.lattice_spacing
    basis0 = fs.build_basis(lattice.with_atoms(n_from))
    half = np.pi / (2.0 * a)
    return (
        fs.momentum_creation_op(basis0, half)
        + sign * fs.momentum_creation_op(basis0, _fold(-half, lattice))
    ).tocsr()


def _fold(k: float, lattice: fs.LatticeConfig) -> float:
    """Map k to the equivalent grid momentum in (-pi/a, pi/a]."""
    _, ks = fs.momentum_grid(lattice)
    two_pi = 2.0 * np.pi / lattice.lattice_spacing
    k = k - two_pi * np.round(k / two_pi)
    hits = ks[np.abs(np.mod(ks - k + np.pi / lattice.lattice_spacing, two_pi) - np.pi / lattice.lattice_spacing) < 1e-9]
    if hits.size == 0:
        raise ValidationError("momentum", f"k={k} not on the grid")
    return float(hits[0])


def build_steady_state(spec: SteadyStateSpec) -> tuple[np.ndarray, fs.FockBasis]:
    """Apply the beta factors, then the pair factors, normalize once at the end."""
    lattice = spec.lattice
    psi = np.ones(1, dtype=np.complex128)
    n = 0
    for _ in range(abs(spec.delta_n)):
        psi = beta_creation_op(lattice, n, spec.sign) @ psi
        n += 1
    ks = fs.pair_momenta(lattice)
    coeffs = spec.coefficient_matrix()
    for i in range(spec.n_pairs):
        acc = None
        for col, k in enumerate(ks):
            if coeffs[i, col] == 0:
                continue
            term = coeffs[i, col] * (alpha_creation_op(lattice, n, k) @ psi)
            acc = term if acc is None else acc + term
        psi = acc
        n += 2
    basis = fs.build_basis(lattice.with_atoms(lattice.atoms))
    norm = np.linalg.norm(psi)
    if norm < 1e-12:
        raise DegenerateSpecError("coefficient choice cancelled the state to zero norm")
    return psi / norm, basis


def delta_n_op(basis: fs.FockBasis) -> sp.csr_matrix:
    """Staggered imbalance sum_j (-1)^j n_j (0-based), the folded form."""
    weights = (-1.0) ** np.arange(basis.config.sites)
    return fs.weighted_number_op(basis, weights)


def illuminated_number_op(basis: fs.FockBasis) -> sp.csr_matrix:
    """N_even for the every-second-site pattern (1-based sites 2, 4, ...)."""
    weights = np.zeros(basis.config.sites)
    weights[1::2] = 1.0
    return fs.weighted_number_op(basis, weights)


def _mode_hop_op(basis: fs.FockBasis, k_row: float, k_col: float) -> sp.csr_matrix:
    """b^dag_{k_row} b_{k_col} expanded over real-space hops (number conserving)."""
    M = basis.config.sites
    a = basis.config.lattice_spacing
    total = None
    for j in range(M):
        for l in range(M):
            phase = np.exp(-1j * k_row * j * a) * np.exp(1j * k_col * l * a) / M
            if j == l:
                term = phase * fs.number_op(basis, j).astype(np.complex128)
            else:
                term = phase * fs.hop_op(basis, j, l)
            total = term if total is None else total + term
    return total.tocsr()


def kinetic_momentum_form(basis: fs.FockBasis) -> sp.csr_matrix:
    """sum_RBZ [n_k - n_q] cos(ka), q = pi/a - k, built literally."""
    lattice = basis.config
    a = lattice.lattice_spacing
    total = sp.csr_matrix((basis.dim, basis.dim), dtype=np.complex128)
    for k in fs.rbz_momenta(lattice):
        q = _fold(np.pi / a - k, lattice)
        total = total + np.cos(k * a) * (
            fs.momentum_number_op(basis, k) - fs.momentum_number_op(basis, q)
        )
    return total.tocsr()


def delta_n_momentum_form(basis: fs.FockBasis) -> sp.csr_matrix:
    """sum_RBZ [b^dag_k b_{-q} + b^dag_{-q} b_k], -q = k - pi/a, built literally."""
    lattice = basis.config
    a = lattice.lattice_spacing
    total = sp.csr_matrix((basis.dim, basis.dim), dtype=np.complex128)
    for k in fs.rbz_momenta(lattice):
        mq = _fold(k - np.pi / a, lattice)
        total = total + _mode_hop_op(basis, k, mq) + _mode_hop_op(basis, mq, k)
    return total.tocsr()


@dataclass
class IdentityReport:
    kinetic_factor: complex
    kinetic_residual: float
    delta_n_factor: complex
    delta_n_residual: float


def momentum_operator_identities(basis: fs.FockBasis) -> IdentityReport:
    """Compare real-space and folded momentum-space forms of T and DeltaN.

    Solves real = factor * momentum for the scalar factor and reports the
    max elementwise deviation; the documented constants are
    KINETIC_IDENTITY_FACTOR (2) and DELTA_N_IDENTITY_FACTOR (-1/2), the
    latter against N_even - N/2 for the 1-based even-site convention.
    """
    if basis.config.boundary != "periodic" or basis.config.sites % 2:
        raise UnsupportedLatticeError("identities need a periodic lattice with even M")
    t_real = fs.kinetic_op(basis).astype(np.complex128)
    t_mom = kinetic_momentum_form(basis)
    kin_f, kin_r = _solve_factor(t_real, t_mom)

    n = basis.config.atoms
    dn_real = (illuminated_number_op(basis) - 0.5 * n * sp.identity(basis.dim)).tocsr()
    dn_mom = delta_n_momentum_form(basis)
    dn_f, dn_r = _solve_factor(dn_real.astype(np.complex128), dn_mom)
    return IdentityReport(kin_f, kin_r, dn_f, dn_r)


def _solve_factor(real_side: sp.spmatrix, mom_side: sp.spmatrix) -> tuple[complex, float]:
    denom = (mom_side.conj().multiply(mom_side)).sum()
    if abs(denom) < 1e-300:
        return 0.0, float(abs(real_side).max() if real_side.nnz else 0.0)
    factor = complex((mom_side.conj().multiply(real_side)).sum() / denom)
    diff = abs(real_side - factor * mom_side)
    residual = float(diff.max()) if diff.nnz else 0.0
    return factor, residual


@dataclass
class DarkStateReport:
    tunnelling_norm: float
    delta_n_value: float
    delta_n_residual: float
    measured_variance: float
    h0_residual: float
    superfluid_overlap: float
    lindblad_rhs_max: float | None

    def max_residual(self) -> float:
        vals = [
            self.tunnelling_norm,
            self.delta_n_residual,
            self.measured_variance,
            self.h0_residual,
            self.superfluid_overlap,
        ]
        if self.lindblad_rhs_max is not None:
            vals.append(self.lindblad_rhs_max)
        return max(vals)


def verify_dark_state(
    psi: np.ndarray,
    basis: fs.FockBasis,
    params: BhmParams | None = None,
    meas: MeasurementConfig | None = None,
    stationarity_cap: int = 2000,
) -> DarkStateReport:
    """Residuals of every defining property of a constructed steady state.

    The Hamiltonian-eigenstate check assumes U = 0 (tunnelling-dark states
    are not interaction eigenstates).  Stationarity feeds |psi><psi| into
    the master-equation right-hand side when the dimension permits.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    if params is None:
        params = BhmParams(J=1.0, U=0.0, lattice=basis.config)
    if meas is None:
        pattern = np.zeros(basis.config.sites, dtype=np.complex128)
        pattern[1::2] = 1.0
        meas = MeasurementConfig(kappa=1.0, C=1.0, pattern=tuple(pattern))

    t_op = fs.kinetic_op(basis)
    t_norm = float(np.linalg.norm(t_op @ psi))

    dn = delta_n_op(basis)
    dn_psi = dn @ psi
    dn_val = float(np.vdot(psi, dn_psi).real)
    dn_residual = float(np.linalg.norm(dn_psi - dn_val * psi))

    from .model import measurement_diagonal

    d = measurement_diagonal(meas, basis)
    abs2 = np.abs(psi) ** 2
    mean_d = abs2 @ d
    var_d = float((abs2 @ np.abs(d) ** 2 - abs(mean_d) ** 2).real)

    H0 = build_hamiltonian(params, basis)
    h_psi = H0 @ psi
    e0 = float(np.vdot(psi, h_psi).real)
    h0_residual = float(np.linalg.norm(h_psi - e0 * psi))

    sf = fs.superfluid_state(basis)
    sf_overlap = float(abs(np.vdot(sf, psi)))

    lin_max = None
    if basis.dim <= stationarity_cap:
        from .master_eq import BlockDensityMatrix, lindblad_rhs
        from .model import enumerate_zeno_subspaces

        subs = enumerate_zeno_subspaces(meas, basis)
        rho = BlockDensityMatrix.from_state(psi, subs)
        c = build_jump_operator(meas, basis)
        lin_max = float(np.abs(lindblad_rhs(rho, H0, c).mat).max())

    return DarkStateReport(
        tunnelling_norm=t_norm,
        delta_n_value=dn_val,
        delta_n_residual=dn_residual,
        measured_variance=var_d,
        h0_residual=h0_residual,
        superfluid_overlap=sf_overlap,
        lindblad_rhs_max=lin_max,
    )
