"""Physical operators: Bose-Hubbard Hamiltonian, measurement, Zeno subspaces.

The measured quantity is a weighted atom-number sum D = sum_i A_i n_i with
complex illumination amplitudes A_i.  The quantum jump operator applied at
each photodetection is c = sqrt(2 kappa) C D, diagonal in the Fock basis.
The effective measurement strength is gamma = kappa |C|^2 and the weak-Zeno
regime requires gamma/J >> 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fockspace as fs
from .exceptions import ValidationError

#: measurement eigenvalues closer than this are one Zeno subspace
EIGENVALUE_DEDUP_TOL = 1e-9

#: K/lambda^2 above this triggers a Zeno-validity warning
ZENO_RATIO_WARN = 0.1


@dataclass(frozen=True)
class BhmParams:
    """Tunnelling J, on-site interaction U, and the lattice they act on."""

    J: float
    U: float
    lattice: fs.LatticeConfig

    def __post_init__(self):
        if self.J < 0:
            raise ValidationError("J", f"must be >= 0, got {self.J}")


@dataclass(frozen=True)
class MeasurementConfig:
    """Cavity-mediated global density measurement.

    kappa is the cavity relaxation rate, C the Rayleigh scattering
    coefficient, pattern the per-site illumination amplitudes A_i, and
    n0_k the measurement eigenvalue of the targeted Zeno subspace.
    """

    kappa: float
    C: complex
    pattern: tuple
    n0_k: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValidationError("kappa", f"must be > 0, got {self.kappa}")
        object.__setattr__(self, "pattern", tuple(complex(a) for a in self.pattern))

    @property
    def gamma(self) -> float:
        """kappa |C|^2, recomputed on access."""
        return self.kappa * abs(self.C) ** 2

    @property
    def c0(self) -> complex:
        """Jump-operator eigenvalue of the targeted subspace."""
        return np.sqrt(2.0 * self.kappa) * self.C * self.n0_k

    def pattern_array(self) -> np.ndarray:
        return np.asarray(self.pattern, dtype=np.complex128)


@dataclass(frozen=True)
class ScaleEstimate:
    """Hamiltonian scale K, measurement scale lambda, and their ratio."""

    K: float
    lam: float

    @property
    def ratio(self) -> float:
        """K / lambda^2, the small parameter of the weak-Zeno expansion."""
        if self.K == 0.0:
            return 0.0
        return self.K / self.lam**2


@dataclass
class ZenoSubspace:
    """One degenerate eigenspace of the measured operator."""

    eigenvalue: complex
    indices: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.dim = int(self.indices.size)

    def projector(self, total_dim: int) -> sp.csr_matrix:
        diag = np.zeros(total_dim)
        diag[self.indices] = 1.0
        return sp.diags(diag, format="csr")


def named_pattern(name: str, sites: int) -> np.ndarray:
    """Resolve a named illumination pattern to per-site amplitudes.

    "middle_site" lights the central site (odd M only), "even_sites" every
    second site counting from 1 (sites 2, 4, ...), "all_sites" everything.
    """
    if name == "middle_site":
        if sites % 2 == 0:
            raise ValidationError("pattern", "middle_site needs an odd number of sites")
        out = np.zeros(sites, dtype=np.complex128)
        out[sites // 2] = 1.0
        return out
    if name == "even_sites":
        out = np.zeros(sites, dtype=np.complex128)
        out[1::2] = 1.0
        return out
    if name == "all_sites":
        return np.ones(sites, dtype=np.complex128)
    raise ValidationError("pattern", f"unknown named pattern {name!r}")


def build_hamiltonian(params: BhmParams, basis: fs.FockBasis) -> sp.csr_matrix:
    """H0 = -J sum_<i,j> b^dag_i b_j + (U/2) sum_i n_i (n_i - 1)."""
    if basis.config != params.lattice:
        raise ValidationError("basis", "basis was built for a different lattice")
    occ = basis.occupations
    diag = 0.5 * params.U * np.sum(occ * (occ - 1), axis=1).astype(np.float64)
    H = sp.diags(diag, format="csr")
    if params.J != 0.0 and basis.config.sites > 1:
        H = H - params.J * fs.kinetic_op(basis)
    H = H.tocsr()
    fs.assert_hermitian(H)
    return H


def measurement_diagonal(meas: MeasurementConfig, basis: fs.FockBasis) -> np.ndarray:
    """Eigenvalues of D = sum_i A_i n_i per basis state."""
    A = meas.pattern_array()
    if A.shape != (basis.config.sites,):
        raise ValidationError(
            "pattern", f"expected length {basis.config.sites}, got {A.shape}"
        )
    return basis.occupations @ A


def build_jump_operator(meas: MeasurementConfig, basis: fs.FockBasis) -> sp.csr_matrix:
    """c = sqrt(2 kappa) C D, diagonal because D couples to density only."""
    diag = np.sqrt(2.0 * meas.kappa) * meas.C * measurement_diagonal(meas, basis)
    return sp.diags(diag, format="csr")


def enumerate_zeno_subspaces(
    meas: MeasurementConfig, basis: fs.FockBasis
) -> list[ZenoSubspace]:
    """Partition of basis indices by D eigenvalue.

    Eigenvalues within EIGENVALUE_DEDUP_TOL are merged; subspaces are
    returned ordered by (Re, Im) of the eigenvalue.  Projectors are diagonal
    0/1 matrices and sum to the identity by construction.
    """
    d = measurement_diagonal(meas, basis)
    order = np.lexsort((d.imag, d.real))
    subspaces = []
    current = [order[0]]
    for idx in order[1:]:
        if abs(d[idx] - d[current[0]]) <= EIGENVALUE_DEDUP_TOL:
            current.append(idx)
        else:
            subspaces.append(_make_subspace(d, current))
            current = [idx]
    subspaces.append(_make_subspace(d, current))
    return subspaces


def _make_subspace(diag, members) -> ZenoSubspace:
    # representative value, not the mean: members agree to the dedup
    # tolerance and exact spectra must stay exact
    members = np.sort(np.asarray(members))
    val = diag[members[0]]
    if abs(val.imag) < 1e-14:
        val = val.real
    return ZenoSubspace(eigenvalue=val, indices=members)


def subspace_of_state(subspaces: list[ZenoSubspace], index: int) -> int:
    for m, sub in enumerate(subspaces):
        if index in sub.indices:
            return m
    raise ValueError(f"basis index {index} not in any subspace")


def jump_eigenvalues(meas: MeasurementConfig, subspaces: list[ZenoSubspace]) -> np.ndarray:
    """Jump-operator eigenvalue c_m = sqrt(2 kappa) C o_m per subspace."""
    o = np.array([s.eigenvalue for s in subspaces], dtype=np.complex128)
    return np.sqrt(2.0 * meas.kappa) * meas.C * o


def estimate_scales(
    params: BhmParams, meas: MeasurementConfig, subspace: ZenoSubspace | None = None
) -> ScaleEstimate:
    """Scale bookkeeping with the convention K = J, lambda^2 = gamma.

    This makes gamma/J the controlling small parameter; the choice is
    recorded here rather than asserted as physics.  Emits a warning when
    K/lambda^2 > 0.1 since the weak-Zeno treatment assumes lambda^2 >> K.
    """
    if subspace is not None and subspace.dim == 0:
        raise ValidationError("subspace", "empty subspace")
    est = ScaleEstimate(K=params.J, lam=float(np.sqrt(meas.gamma)))
    if est.ratio > ZENO_RATIO_WARN:
        warnings.warn(
            f"K/lambda^2 = {est.ratio:.3g} > {ZENO_RATIO_WARN}; "
            "outside the weak-Zeno validity regime",
            stacklevel=2,
        )
    return est
