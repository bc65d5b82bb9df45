"""Unconditioned master equation in measurement-eigenspace block form.

rho_mn = P_m rho P_n are submatrices keyed by pairs of measurement
eigenvalues.  Diagonal blocks feel no dissipation (decoherence-free);
off-diagonal blocks decay with coefficient
c_m c_n* - (|c_m|^2 + |c_n|^2)/2 and can be adiabatically eliminated when
the measurement dominates the internal dynamics.

Densities stay dense here: block dimensions at desk scale are small and
the integrator is BLAS-bound, so the jit kernels bring nothing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import IntegrationError, SingularEliminationError, ValidationError
from .model import ZenoSubspace

#: trace drift that aborts integration
TRACE_DRIFT_LIMIT = 1e-5

#: trace drift target for a healthy run
TRACE_DRIFT_TARGET = 1e-7


@dataclass
class BlockDensityMatrix:
    """Dense density matrix with its measurement-subspace block structure."""

    mat: np.ndarray
    subspaces: list[ZenoSubspace]
    target: int | None = None
    group_of: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=np.complex128)
        dim = self.mat.shape[0]
        if self.mat.shape != (dim, dim):
            raise ValidationError("mat", f"expected square matrix, got {self.mat.shape}")
        group = np.full(dim, -1, dtype=np.int64)
        for m, sub in enumerate(self.subspaces):
            group[sub.indices] = m
        if np.any(group < 0):
            raise ValidationError("subspaces", "subspaces do not cover the basis")
        self.group_of = group

    @classmethod
    def from_state(cls, psi, subspaces, target=None):
        psi = np.asarray(psi, dtype=np.complex128)
        return cls(np.outer(psi, psi.conj()), subspaces, target)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def n_blocks(self) -> int:
        return len(self.subspaces)

    def block(self, m: int, n: int) -> np.ndarray:
        return self.mat[np.ix_(self.subspaces[m].indices, self.subspaces[n].indices)]

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def populations(self) -> np.ndarray:
        """Tr rho_mm per subspace."""
        diag = np.diag(self.mat).real
        return np.array([diag[s.indices].sum() for s in self.subspaces])

    def block_norm(self, m: int, n: int) -> float:
        return float(np.linalg.norm(self.block(m, n)))

    def copy(self) -> "BlockDensityMatrix":
        return BlockDensityMatrix(self.mat.copy(), self.subspaces, self.target)

    def check(self, psd: bool = True) -> None:
        """Hermiticity to 1e-10, unit trace to 1e-9, optional PSD to -1e-9."""
        herm = np.abs(self.mat - self.mat.conj().T).max()
        if herm > 1e-10:
            raise ValidationError("hermiticity", f"max deviation {herm:.3e}")
        tr = self.trace()
        if abs(tr - 1.0) > 1e-9:
            raise ValidationError("trace", f"trace = {tr!r}")
        if psd:
            lo = np.linalg.eigvalsh(0.5 * (self.mat + self.mat.conj().T)).min()
            if lo < -1e-9:
                raise ValidationError("psd", f"lowest eigenvalue {lo:.3e}")


def _dense(op) -> np.ndarray:
    if sp.issparse(op):
        return op.toarray()
    return np.asarray(op)


def _diagonal_jump(c) -> np.ndarray | None:
    """Diagonal of c when c is diagonal, else None."""
    c = sp.csr_matrix(c) if sp.issparse(c) else sp.csr_matrix(np.asarray(c))
    off = c - sp.diags(c.diagonal())
    if off.nnz and np.abs(off.data).max() > 0:
        return None
    return c.diagonal().astype(np.complex128)


def subspace_jump_values(c, subspaces) -> np.ndarray:
    """Jump eigenvalue c_m per subspace, read off the diagonal of c."""
    cd = _diagonal_jump(c)
    if cd is None:
        raise ValidationError("c", "jump operator is not diagonal in this basis")
    vals = np.empty(len(subspaces), dtype=np.complex128)
    for m, sub in enumerate(subspaces):
        block = cd[sub.indices]
        vals[m] = block[0]
        if np.abs(block - block[0]).max() > 1e-9 * (1.0 + abs(block[0])):
            raise ValidationError("c", f"subspace {m} is not degenerate in c")
    return vals


def dissipative_coefficients(c_values: np.ndarray) -> np.ndarray:
    """Block decay matrix c_m c_n* - (|c_m|^2 + |c_n|^2)/2; zero on the diagonal."""
    absq = np.abs(c_values) ** 2
    return np.outer(c_values, c_values.conj()) - 0.5 * (absq[:, None] + absq[None, :])


class _LindbladRhs:
    """Precomputed right-hand side rho -> drho/dt."""

    def __init__(self, H0, c):
        self.H = _dense(H0).astype(np.complex128)
        cd = _diagonal_jump(c)
        if cd is not None:
            # elementwise dissipator c_i c_j* - (|c_i|^2 + |c_j|^2)/2
            absq = np.abs(cd) ** 2
            self.E = cd[:, None] * cd.conj()[None, :] - 0.5 * (
                absq[:, None] + absq[None, :]
            )
            self.c = None
        else:
            self.E = None
            self.c = _dense(c).astype(np.complex128)
            self.cdc = self.c.conj().T @ self.c

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.H @ rho - rho @ self.H)
        if self.E is not None:
            out += self.E * rho
        else:
            out += self.c @ rho @ self.c.conj().T - 0.5 * (
                self.cdc @ rho + rho @ self.cdc
            )
        return out


def lindblad_rhs(rho: BlockDensityMatrix, H0, c, method: str = "dense") -> BlockDensityMatrix:
    """Time derivative of rho.

    method="dense" evaluates the unblocked equation and is the production
    path; method="blocks" assembles the blockwise form with per-subspace
    eigenvalues in the dissipative coefficient.  The two agree to roundoff
    and cross-check each other in the tests.
    """
    if method == "dense":
        out = _LindbladRhs(H0, c)(rho.mat)
    elif method == "blocks":
        H = _dense(H0).astype(np.complex128)
        comm = H @ rho.mat - rho.mat @ H
        cvals = subspace_jump_values(c, rho.subspaces)
        coeff = dissipative_coefficients(cvals)
        out = -1j * comm
        out += coeff[rho.group_of[:, None], rho.group_of[None, :]] * rho.mat
    else:
        raise ValidationError("method", f"unknown rhs method {method!r}")
    return BlockDensityMatrix(out, rho.subspaces, rho.target)


@dataclass
class LindbladResult:
    times: np.ndarray
    rhos: list[BlockDensityMatrix]
    traces: np.ndarray
    trace_drift: float
    restricted: bool = False

    def populations(self) -> np.ndarray:
        return np.array([r.populations() for r in self.rhos])


def integrate_lindblad(
    rho0: BlockDensityMatrix,
    H0,
    c,
    t_final: float,
    dt: float,
    sample_points: int = 101,
    restrict_to: int | None = None,
    max_rate: float | None = None,
) -> LindbladResult:
    """Fixed-step RK4 integration of the master equation.

    Sampling lands on exact step boundaries; dt is shrunk to divide the
    sample interval.  Trace is conserved by the generator, so drift beyond
    TRACE_DRIFT_LIMIT aborts with advice to reduce dt.

    restrict_to keeps only the blocks consistent with observing subspace
    `restrict_to` (the (0,0), (0,r), (r,0) pattern); the lost weight is not
    renormalized here, so the trace decays and drift checks are skipped.
    """
    if max_rate is not None and dt > 0.05 / max_rate:
        raise ValidationError("dt", f"dt={dt} exceeds stability heuristic 0.05/{max_rate}")
    rhs = _LindbladRhs(H0, c)
    n_samples = max(2, sample_points)
    sample_dt = t_final / (n_samples - 1)
    steps_per_sample = max(1, int(np.ceil(sample_dt / dt - 1e-12)))
    h = sample_dt / steps_per_sample

    mask = None
    if restrict_to is not None:
        keep = rho0.group_of == restrict_to
        mask = (keep[:, None] | keep[None, :]).astype(np.float64)

    rho = rho0.mat.copy()
    if mask is not None:
        rho = rho * mask
    times = np.linspace(0.0, t_final, n_samples)
    rhos = [BlockDensityMatrix(rho.copy(), rho0.subspaces, rho0.target)]
    traces = [float(np.trace(rho).real)]

    for _ in range(n_samples - 1):
        for _ in range(steps_per_sample):
            k1 = rhs(rho)
            k2 = rhs(rho + 0.5 * h * k1)
            k3 = rhs(rho + 0.5 * h * k2)
            k4 = rhs(rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if mask is not None:
                rho = rho * mask
        rhos.append(BlockDensityMatrix(rho.copy(), rho0.subspaces, rho0.target))
        traces.append(float(np.trace(rho).real))

    traces = np.asarray(traces)
    drift = float(np.abs(traces - traces[0]).max())
    if restrict_to is None:
        if drift > TRACE_DRIFT_LIMIT:
            raise IntegrationError(
                f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_LIMIT}; reduce dt"
            )
        if drift > TRACE_DRIFT_TARGET:
            warnings.warn(f"trace drift {drift:.3e} above target {TRACE_DRIFT_TARGET}")
    return LindbladResult(times, rhos, traces, drift, restricted=restrict_to is not None)


def adiabatic_eliminate(rho: BlockDensityMatrix, H0, c) -> BlockDensityMatrix:
    """Coherence blocks from the diagonal blocks, one substitution deep.

    rho_mn = i P_m [H0, rho_diag] P_n / (c_m c_n* - (|c_m|^2 + |c_n|^2)/2)
    for m != n, seeded with the diagonal blocks of `rho` (first order in
    the Hamiltonian-to-measurement ratio).
    """
    cvals = subspace_jump_values(c, rho.subspaces)
    coeff = dissipative_coefficients(cvals)
    scale = max(1.0, float(np.abs(cvals).max()) ** 2)

    diag = np.zeros_like(rho.mat)
    same = rho.group_of[:, None] == rho.group_of[None, :]
    diag[same] = rho.mat[same]

    H = _dense(H0).astype(np.complex128)
    comm = H @ diag - diag @ H

    out = diag.copy()
    n = len(rho.subspaces)
    for m in range(n):
        for nn in range(n):
            if m == nn:
                continue
            denom = coeff[m, nn]
            if abs(denom) < 1e-14 * scale:
                raise SingularEliminationError((m, nn))
            idx = np.ix_(rho.subspaces[m].indices, rho.subspaces[nn].indices)
            out[idx] = 1j * comm[idx] / denom
    return BlockDensityMatrix(out, rho.subspaces, rho.target)


@dataclass(frozen=True)
class PurityDecomposition:
    total: float
    zeno_part: float

    @property
    def remainder(self) -> float:
        return self.total - self.zeno_part


def purity(rho: BlockDensityMatrix, target: int | None = None) -> PurityDecomposition:
    """Tr rho^2 split into the observed-subspace part and the rest.

    zeno_part = Tr(rho_00^2 + sum_{m!=0} rho_0m rho_m0) with 0 the target
    subspace; the remainder collects the blocks the conditioned description
    neglects.
    """
    if target is None:
        target = rho.target
    if target is None:
        target = int(np.argmax(rho.populations()))
    total = float(np.vdot(rho.mat, rho.mat).real)  # Tr rho^2 via Frobenius, rho hermitian
    zeno = float(np.vdot(rho.block(target, target), rho.block(target, target)).real)
    for m in range(rho.n_blocks):
        if m == target:
            continue
        b = rho.block(target, m)
        zeno += 2.0 * float(np.vdot(b, b).real)  # rho_m0 = rho_0m^dag
    return PurityDecomposition(total=total, zeno_part=zeno)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """(1/2) ||a - b||_1 for hermitian a, b."""
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())
