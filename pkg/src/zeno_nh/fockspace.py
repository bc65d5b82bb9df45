"""Bosonic Fock space on a 1D lattice and its second-quantized operators.

The number-conserving operators (hops, site densities, momentum densities)
act within one fixed-N sector.  Bare ladder operators map between adjacent
sectors and are only needed for explicit state construction; dynamics never
leaves a sector because the measured quantity commutes with total number.

Basis order is lexicographic descending on occupation vectors, e.g. for
N=2, M=2: (2,0), (1,1), (0,2).  All operators are scipy CSR matrices over
this ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionCapError, UnsupportedLatticeError, ValidationError

DEFAULT_DIMENSION_CAP = 10_000_000

#: tolerance used by hermiticity verification
HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class LatticeConfig:
    """Lattice geometry and particle content.

    Sites are 1-based in user-facing configuration (so "even sites" means
    sites 2, 4, ...) and 0-based everywhere in code.
    """

    sites: int
    atoms: int
    lattice_spacing: float = 1.0
    boundary: str = "periodic"

    def __post_init__(self):
        if self.sites < 1:
            raise ValidationError("sites", f"must be >= 1, got {self.sites}")
        if self.atoms < 0:
            raise ValidationError("atoms", f"must be >= 0, got {self.atoms}")
        if self.lattice_spacing <= 0:
            raise ValidationError(
                "lattice_spacing", f"must be > 0, got {self.lattice_spacing}"
            )
        if self.boundary not in ("periodic", "open"):
            raise ValidationError(
                "boundary", f"must be 'periodic' or 'open', got {self.boundary!r}"
            )

    @property
    def dimension(self) -> int:
        return math.comb(self.atoms + self.sites - 1, self.atoms)

    def with_atoms(self, n: int) -> "LatticeConfig":
        return replace(self, atoms=n)


def momentum_grid(config: LatticeConfig) -> tuple[np.ndarray, np.ndarray]:
    """Allowed momenta k_m = 2*pi*m/(M*a), m in {-floor(M/2)+1, ..., ceil(M/2)}.

    Returns (m_indices, k_values), exactly M of each.  Periodic lattices only.
    """
    if config.boundary != "periodic":
        raise UnsupportedLatticeError("momentum grid requires periodic boundary")
    M = config.sites
    m = np.arange(-(M // 2) + 1, -(M // 2) + 1 + M)
    return m, 2.0 * np.pi * m / (M * config.lattice_spacing)


def rbz_momenta(config: LatticeConfig) -> np.ndarray:
    """Grid momenta in the reduced Brillouin zone -pi/2a < k <= pi/2a.

    The lower edge is excluded: -pi/2a and its partner q = pi/a - k fold
    onto the same pair as +pi/2a.
    """
    _, ks = momentum_grid(config)
    half = np.pi / (2.0 * config.lattice_spacing)
    eps = 1e-12
    return ks[(ks > -half + eps) & (ks <= half + eps)]


def pair_momenta(config: LatticeConfig) -> np.ndarray:
    """Grid momenta with 0 < k <= pi/2a, the independent two-mode pair labels."""
    ks = rbz_momenta(config)
    return ks[ks > 1e-12]


class FockBasis:
    """Enumerated occupation-number basis for one (N, M) sector."""

    def __init__(self, config: LatticeConfig, states: list[tuple[int, ...]]):
        self.config = config
        self.states = states
        self.index_of = {s: i for i, s in enumerate(states)}
        # dense integer table used by vectorized observable evaluation
        self.occupations = np.array(states, dtype=np.int64).reshape(len(states), config.sites)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, occupation) -> int:
        return self.index_of[tuple(int(n) for n in occupation)]

    def state_vector(self, occupation) -> np.ndarray:
        """Unit vector for one occupation tuple."""
        vec = np.zeros(self.dim, dtype=np.complex128)
        vec[self.index(occupation)] = 1.0
        return vec

    def __repr__(self):
        c = self.config
        return f"FockBasis(N={c.atoms}, M={c.sites}, dim={self.dim})"


def _compositions_desc(total: int, parts: int):
    """All compositions of `total` into `parts` slots, lexicographic descending."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions_desc(total - head, parts - 1):
            yield (head,) + tail


@lru_cache(maxsize=128)
def _build_basis_cached(config: LatticeConfig, cap: int) -> FockBasis:
    dim = config.dimension
    if dim > cap:
        raise DimensionCapError(dim, cap)
    states = list(_compositions_desc(config.atoms, config.sites))
    assert len(states) == dim
    return FockBasis(config, states)


def build_basis(config: LatticeConfig, cap: int = DEFAULT_DIMENSION_CAP) -> FockBasis:
    """Exhaustive canonical basis of the (N, M) sector.

    Raises DimensionCapError before enumerating when binomial(N+M-1, N)
    exceeds `cap`.  Results are cached per (config, cap); bases are immutable.
    """
    return _build_basis_cached(config, cap)


def assert_hermitian(op: sp.spmatrix, tol: float = HERMITICITY_TOL) -> None:
    dev = abs(op - op.conj().T)
    dev = dev.max() if dev.nnz else 0.0
    if dev > tol:
        raise ValidationError("hermitian", f"max |A - A^dag| = {dev:.3e} > {tol:g}")


def annihilation_op(basis: FockBasis, site: int) -> sp.csr_matrix:
    """b_site as a sector map: rows over the (N-1) basis, columns over N.

    <..., n_i - 1, ...| b_i |..., n_i, ...> = sqrt(n_i).
    """
    _check_site(basis, site)
    lower = build_basis(basis.config.with_atoms(basis.config.atoms - 1))
    rows, cols, vals = [], [], []
    for col, state in enumerate(basis.states):
        n = state[site]
        if n == 0:
            continue
        target = state[:site] + (n - 1,) + state[site + 1 :]
        rows.append(lower.index_of[target])
        cols.append(col)
        vals.append(math.sqrt(n))
    return sp.csr_matrix((vals, (rows, cols)), shape=(lower.dim, basis.dim))


def creation_op(basis: FockBasis, site: int) -> sp.csr_matrix:
    """b^dag_site as a sector map: rows over the (N+1) basis, columns over N."""
    _check_site(basis, site)
    upper = build_basis(basis.config.with_atoms(basis.config.atoms + 1))
    rows, cols, vals = [], [], []
    for col, state in enumerate(basis.states):
        n = state[site]
        target = state[:site] + (n + 1,) + state[site + 1 :]
        rows.append(upper.index_of[target])
        cols.append(col)
        vals.append(math.sqrt(n + 1))
    return sp.csr_matrix((vals, (rows, cols)), shape=(upper.dim, basis.dim))


def hop_op(basis: FockBasis, i: int, j: int) -> sp.csr_matrix:
    """Number-conserving hop b^dag_i b_j within the sector."""
    _check_site(basis, i)
    _check_site(basis, j)
    if i == j:
        raise ValidationError("hop", "i == j is a density term; use number_op")
    rows, cols, vals = [], [], []
    for col, state in enumerate(basis.states):
        nj = state[j]
        if nj == 0:
            continue
        lst = list(state)
        lst[j] -= 1
        lst[i] += 1
        rows.append(basis.index_of[tuple(lst)])
        cols.append(col)
        vals.append(math.sqrt(nj * (state[i] + 1)))
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))


def number_op(basis: FockBasis, site: int) -> sp.csr_matrix:
    """Diagonal site density n_site."""
    _check_site(basis, site)
    return sp.diags(basis.occupations[:, site].astype(np.float64), format="csr")


def weighted_number_op(basis: FockBasis, weights) -> sp.csr_matrix:
    """Diagonal sum_i w_i n_i for a length-M weight vector."""
    w = np.asarray(weights)
    if w.shape != (basis.config.sites,):
        raise ValidationError(
            "weights", f"expected length {basis.config.sites}, got shape {w.shape}"
        )
    diag = basis.occupations @ w
    return sp.diags(diag, format="csr")


def neighbour_pairs(config: LatticeConfig) -> list[tuple[int, int]]:
    """Ordered nearest-neighbour pairs (i, j), both hop directions.

    Periodic lattices include the wrap-around bond; for M=2 periodic that
    bond appears twice (left and right neighbour coincide), matching the
    momentum-space dispersion 2 cos(ka) on every M.
    """
    M = config.sites
    pairs = []
    if config.boundary == "open":
        for i in range(M - 1):
            pairs.append((i, i + 1))
            pairs.append((i + 1, i))
    else:
        for i in range(M):
            j = (i + 1) % M
            if M == 1:
                continue
            pairs.append((i, j))
            pairs.append((j, i))
    return pairs


def kinetic_op(basis: FockBasis) -> sp.csr_matrix:
    """Hopping sum T = sum_<i,j> b^dag_i b_j over ordered neighbour pairs."""
    M = basis.config.sites
    if M == 1:
        return sp.csr_matrix((basis.dim, basis.dim))
    total = None
    for i, j in neighbour_pairs(basis.config):
        term = hop_op(basis, i, j)
        total = term if total is None else total + term
    return total.tocsr()


def momentum_annihilation_op(basis: FockBasis, k: float) -> sp.csr_matrix:
    """b_k = (1/sqrt(M)) sum_j e^{+ikja} b_j, a sector map N -> N-1."""
    _check_momentum(basis.config, k)
    M = basis.config.sites
    a = basis.config.lattice_spacing
    total = None
    for j in range(M):
        term = np.exp(1j * k * j * a) * annihilation_op(basis, j)
        total = term if total is None else total + term
    return (total / math.sqrt(M)).tocsr()


def momentum_creation_op(basis: FockBasis, k: float) -> sp.csr_matrix:
    """b^dag_k = (1/sqrt(M)) sum_j e^{-ikja} b^dag_j, a sector map N -> N+1."""
    _check_momentum(basis.config, k)
    M = basis.config.sites
    a = basis.config.lattice_spacing
    total = None
    for j in range(M):
        term = np.exp(-1j * k * j * a) * creation_op(basis, j)
        total = term if total is None else total + term
    return (total / math.sqrt(M)).tocsr()


def momentum_number_op(basis: FockBasis, k: float) -> sp.csr_matrix:
    """Number-conserving mode density n_k = b^dag_k b_k.

    Expanded as (1/M) sum_{j,l} e^{ika(l-j)} b^dag_j b_l so no sector
    crossing is needed.
    """
    _check_momentum(basis.config, k)
    M = basis.config.sites
    a = basis.config.lattice_spacing
    total = sp.diags(basis.occupations.sum(axis=1).astype(np.complex128)) / M
    for j in range(M):
        for l in range(M):
            if j == l:
                continue
            phase = np.exp(1j * k * a * (l - j)) / M
            total = total + phase * hop_op(basis, j, l)
    return total.tocsr()


def single_particle_hops(basis: FockBasis) -> dict[tuple[int, int], sp.csr_matrix]:
    """All b^dag_j b_l for j < l, used to assemble one-body correlations."""
    M = basis.config.sites
    return {
        (j, l): hop_op(basis, j, l) for j in range(M) for l in range(j + 1, M)
    }


def superfluid_state(basis: FockBasis) -> np.ndarray:
    """All N bosons in the k=0 mode: (b^dag_0)^N |vac> normalized."""
    config = basis.config
    psi = np.ones(1, dtype=np.complex128)
    for n in range(config.atoms):
        lower = build_basis(config.with_atoms(n))
        op = momentum_creation_op(lower, 0.0)
        psi = op @ psi
    psi = psi / np.linalg.norm(psi)
    return psi


def _check_site(basis: FockBasis, site: int) -> None:
    if not 0 <= site < basis.config.sites:
        raise ValidationError(
            "site", f"index {site} out of range [0, {basis.config.sites})"
        )


def _check_momentum(config: LatticeConfig, k: float) -> None:
    _, ks = momentum_grid(config)
    if not np.any(np.abs(ks - k) < 1e-9):
        raise ValidationError("momentum", f"k={k} is not on the grid for M={config.sites}")
