"""Fermi-Hubbard / Heisenberg operators on small lattices and exact diagonalization.

Fermion modes are Jordan-Wigner ordered site-major with spin up before spin down,
so mode ``2*i`` is (site i, up) and ``2*i + 1`` is (site i, down).  A configuration
is an integer bitmask over the ``2N`` modes.  Energies are in units of ``t`` for
Hubbard operators and ``J`` for Heisenberg operators.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.linalg as sla
import scipy.sparse.linalg as spla

DENSE_DIM_LIMIT = 4096
DEFAULT_DIM_CAP = 1 << 20
HERMITIAN_RTOL = 1e-12


class SectorError(ValueError):
    """Raised for an invalid symmetry sector or a configuration outside it."""


class DimensionCapError(RuntimeError):
    """Raised when a sector exceeds the configured amplitude cap."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residuals: np.ndarray | None = None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class LatticeSpec:
    sites: int
    geometry: str = "chain"  # "chain" | "ladder"
    boundary: str = "open"  # "open" | "periodic"
    electrons: int | None = None
    doping: float = 0.0

    def __post_init__(self):
        if self.sites < 2:
            raise ValueError("need at least 2 sites")
        if self.geometry not in ("chain", "ladder"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.geometry == "ladder" and self.sites % 2:
            raise ValueError("ladder geometry needs an even number of sites")
        if not 0.0 <= self.doping < 1.0:
            raise ValueError("doping fraction must lie in [0, 1)")
        if self.electrons is None:
            object.__setattr__(self, "electrons", int(round((1.0 - self.doping) * self.sites)))
        if not 0 <= self.electrons <= 2 * self.sites:
            raise SectorError(f"{self.electrons} electrons do not fit on {self.sites} sites")

    @property
    def modes(self) -> int:
        return 2 * self.sites

    @cached_property
    def bonds(self) -> tuple[tuple[int, int], ...]:
        """Nearest-neighbour pairs (i < j), deduplicated."""
        n = self.sites
        out: set[tuple[int, int]] = set()

        def add(i, j):
            if i != j:
                out.add((min(i, j), max(i, j)))

        if self.geometry == "chain":
            for i in range(n - 1):
                add(i, i + 1)
            if self.boundary == "periodic" and n > 2:
                add(n - 1, 0)
        else:
            length = n // 2
            # site index = row * length + column
            for r in range(2):
                for c in range(length - 1):
                    add(r * length + c, r * length + c + 1)
                if self.boundary == "periodic" and length > 2:
                    add(r * length + length - 1, r * length)
            for c in range(length):
                add(c, length + c)
        return tuple(sorted(out))

    def sz_sectors(self) -> list[tuple[int, int]]:
        """All (n_up, n_down) splits of the electron count."""
        ne = self.electrons
        return [(nu, ne - nu) for nu in range(max(0, ne - self.sites), min(ne, self.sites) + 1)]

    def default_sector(self) -> tuple[int, int]:
        """Lowest |S_z| split, preferring the spin-up majority for odd counts."""
        ne = self.electrons
        return ((ne + 1) // 2, ne // 2)


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


def _masks_with_popcount(nbits: int, k: int) -> list[int]:
    return [sum(1 << b for b in combo) for combo in itertools.combinations(range(nbits), k)]


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Occupation-number basis of one (n_up, n_down) sector."""

    sites: int
    n_up: int
    n_down: int
    states: np.ndarray = field(repr=False)

    @classmethod
    def sector(cls, sites: int, n_up: int, n_down: int) -> "FockBasis":
        if not (0 <= n_up <= sites and 0 <= n_down <= sites):
            raise SectorError(
                f"sector (n_up={n_up}, n_down={n_down}) impossible on {sites} sites"
            )
        ups = _masks_with_popcount(sites, n_up)
        downs = _masks_with_popcount(sites, n_down)
        occ = []
        for u in ups:
            for d in downs:
                mask = 0
                for i in range(sites):
                    if (u >> i) & 1:
                        mask |= 1 << (2 * i)
                    if (d >> i) & 1:
                        mask |= 1 << (2 * i + 1)
                occ.append(mask)
        states = np.array(sorted(occ), dtype=np.int64)
        states.setflags(write=False)
        return cls(sites, n_up, n_down, states)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def electrons(self) -> int:
        return self.n_up + self.n_down

    @property
    def sz(self) -> float:
        return 0.5 * (self.n_up - self.n_down)

    @property
    def label(self) -> tuple[int, float]:
        return (self.electrons, self.sz)

    def index(self, occ: int) -> int:
        pos = int(np.searchsorted(self.states, occ))
        if pos >= self.dim or self.states[pos] != occ:
            raise SectorError(f"configuration {occ:#b} not in sector {self.label}")
        return pos

    def lookup(self, occ: np.ndarray) -> np.ndarray:
        """Vectorised index lookup; -1 where the configuration is absent."""
        pos = np.searchsorted(self.states, occ)
        pos = np.clip(pos, 0, self.dim - 1)
        return np.where(self.states[pos] == occ, pos, -1)

    def encode(self, occupations: Sequence[str | tuple[int, int]]) -> int:
        """Per-site occupations -> bitmask.

        Each site is given either as a string among ``"0", "u", "d", "2"`` (also
        ``"ud"``) or as an ``(n_up, n_down)`` pair.
        """
        if len(occupations) != self.sites:
            raise SectorError(f"expected {self.sites} site occupations, got {len(occupations)}")
        mask = 0
        for i, s in enumerate(occupations):
            if isinstance(s, str):
                table = {"0": (0, 0), "u": (1, 0), "d": (0, 1), "2": (1, 1), "ud": (1, 1)}
                if s not in table:
                    raise SectorError(f"cannot parse site occupation {s!r}")
                nu, nd = table[s]
            else:
                nu, nd = s
            if nu not in (0, 1) or nd not in (0, 1):
                raise SectorError(f"site {i} occupation {s!r} violates Pauli exclusion")
            mask |= nu << (2 * i)
            mask |= nd << (2 * i + 1)
        return mask

    def double_occupancy(self, occ: int) -> int:
        occ = int(occ)
        return bin(occ & _UP_MASKS[self.sites] & (occ >> 1)).count("1")


_UP_MASKS = {n: sum(1 << (2 * i) for i in range(n)) for n in range(1, 33)}


@dataclass(frozen=True, eq=False)
class SpinBasis:
    """Spin-1/2 basis; bit i set means site i is spin up."""

    sites: int
    n_up: int | None
    states: np.ndarray = field(repr=False)

    @classmethod
    def sector(cls, sites: int, n_up: int | None = None) -> "SpinBasis":
        if n_up is None:
            states = np.arange(1 << sites, dtype=np.int64)
        else:
            if not 0 <= n_up <= sites:
                raise SectorError(f"n_up={n_up} impossible on {sites} sites")
            states = np.array(sorted(_masks_with_popcount(sites, n_up)), dtype=np.int64)
        states.setflags(write=False)
        return cls(sites, n_up, states)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def label(self) -> tuple[str, float | None]:
        return ("spin", None if self.n_up is None else self.n_up - 0.5 * self.sites)

    def lookup(self, states: np.ndarray) -> np.ndarray:
        pos = np.clip(np.searchsorted(self.states, states), 0, self.dim - 1)
        return np.where(self.states[pos] == states, pos, -1)


Basis = FockBasis | SpinBasis


@dataclass(frozen=True, eq=False)
class ManyBodyOperator:
    basis: Basis
    matrix: sp.csr_matrix = field(repr=False)
    norm_bound: float
    label: str = ""
    units: str = "t"

    def __post_init__(self):
        m = self.matrix
        if m.shape != (self.basis.dim, self.basis.dim):
            raise ValueError("matrix shape does not match basis dimension")
        diff = abs(m - m.getH())
        worst = diff.max() if diff.nnz else 0.0
        if worst > HERMITIAN_RTOL * max(self.norm_bound, 1.0):
            raise ValueError(f"operator {self.label!r} is not Hermitian (max deviation {worst:.3e})")

    @property
    def dim(self) -> int:
        return self.basis.dim

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __add__(self, other: "ManyBodyOperator") -> "ManyBodyOperator":
        _same_basis(self, other)
        return ManyBodyOperator(
            self.basis,
            (self.matrix + other.matrix).tocsr(),
            self.norm_bound + other.norm_bound,
            f"({self.label}+{other.label})",
            self.units,
        )

    def scaled(self, factor: float, shift: float = 0.0) -> "ManyBodyOperator":
        """factor * self + shift * I."""
        mat = factor * self.matrix + shift * sp.identity(self.dim, format="csr")
        return ManyBodyOperator(
            self.basis,
            mat.tocsr(),
            abs(factor) * self.norm_bound + abs(shift),
            f"{factor:g}*{self.label}{shift:+g}",
            self.units,
        )


def _same_basis(a: ManyBodyOperator, b: ManyBodyOperator) -> None:
    if a.basis is not b.basis and not (
        type(a.basis) is type(b.basis)
        and a.basis.dim == b.basis.dim
        and np.array_equal(a.basis.states, b.basis.states)
    ):
        raise SectorError("operators live on different sectors")


@dataclass(frozen=True, eq=False)
class Wavefunction:
    basis: Basis
    amplitudes: np.ndarray = field(repr=False)
    double_occupancy: int | None = None
    subnormalized: bool = False

    def __post_init__(self):
        if len(self.amplitudes) != self.basis.dim:
            raise ValueError("amplitude vector does not match basis dimension")
        if not self.subnormalized and abs(self.norm - 1.0) > 1e-12:
            raise ValueError(f"wavefunction norm {self.norm!r} is not 1")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @classmethod
    def from_vector(cls, basis: Basis, vec: np.ndarray, normalize: bool = True) -> "Wavefunction":
        vec = np.asarray(vec)
        if normalize:
            nrm = np.linalg.norm(vec)
            if nrm == 0:
                raise ValueError("zero-norm state")
            return cls(basis, vec / nrm)
        return cls(basis, vec, subnormalized=True)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    basis: Basis
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)  # columns
    complete: bool = True

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def state(self, k: int) -> Wavefunction:
        return Wavefunction(self.basis, self.eigenvectors[:, k])

    def indices_below(self, cutoff: float) -> np.ndarray:
        return np.flatnonzero(self.eigenvalues <= cutoff)

    def projector_weights(self, psi: np.ndarray) -> np.ndarray:
        """Eigenbasis amplitudes <psi_k|psi>."""
        return self.eigenvectors.conj().T @ psi

    def project_below(self, psi: np.ndarray, cutoff: float) -> np.ndarray:
        idx = self.indices_below(cutoff)
        if not self.complete and (len(idx) == len(self.eigenvalues)):
            raise ValueError("partial decomposition does not reach the cutoff")
        vecs = self.eigenvectors[:, idx]
        return vecs @ (vecs.conj().T @ psi)


# ---------------------------------------------------------------------------
# operator construction
# ---------------------------------------------------------------------------


def _hop_terms(basis: FockBasis, a: int, b: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Matrix elements of c_a^dagger c_b (a != b) within the sector: (rows, cols, vals)."""
    occ = basis.states
    has_b = (occ >> b) & 1 == 1
    no_a = (occ >> a) & 1 == 0
    src = np.flatnonzero(has_b & no_a)
    if src.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    s = occ[src]
    lo, hi = min(a, b), max(a, b)
    between = ((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1)
    sign = 1.0 - 2.0 * (_popcount(s & between) & 1)
    new = (s & ~(1 << b)) | (1 << a)
    dst = basis.lookup(new)
    keep = dst >= 0
    return dst[keep], src[keep], sign[keep]


def _hopping_matrix(spec: LatticeSpec, basis: FockBasis) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for i, j in spec.bonds:
        for s in (0, 1):
            a, b = 2 * i + s, 2 * j + s
            for x, y in ((a, b), (b, a)):
                r, c, v = _hop_terms(basis, x, y)
                rows.append(r)
                cols.append(c)
                vals.append(v)
    return _coo(basis.dim, rows, cols, vals)


def _coo(dim, rows, cols, vals) -> sp.csr_matrix:
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    return sp.csr_matrix((v, (r, c)), shape=(dim, dim))


def _double_occ_diag(basis: FockBasis) -> np.ndarray:
    occ = basis.states
    return _popcount(occ & _UP_MASKS[basis.sites] & (occ >> 1)).astype(float)


def _resolve_sector(spec: LatticeSpec, sector: tuple[int, int] | None) -> FockBasis:
    nu, nd = sector if sector is not None else spec.default_sector()
    if nu + nd != spec.electrons:
        raise SectorError(f"sector {(nu, nd)} does not hold {spec.electrons} electrons")
    if nu + nd > 2 * spec.sites:
        raise SectorError(f"{nu + nd} electrons exceed 2N = {2 * spec.sites}")
    return FockBasis.sector(spec.sites, nu, nd)


def build_hubbard(
    spec: LatticeSpec,
    t: float = 1.0,
    U: float = 0.0,
    sector: tuple[int, int] | None = None,
    basis: FockBasis | None = None,
) -> ManyBodyOperator:
    """-t sum_<ij>,s (c+_is c_js + h.c.) + U sum_i n_iu n_id on one (n_up, n_down) sector.

    The norm bound is lambda = 4Nt + NU.
    """
    if t <= 0:
        raise ValueError("hopping t must be positive")
    if U < 0:
        raise ValueError("U must be non-negative")
    basis = basis if basis is not None else _resolve_sector(spec, sector)
    mat = -t * _hopping_matrix(spec, basis) + U * sp.diags(_double_occ_diag(basis))
    lam = 4 * spec.sites * t + spec.sites * U
    return ManyBodyOperator(basis, mat.tocsr(), lam, f"hubbard(t={t:g},U={U:g})", "t")


def hubbard_norm(sites: int, t: float, U: float) -> float:
    return 4 * sites * t + sites * U


def build_heisenberg(
    spec: LatticeSpec, J: float = 1.0, c: float = 0.0, n_up: int | None = None
) -> ManyBodyOperator:
    """J sum_<ij> S_i.S_j + c on the spin-1/2 space (optionally one S_z sector)."""
    basis = SpinBasis.sector(spec.sites, n_up)
    states = basis.states
    diag = np.full(basis.dim, float(c))
    rows, cols, vals = [], [], []
    for i, j in spec.bonds:
        si = (states >> i) & 1
        sj = (states >> j) & 1
        diag += J * np.where(si == sj, 0.25, -0.25)
        flip = np.flatnonzero(si != sj)
        new = states[flip] ^ ((1 << i) | (1 << j))
        dst = basis.lookup(new)
        keep = dst >= 0
        rows.append(dst[keep])
        cols.append(flip[keep])
        vals.append(np.full(int(keep.sum()), 0.5 * J))
    mat = _coo(basis.dim, rows, cols, vals) + sp.diags(diag)
    lam = 0.75 * abs(J) * len(spec.bonds) + abs(c)
    return ManyBodyOperator(basis, mat.tocsr(), lam, f"heisenberg(J={J:g},c={c:g})", "J")


# ---------------------------------------------------------------------------
# descriptors
# ---------------------------------------------------------------------------

DESCRIPTOR_KINDS = (
    "total-hopping",
    "total-double-occupancy",
    "total-spin-spin",
    "spin-spin",
    "rdm-element",
)


def spin_spin_matrix(basis: FockBasis, i: int, j: int) -> sp.csr_matrix:
    """S_i . S_j on a fermion sector, built directly from configurations."""
    occ = basis.states
    nu_i, nd_i = (occ >> (2 * i)) & 1, (occ >> (2 * i + 1)) & 1
    nu_j, nd_j = (occ >> (2 * j)) & 1, (occ >> (2 * j + 1)) & 1
    diag = 0.25 * (nu_i - nd_i) * (nu_j - nd_j)
    rows, cols, vals = [], [], []
    # 1/2 (S+_i S-_j + S-_i S+_j): exchange of opposite spins on singly occupied sites.
    # S+_i S-_j = c+_{i u} c_{i d} c+_{j d} c_{j u}
    for a_site, b_site in ((i, j), (j, i)):
        sel = np.flatnonzero(
            (((occ >> (2 * a_site)) & 1) == 0)
            & (((occ >> (2 * a_site + 1)) & 1) == 1)
            & (((occ >> (2 * b_site)) & 1) == 1)
            & (((occ >> (2 * b_site + 1)) & 1) == 0)
        )
        if sel.size == 0:
            continue
        s = occ[sel]
        sign = np.ones(sel.size)
        state = s.copy()
        # apply right-to-left: c_{b u}, c+_{b d}, c_{a d}, c+_{a u}
        for mode, create in (
            (2 * b_site, False),
            (2 * b_site + 1, True),
            (2 * a_site + 1, False),
            (2 * a_site, True),
        ):
            below = state & ((1 << mode) - 1)
            sign *= 1.0 - 2.0 * (_popcount(below) & 1)
            state = state | (1 << mode) if create else state & ~(1 << mode)
        dst = basis.lookup(state)
        rows.append(dst)
        cols.append(sel)
        vals.append(0.5 * sign)
    return (_coo(basis.dim, rows, cols, vals) + sp.diags(diag.astype(float))).tocsr()


def _rdm_matrix(basis: FockBasis, indices: Sequence[int]) -> sp.csr_matrix:
    """Hermitian part of a normal-ordered rdm element.

    nu = 1: indices (p, q) -> (c+_p c_q + c+_q c_p) / 2
    nu = 2: indices (p, q, r, s) -> (c+_p c+_q c_s c_r + h.c.) / 2
    """
    nu = len(indices) // 2
    creators = indices[:nu]
    annihilators = indices[nu:][::-1] if nu == 2 else indices[nu:]
    ops = [(m, True) for m in creators] + [(m, False) for m in annihilators]
    occ = basis.states
    state = occ.copy()
    sign = np.ones(basis.dim)
    alive = np.ones(basis.dim, dtype=bool)
    for mode, create in reversed(ops):
        bit = (state >> mode) & 1
        alive &= (bit == 0) if create else (bit == 1)
        below = state & ((1 << mode) - 1)
        sign *= 1.0 - 2.0 * (_popcount(below) & 1)
        state = np.where(alive, state ^ (1 << mode), state)
    src = np.flatnonzero(alive)
    dst = basis.lookup(state[src])
    keep = dst >= 0
    m = _coo(basis.dim, [dst[keep]], [src[keep]], [sign[src][keep]])
    return (0.5 * (m + m.getH())).tocsr()


def build_descriptor(
    spec: LatticeSpec,
    kind: str,
    basis: FockBasis | None = None,
    indices: Sequence[int] = (),
) -> ManyBodyOperator:
    """Descriptor operator on a fermion sector.

    kinds: total-hopping (sum over bonds and spins of c+c + h.c.),
    total-double-occupancy, total-spin-spin (sum over bonds of S_i.S_j),
    spin-spin (indices=(i, j)), rdm-element (indices of length 2 or 4 over 2N modes).
    """
    basis = basis if basis is not None else _resolve_sector(spec, None)
    n = spec.sites
    if kind == "total-hopping":
        mat = _hopping_matrix(spec, basis)
        return ManyBodyOperator(basis, mat, 4.0 * n, kind, "1")
    if kind == "total-double-occupancy":
        return ManyBodyOperator(basis, sp.diags(_double_occ_diag(basis)).tocsr(), float(n), kind, "1")
    if kind == "total-spin-spin":
        mat = sum((spin_spin_matrix(basis, i, j) for i, j in spec.bonds), sp.csr_matrix((basis.dim,) * 2))
        return ManyBodyOperator(basis, mat.tocsr(), 0.75 * len(spec.bonds), kind, "1")
    if kind == "spin-spin":
        if len(indices) != 2:
            raise ValueError("spin-spin descriptor needs two site indices")
        i, j = indices
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise IndexError(f"spin-spin sites {indices} out of range for N={n}")
        return ManyBodyOperator(basis, spin_spin_matrix(basis, i, j), 0.75, f"spin-spin({i},{j})", "1")
    if kind == "rdm-element":
        if len(indices) not in (2, 4):
            raise ValueError("rdm-element takes 2 (1-RDM) or 4 (2-RDM) mode indices")
        if any(not 0 <= m < 2 * n for m in indices):
            raise IndexError(f"rdm indices {tuple(indices)} out of range for {2 * n} modes")
        nu = len(indices) // 2
        if len(set(indices[:nu])) < nu or len(set(indices[nu:])) < nu:
            raise ValueError("repeated creation or annihilation index gives a null operator")
        label = f"rdm{nu}{tuple(indices)}"
        return ManyBodyOperator(basis, _rdm_matrix(basis, list(indices)), 1.0, label, "1")
    raise ValueError(f"unknown descriptor kind {kind!r}; expected one of {DESCRIPTOR_KINDS}")


def rdm_index_sets(sites: int, nu: int) -> list[tuple[int, ...]]:
    """Index tuples enumerating the Hermitian nu-RDM descriptor pool (O(N^(2 nu)) entries)."""
    modes = range(2 * sites)
    if nu == 1:
        return [(p, q) for p in modes for q in modes if p <= q]
    if nu == 2:
        pairs = [(p, q) for p in modes for q in modes if p < q]
        return [a + b for a in pairs for b in pairs if a <= b]
    raise ValueError("only nu = 1, 2 are enumerated")


# ---------------------------------------------------------------------------
# diagonalization
# ---------------------------------------------------------------------------


def _canonicalize(evals: np.ndarray, evecs: np.ndarray, tol: float) -> np.ndarray:
    """Fix a reproducible basis inside every degenerate cluster, then fix phases."""
    evecs = evecs.copy()
    k = 0
    n = len(evals)
    while k < n:
        end = k + 1
        while end < n and evals[end] - evals[end - 1] <= tol:
            end += 1
        if end - k > 1:
            block = evecs[:, k:end]
            # pivoted QR on the rows of the block picks configurations independently of
            # the basis the solver returned; the cluster projector's columns P e_i at
            # those pivots are then orthonormalized
            _, _, piv = sla.qr(block.conj().T, pivoting=True, mode="economic")
            cols = block @ block[piv[: end - k]].conj().T
            q, _ = np.linalg.qr(cols)
            evecs[:, k:end] = q
        k = end
    for c in range(evecs.shape[1]):
        v = evecs[:, c]
        mags = np.abs(v)
        pivot = int(np.flatnonzero(mags >= mags.max() - 1e-9)[0])
        phase = v[pivot] / abs(v[pivot])
        evecs[:, c] = v / phase
    if np.all(np.abs(evecs.imag) < 1e-14) if np.iscomplexobj(evecs) else True:
        evecs = evecs.real
    return evecs


def diagonalize(
    op: ManyBodyOperator,
    k: int | None = None,
    *,
    below: float | None = None,
    dim_cap: int = DEFAULT_DIM_CAP,
    dense_limit: int = DENSE_DIM_LIMIT,
    degeneracy_tol: float = 1e-9,
) -> SpectralDecomposition:
    """Full (dense) or lowest-k (Lanczos) eigendecomposition.

    ``below`` requests every eigenpair with energy <= below (partial solves grow k
    until the cutoff is passed).  Sectors above ``dense_limit`` need ``k`` or ``below``.
    """
    dim = op.dim
    if dim > dim_cap:
        raise DimensionCapError(f"sector dimension {dim} exceeds cap {dim_cap}")
    lam = max(op.norm_bound, 1e-300)
    partial = k is not None or below is not None
    small_request = k is not None and k < dim // 3
    if dim <= 512 or (dim <= dense_limit and not (partial and small_request)) or (
        k is not None and k >= dim - 1
    ):
        evals, evecs = np.linalg.eigh(op.dense())
        complete = True
        if below is not None:
            keep = evals <= below
            evals, evecs = evals[keep], evecs[:, keep]
            complete = bool(keep.all())
        elif k is not None:
            evals, evecs = evals[:k], evecs[:, :k]
            complete = k >= dim
    else:
        if k is None and below is None:
            raise ValueError(f"dimension {dim} needs a partial solve: pass k or below")
        want = k if k is not None else 16
        while True:
            want = min(want, dim - 2)
            evals, evecs = spla.eigsh(op.matrix, k=want, which="SA", tol=1e-13, ncv=min(dim, max(2 * want + 1, want + 40)))
            order = np.argsort(evals)
            evals, evecs = evals[order], evecs[:, order]
            if below is None or evals[-1] > below or want >= dim - 2:
                break
            want *= 2
        if below is not None:
            keep = evals <= below
            # the boundary cluster must be complete; drop the top in case it is split
            evals, evecs = evals[keep], evecs[:, keep]
        complete = False
        # full reorthogonalisation of the returned block
        evecs, _ = np.linalg.qr(evecs)
        hv = op.matrix @ evecs
        evals = np.einsum("ij,ij->j", evecs.conj(), hv).real
        order = np.argsort(evals)
        evals, evecs = evals[order], evecs[:, order]
    evecs = _canonicalize(evals, evecs, degeneracy_tol * lam)
    resid = np.linalg.norm(op.matrix @ evecs - evecs * evals, axis=0) if len(evals) else np.zeros(0)
    if np.any(resid > 1e-10 * lam):
        raise ConvergenceError("eigenpair residuals above 1e-10*lambda", resid)
    return SpectralDecomposition(op.basis, evals, evecs, complete)


def expectation(op: ManyBodyOperator, psi: Wavefunction | np.ndarray) -> float:
    """Rayleigh quotient <psi|A|psi>/<psi|psi>."""
    vec = psi.amplitudes if isinstance(psi, Wavefunction) else np.asarray(psi)
    if isinstance(psi, Wavefunction):
        _check_basis(op, psi.basis)
    nrm2 = float(np.vdot(vec, vec).real)
    if nrm2 == 0.0:
        raise ValueError("zero-norm state")
    return float(np.vdot(vec, op.matrix @ vec).real) / nrm2


def expectations(op: ManyBodyOperator, vecs: np.ndarray) -> np.ndarray:
    """Column-wise Rayleigh quotients."""
    num = np.einsum("ij,ij->j", vecs.conj(), op.matrix @ vecs).real
    den = np.einsum("ij,ij->j", vecs.conj(), vecs).real
    if np.any(den == 0):
        raise ValueError("zero-norm state")
    return num / den


def _check_basis(op: ManyBodyOperator, basis: Basis) -> None:
    if op.basis is not basis and not np.array_equal(op.basis.states, basis.states):
        raise SectorError("operator and state live on different sectors")


def product_state(basis: FockBasis, occupations: Sequence[str | tuple[int, int]] | int) -> Wavefunction:
    """Single occupation configuration |m, q>; m (double occupancy) is attached."""
    occ = occupations if isinstance(occupations, (int, np.integer)) else basis.encode(occupations)
    idx = basis.index(int(occ))
    amps = np.zeros(basis.dim)
    amps[idx] = 1.0
    return Wavefunction(basis, amps, double_occupancy=int(basis.double_occupancy(int(occ))))


def neel_occupations(spec: LatticeSpec) -> list[str]:
    """Antiferromagnetic product state pattern (checkerboard on ladders)."""
    if spec.geometry == "chain":
        return ["u" if i % 2 == 0 else "d" for i in range(spec.sites)]
    length = spec.sites // 2
    return ["u" if (i // length + i % length) % 2 == 0 else "d" for i in range(spec.sites)]


def zero_double_occupancy_states(basis: FockBasis) -> np.ndarray:
    """Indices of configurations with no doubly occupied site."""
    return np.flatnonzero(_double_occ_diag(basis) == 0)


def export_spectrum_csv(decomp: SpectralDecomposition, path, units: str = "t") -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "eigenvalue", "units"])
        for k, e in enumerate(decomp.eigenvalues):
            w.writerow([k, repr(float(e)), units])


def hubbard_spectra(
    spec: LatticeSpec,
    t: float = 1.0,
    U: float = 0.0,
    *,
    sectors: Iterable[tuple[int, int]] | None = None,
    k: int | dict | None = None,
    below: float | None = None,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> list[SpectralDecomposition]:
    """Diagonalize every requested (n_up, n_down) sector (all S_z splits by default).

    ``k`` may be an int or a mapping sector -> int.
    """
    out = []
    for sec in sectors if sectors is not None else spec.sz_sectors():
        basis = FockBasis.sector(spec.sites, *sec)
        kk = k.get(sec) if isinstance(k, dict) else k
        if kk is not None and kk >= basis.dim:
            kk = None
        out.append(diagonalize(build_hubbard(spec, t, U, basis=basis), kk, below=below, dim_cap=dim_cap))
    return out
