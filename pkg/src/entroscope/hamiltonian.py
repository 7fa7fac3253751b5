"""Sparse Hamiltonians for the five model families.

Every Hamiltonian is linear in its couplings, so builders first assemble one
sparse matrix per coupling ("terms") and then combine them. Sweeps reuse the
terms and only redo the linear combination.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .hilbert import Kind, SectorBasis
from .lattice import Family, Lattice

DEFAULT_COUPLINGS: dict[Family, dict[str, float]] = {
    Family.ISING_CHAIN: {"lambda": 1.0},
    Family.DIMER_2D: {"J_dimer": 1.0, "lambda": 0.5},
    Family.J1J2_2D: {"J1": 1.0, "J2": 0.0},
    Family.CHECKERBOARD_2D: {"J": 1.0, "Jx": 1.0},
    Family.HUBBARD_CHAIN: {"t": 1.0, "U": 4.0, "V": 0.0},
}

# bond label -> coupling name, spin families only
LABEL_COUPLING: dict[str, str] = {
    "DIMER": "J_dimer",
    "INTERDIMER": "lambda",
    "J1": "J1",
    "J2": "J2",
    "J": "J",
    "JCROSS": "Jx",
}

SPIN_FAMILIES = (Family.DIMER_2D, Family.J1J2_2D, Family.CHECKERBOARD_2D)


class ModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ModelSpec:
    family: Family
    lattice: Lattice
    couplings: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        merged = dict(DEFAULT_COUPLINGS[self.family])
        unknown = set(self.couplings) - set(merged)
        if unknown:
            raise ModelError(f"unknown couplings {sorted(unknown)} for {self.family.value}; "
                             f"expected {sorted(merged)}")
        merged.update({k: float(v) for k, v in self.couplings.items()})
        for k, v in merged.items():
            if not np.isfinite(v):
                raise ModelError(f"coupling {k}={v} is not finite")
        object.__setattr__(self, "couplings", merged)
        if self.lattice.family is not None and self.lattice.family is not self.family:
            raise ModelError(f"lattice family {self.lattice.family.value} does not match {self.family.value}")

    def with_coupling(self, name: str, value: float) -> "ModelSpec":
        return ModelSpec(self.family, self.lattice, {**self.couplings, name: value})

    def to_dict(self) -> dict:
        return {"family": self.family.value, "couplings": dict(sorted(self.couplings.items())),
                "lattice": self.lattice.to_dict()}


def default_basis(spec: ModelSpec) -> SectorBasis:
    """Ground-state sector: Sz=0, half filling (N/2, N/2), or even Z2 parity for Ising."""
    from .hilbert import enumerate_sector

    n = spec.lattice.num_sites
    if spec.family is Family.ISING_CHAIN:
        return enumerate_sector(Kind.SPIN_HALF, n, None, parity=+1)
    if spec.family is Family.HUBBARD_CHAIN:
        if n % 2:
            raise ModelError("half filling with equal spin populations needs an even chain")
        return enumerate_sector(Kind.FERMION_SITE4, n, (n // 2, n // 2))
    return enumerate_sector(Kind.SPIN_HALF, n, 0 if n % 2 == 0 else 1)


def _bits(codes: np.ndarray, n_bits: int, pos: int) -> np.ndarray:
    return (codes >> (n_bits - 1 - pos)) & 1


def _finish(rows, cols, vals, diag, dim) -> sp.csr_matrix:
    rows = np.concatenate(rows + [np.arange(dim)]) if rows else np.arange(dim)
    cols = np.concatenate(cols + [np.arange(dim)]) if cols else np.arange(dim)
    vals = np.concatenate(vals + [diag]) if vals else diag
    m = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    m.sum_duplicates()
    m.data[np.abs(m.data) < 1e-15] = 0.0
    m.eliminate_zeros()
    return m


def _targets(basis: SectorBasis, codes: np.ndarray) -> np.ndarray:
    idx = basis.lookup(codes)
    if np.any(idx < 0):
        raise ModelError("operator leaves the symmetry sector")
    return idx


def heisenberg_bonds(basis: SectorBasis, pairs) -> sp.csr_matrix:
    """Sum over ``pairs`` of S_i.S_j (spin-1/2 operators) in a spin basis."""
    if basis.kind is not Kind.SPIN_HALF:
        raise ModelError("Heisenberg terms need a SPIN_HALF basis")
    n, states, dim = basis.num_sites, basis.states, basis.dim
    diag = np.zeros(dim)
    rows, cols, vals = [], [], []
    for i, j in pairs:
        bi, bj = _bits(states, n, i), _bits(states, n, j)
        anti = bi != bj
        diag += np.where(anti, -0.25, 0.25)
        src = np.nonzero(anti)[0]
        flipped = states[src] ^ ((1 << (n - 1 - i)) | (1 << (n - 1 - j)))
        rows.append(_targets(basis, flipped))
        cols.append(src)
        vals.append(np.full(len(src), 0.5))
    return _finish(rows, cols, vals, diag, dim)


def spin_terms(lattice: Lattice, basis: SectorBasis) -> dict[str, sp.csr_matrix]:
    groups: dict[str, list[tuple[int, int]]] = {}
    for b in lattice.bonds:
        if b.label not in LABEL_COUPLING:
            raise ModelError(f"bond label {b.label!r} has no bound coupling")
        groups.setdefault(LABEL_COUPLING[b.label], []).append((b.i, b.j))
    return {name: heisenberg_bonds(basis, pairs) for name, pairs in groups.items()}


def ising_terms(basis: SectorBasis) -> dict[str, sp.csr_matrix]:
    """``-sum sx_i sx_{i+1}`` (ring, key ``bond``) and ``-sum sz_i`` (key ``lambda``), Pauli operators.

    The ring is built from the site count alone: a 2-site ring carries the
    (0,1) bond twice.
    """
    if basis.kind is not Kind.SPIN_HALF:
        raise ModelError("Ising terms need a SPIN_HALF basis")
    n, states, dim = basis.num_sites, basis.states, basis.dim
    rows, cols, vals = [], [], []
    for i in range(n):
        j = (i + 1) % n
        flipped = states ^ ((1 << (n - 1 - i)) | (1 << (n - 1 - j)))
        rows.append(_targets(basis, flipped))
        cols.append(np.arange(dim))
        vals.append(np.full(dim, -1.0))
    bond = _finish(rows, cols, vals, np.zeros(dim), dim)
    z = sum(1 - 2 * _bits(states, n, i) for i in range(n))
    field_term = sp.diags(-z.astype(float), format="csr")
    return {"bond": bond, "lambda": field_term}


def hubbard_terms(lattice: Lattice, basis: SectorBasis) -> dict[str, sp.csr_matrix]:
    """Hopping (key ``t``), double occupancy (``U``) and n_i n_j (``V``) over the lattice bonds."""
    if basis.kind is not Kind.FERMION_SITE4:
        raise ModelError("Hubbard terms need a FERMION_SITE4 basis")
    n, dim = basis.num_sites, basis.dim
    up, dn = basis.up_dn()
    occ_up = [_bits(up, n, i) for i in range(n)]
    occ_dn = [_bits(dn, n, i) for i in range(n)]
    docc = sum(occ_up[i] * occ_dn[i] for i in range(n)).astype(float)
    nn = np.zeros(dim)
    rows, cols, vals = [], [], []
    for b in lattice.bonds:
        i, j = b.i, b.j
        nn += (occ_up[i] + occ_dn[i]) * (occ_up[j] + occ_dn[j])
        lo, hi = min(i, j), max(i, j)
        flip = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
        for spin_up, occ in ((True, occ_up), (False, occ_dn)):
            src = np.nonzero(occ[i] != occ[j])[0]
            # Jordan-Wigner string: occupied same-spin modes strictly between i and j
            between = np.zeros(len(src), dtype=np.int64)
            for k in range(lo + 1, hi):
                between += occ[k][src]
            if spin_up:
                new_codes = ((up[src] ^ flip) << n) | dn[src]
            else:
                new_codes = (up[src] << n) | (dn[src] ^ flip)
            rows.append(_targets(basis, new_codes))
            cols.append(src)
            vals.append(-(1.0 - 2.0 * (between & 1)))
    hop = _finish(rows, cols, vals, np.zeros(dim), dim)
    return {"t": hop, "U": sp.diags(docc, format="csr"), "V": sp.diags(nn, format="csr")}


def model_terms(spec: ModelSpec, basis: SectorBasis) -> dict[str, sp.csr_matrix]:
    if spec.family is Family.ISING_CHAIN:
        return ising_terms(basis)
    if spec.family is Family.HUBBARD_CHAIN:
        _check_half_filling(basis)
        return hubbard_terms(spec.lattice, basis)
    return spin_terms(spec.lattice, basis)


def combine(terms: Mapping[str, sp.csr_matrix], couplings: Mapping[str, float]) -> sp.csr_matrix:
    h = None
    for name, m in terms.items():
        coef = 1.0 if name == "bond" else couplings[name]
        h = coef * m if h is None else h + coef * m
    h = h.tocsr()
    h.data[np.abs(h.data) < 1e-15] = 0.0
    h.eliminate_zeros()
    return h


def _check_half_filling(basis: SectorBasis) -> None:
    if basis.kind is not Kind.FERMION_SITE4:
        raise ModelError("Hubbard model needs a FERMION_SITE4 basis")
    n_up, n_dn = basis.sector
    if n_up + n_dn != basis.num_sites:
        raise ModelError(f"Hubbard builder is restricted to half filling; got sector {basis.sector}")


def build_spin_hamiltonian(spec: ModelSpec, basis: SectorBasis) -> sp.csr_matrix:
    if spec.family not in SPIN_FAMILIES:
        raise ModelError(f"{spec.family.value} is not a Heisenberg family")
    return combine(spin_terms(spec.lattice, basis), spec.couplings)


def build_ising_hamiltonian(spec: ModelSpec, basis: SectorBasis) -> sp.csr_matrix:
    """H = -sum_i (sx_i sx_{i+1} + lambda sz_i) on a ring, Pauli convention."""
    return combine(ising_terms(basis), spec.couplings)


def build_hubbard_hamiltonian(spec: ModelSpec, basis: SectorBasis) -> sp.csr_matrix:
    _check_half_filling(basis)
    return combine(hubbard_terms(spec.lattice, basis), spec.couplings)


def build_hamiltonian(spec: ModelSpec, basis: SectorBasis | None = None) -> tuple[sp.csr_matrix, SectorBasis]:
    basis = basis or default_basis(spec)
    return combine(model_terms(spec, basis), spec.couplings), basis


def apply(h, v: np.ndarray) -> np.ndarray:
    return h @ v


def total_spin_squared(basis: SectorBasis) -> sp.csr_matrix:
    n = basis.num_sites
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return 2.0 * heisenberg_bonds(basis, pairs) + sp.identity(basis.dim, format="csr") * (0.75 * n)
