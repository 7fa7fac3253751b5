"""Symmetry-sector bases with bit-coded product states.

Bit conventions (shared by every module):

* spins: site ``i`` lives on bit ``N-1-i`` of the code, ``0`` is up and ``1``
  is down, so reading the binary string left to right walks sites 0..N-1 and
  a C-order reshape of a full vector to ``(2,)*N`` puts site ``i`` on axis ``i``;
* fermions: modes are ordered (up 0..N-1, down 0..N-1); mode ``m`` lives on bit
  ``2N-1-m`` of ``code = up_mask << N | dn_mask`` and ``1`` means occupied.
  The amplitude of a code is the coefficient of the creation string applied in
  ascending mode order.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np


class Kind(str, enum.Enum):
    SPIN_HALF = "SPIN_HALF"
    FERMION_SITE4 = "FERMION_SITE4"


class SectorError(ValueError):
    pass


def popcount(codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    out = np.zeros(codes.shape, dtype=np.int64)
    c = codes.copy()
    while np.any(c):
        out += c & 1
        c >>= 1
    return out


def fixed_weight_masks(n_bits: int, weight: int) -> np.ndarray:
    """All ``n_bits``-bit integers with ``weight`` set bits, ascending."""
    if not 0 <= weight <= n_bits:
        return np.zeros(0, dtype=np.int64)
    masks = [sum(1 << (n_bits - 1 - i) for i in c) for c in itertools.combinations(range(n_bits), weight)]
    return np.array(sorted(masks), dtype=np.int64)


@dataclass(frozen=True, eq=False)
class SectorBasis:
    kind: Kind
    num_sites: int
    sector: object
    states: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def full_dim(self) -> int:
        return (2 if self.kind is Kind.SPIN_HALF else 4) ** self.num_sites

    def lookup(self, codes) -> np.ndarray:
        """Ordinals of ``codes``; ``-1`` for codes outside the sector."""
        codes = np.asarray(codes, dtype=np.int64)
        pos = np.searchsorted(self.states, codes)
        pos_c = np.minimum(pos, self.dim - 1)
        return np.where(self.states[pos_c] == codes, pos_c, -1)

    def index(self, code: int) -> int:
        k = int(self.lookup(np.array([code]))[0])
        if k < 0:
            raise KeyError(code)
        return k

    def up_dn(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind is not Kind.FERMION_SITE4:
            raise SectorError("up/down masks exist only for fermion bases")
        n = self.num_sites
        return self.states >> n, self.states & ((1 << n) - 1)


def enumerate_sector(kind: Kind | str, num_sites: int, sector=None, *, parity: int | None = None) -> SectorBasis:
    """Enumerate a symmetry sector.

    ``sector`` is twice the total Sz for spins (``None`` keeps every Sz) and
    ``(n_up, n_dn)`` for fermions. ``parity=+1/-1`` restricts a spin basis to
    an even/odd number of down spins, the Z2 sector of the Ising chain.
    """
    kind = Kind(kind)
    n = int(num_sites)
    if kind is Kind.SPIN_HALF:
        if sector is None:
            states = np.arange(1 << n, dtype=np.int64)
        else:
            sz2 = int(sector)
            if (n - sz2) % 2 or abs(sz2) > n:
                raise SectorError(f"Sz*2={sz2} unreachable with {n} spins")
            states = fixed_weight_masks(n, (n - sz2) // 2)
        if parity is not None:
            want = 0 if parity > 0 else 1
            states = states[(popcount(states) & 1) == want]
    else:
        n_up, n_dn = (int(x) for x in sector)
        if not (0 <= n_up <= n and 0 <= n_dn <= n):
            raise SectorError(f"fermion sector {sector} outside 0..{n}")
        up = fixed_weight_masks(n, n_up)
        dn = fixed_weight_masks(n, n_dn)
        states = ((up[:, None] << n) | dn[None, :]).ravel()
    if len(states) == 0:
        raise SectorError(f"empty sector {sector!r} for {kind.value} N={n}")
    return SectorBasis(kind, n, sector if parity is None else (sector, parity), states)


def sector_dimension(kind: Kind | str, num_sites: int, sector) -> int:
    kind = Kind(kind)
    if kind is Kind.SPIN_HALF:
        return comb(num_sites, (num_sites - int(sector)) // 2)
    return comb(num_sites, sector[0]) * comb(num_sites, sector[1])


@dataclass(frozen=True, eq=False)
class FullStateVector:
    amplitudes: np.ndarray
    kind: Kind
    num_sites: int

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def embed_full(vector: np.ndarray, basis: SectorBasis) -> FullStateVector:
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (basis.dim,):
        raise SectorError(f"vector of length {vector.shape} does not match sector dimension {basis.dim}")
    full = np.zeros(basis.full_dim)
    full[basis.states] = vector
    return FullStateVector(full, basis.kind, basis.num_sites)


def reorder_signs(codes: np.ndarray, permutation: Sequence[int]) -> np.ndarray:
    """Sign picked up by each creation string when modes are reordered.

    ``permutation[k]`` is the old mode placed at new position ``k``; mode ``m``
    is read from bit ``len(permutation)-1-m`` of each code.
    """
    codes = np.asarray(codes, dtype=np.int64)
    n = len(permutation)
    pos = np.empty(n, dtype=np.int64)
    pos[np.asarray(permutation, dtype=np.int64)] = np.arange(n)
    occ = [(codes >> (n - 1 - m)) & 1 for m in range(n)]
    inversions = np.zeros(codes.shape, dtype=np.int64)
    for a in range(n):
        for b in range(a + 1, n):
            if pos[a] > pos[b]:
                inversions += occ[a] & occ[b]
    return 1 - 2 * (inversions & 1)


def fermion_reorder_sign(mask: int, permutation: Sequence[int]) -> int:
    return int(reorder_signs(np.array([mask]), permutation)[0])
