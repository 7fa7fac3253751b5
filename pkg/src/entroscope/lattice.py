"""Lattice geometries with periodic boundaries and sublattice bipartitions.

Sites of a 2D ``Lx x Ly`` cluster are indexed row-major, ``i = x + Lx * y``.
Chains use ``i = x``.
"""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from math import comb
from typing import Iterable, Sequence

import numpy as np


class Family(str, enum.Enum):
    ISING_CHAIN = "ISING_CHAIN"
    DIMER_2D = "DIMER_2D"
    J1J2_2D = "J1J2_2D"
    CHECKERBOARD_2D = "CHECKERBOARD_2D"
    HUBBARD_CHAIN = "HUBBARD_CHAIN"

    @property
    def is_chain(self) -> bool:
        return self in (Family.ISING_CHAIN, Family.HUBBARD_CHAIN)


BOND_LABELS: dict[Family, frozenset[str]] = {
    Family.ISING_CHAIN: frozenset({"NN"}),
    Family.DIMER_2D: frozenset({"DIMER", "INTERDIMER"}),
    Family.J1J2_2D: frozenset({"J1", "J2"}),
    Family.CHECKERBOARD_2D: frozenset({"J", "JCROSS"}),
    Family.HUBBARD_CHAIN: frozenset({"NN"}),
}

SQUARE_SIZES = ((4, 4),)


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class Bond:
    i: int
    j: int
    label: str

    def key(self) -> tuple[int, int, str]:
        return (min(self.i, self.j), max(self.i, self.j), self.label)


@dataclass(frozen=True)
class Lattice:
    num_sites: int
    dimension: int
    shape: tuple[int, ...]
    bonds: tuple[Bond, ...]
    name: str
    family: Family | None = None

    def __post_init__(self):
        if self.num_sites < 1:
            raise LatticeError("num_sites must be positive")
        if self.dimension not in (1, 2) or len(self.shape) != self.dimension:
            raise LatticeError(f"shape {self.shape} does not match dimension {self.dimension}")
        if int(np.prod(self.shape)) != self.num_sites:
            raise LatticeError(f"shape {self.shape} does not hold {self.num_sites} sites")
        seen = set()
        allowed = BOND_LABELS.get(self.family) if self.family is not None else None
        for b in self.bonds:
            if not (0 <= b.i < self.num_sites and 0 <= b.j < self.num_sites):
                raise LatticeError(f"bond {b} references a site outside [0, {self.num_sites})")
            if b.i == b.j:
                raise LatticeError(f"self-bond on site {b.i}")
            if allowed is not None and b.label not in allowed:
                raise LatticeError(f"label {b.label!r} not allowed for {self.family.value}")
            if b.key() in seen:
                raise LatticeError(f"duplicate bond {b.key()}")
            seen.add(b.key())

    @property
    def labels(self) -> list[str]:
        return sorted({b.label for b in self.bonds})

    def bonds_with(self, label: str) -> list[Bond]:
        return [b for b in self.bonds if b.label == label]

    def degree(self, site: int, label: str | None = None) -> int:
        return sum(1 for b in self.bonds if site in (b.i, b.j) and (label is None or b.label == label))

    def translations(self, step: int = 1) -> list[list[int]]:
        """Site permutations for translations by multiples of ``step`` (identity excluded)."""
        if self.dimension == 1:
            (L,) = self.shape
            shifts = [(dx,) for dx in range(0, L, step)]
        else:
            Lx, Ly = self.shape
            shifts = [(dx, dy) for dx in range(0, Lx, step) for dy in range(0, Ly, step)]
        perms = []
        for s in shifts:
            if not any(s):
                continue
            if self.dimension == 1:
                perms.append([(i + s[0]) % self.shape[0] for i in range(self.num_sites)])
            else:
                Lx, Ly = self.shape
                perms.append(
                    [((i % Lx + s[0]) % Lx) + Lx * ((i // Lx + s[1]) % Ly) for i in range(self.num_sites)]
                )
        return perms

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "family": self.family.value if self.family is not None else None,
            "num_sites": self.num_sites,
            "dimension": self.dimension,
            "shape": list(self.shape),
            "bonds": [[b.i, b.j, b.label] for b in self.bonds],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "Lattice":
        n = int(data["num_sites"])
        shape = tuple(int(s) for s in data.get("shape", [n]))
        fam = data.get("family")
        return cls(
            num_sites=n,
            dimension=int(data.get("dimension", len(shape))),
            shape=shape,
            bonds=tuple(Bond(int(i), int(j), str(lab)) for i, j, lab in data["bonds"]),
            name=str(data.get("name", "custom")),
            family=Family(fam) if fam else None,
        )

    @classmethod
    def from_json(cls, text: str) -> "Lattice":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SublatticePartition:
    r_sites: tuple[int, ...]
    b_sites: tuple[int, ...]
    cut_bonds: int

    def __post_init__(self):
        r, b = set(self.r_sites), set(self.b_sites)
        if len(r) != len(self.r_sites) or len(b) != len(self.b_sites):
            raise LatticeError("partition lists repeat a site")
        if r & b:
            raise LatticeError(f"sites {sorted(r & b)} appear on both sides of the partition")
        n = len(r) + len(b)
        if r | b != set(range(n)):
            raise LatticeError("partition does not cover sites 0..N-1")

    @property
    def num_sites(self) -> int:
        return len(self.r_sites) + len(self.b_sites)

    @property
    def is_balanced(self) -> bool:
        return 2 * len(self.r_sites) == self.num_sites


def count_cut_bonds(lattice: Lattice, r_sites: Iterable[int]) -> int:
    r = set(r_sites)
    return sum(1 for b in lattice.bonds if (b.i in r) != (b.j in r))


def make_partition(lattice: Lattice, r_sites: Sequence[int]) -> SublatticePartition:
    """Partition with ``r_sites`` in the given order and the complement in ascending order."""
    r = tuple(int(s) for s in r_sites)
    bad = [s for s in r if not 0 <= s < lattice.num_sites]
    if bad:
        raise LatticeError(f"sites {bad} outside lattice of {lattice.num_sites} sites")
    rest = tuple(s for s in range(lattice.num_sites) if s not in set(r))
    return SublatticePartition(r, rest, count_cut_bonds(lattice, r))


def parse_site_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(" ", "").split(",") if tok]


# ---------------------------------------------------------------------------
# presets


def _chain(family: Family, n: int) -> Lattice:
    bonds = tuple(Bond(i, (i + 1) % n, "NN") for i in range(n))
    return Lattice(n, 1, (n,), bonds, f"{family.value.lower()}_{n}", family)


def _square(family: Family, Lx: int, Ly: int) -> Lattice:
    def idx(x, y):
        return (x % Lx) + Lx * (y % Ly)

    bonds: list[Bond] = []
    for y in range(Ly):
        for x in range(Lx):
            i = idx(x, y)
            if family is Family.DIMER_2D:
                # columnar: strong bond on the horizontal link leaving every even column
                bonds.append(Bond(i, idx(x + 1, y), "DIMER" if x % 2 == 0 else "INTERDIMER"))
                bonds.append(Bond(i, idx(x, y + 1), "INTERDIMER"))
            elif family is Family.J1J2_2D:
                bonds.append(Bond(i, idx(x + 1, y), "J1"))
                bonds.append(Bond(i, idx(x, y + 1), "J1"))
            elif family is Family.CHECKERBOARD_2D:
                bonds.append(Bond(i, idx(x + 1, y), "J"))
                bonds.append(Bond(i, idx(x, y + 1), "J"))
    for y in range(Ly):
        for x in range(Lx):
            i = idx(x, y)
            if family is Family.J1J2_2D:
                bonds.append(Bond(i, idx(x + 1, y + 1), "J2"))
                bonds.append(Bond(i, idx(x + 1, y - 1), "J2"))
            elif family is Family.CHECKERBOARD_2D and (x + y) % 2 == 0:
                bonds.append(Bond(i, idx(x + 1, y + 1), "JCROSS"))
                bonds.append(Bond(idx(x + 1, y), idx(x, y + 1), "JCROSS"))
    return Lattice(Lx * Ly, 2, (Lx, Ly), tuple(bonds), f"{family.value.lower()}_{Lx}x{Ly}", family)


def make_preset_lattice(family: Family | str, size: int | Sequence[int]) -> Lattice:
    """Build the PBC lattice used for ``family``.

    Chains accept an even ``size >= 4``; the 2D families accept ``(4, 4)`` only.
    """
    family = Family(family)
    if family.is_chain:
        n = size[0] if isinstance(size, (tuple, list)) and len(size) == 1 else size
        if not isinstance(n, (int, np.integer)) or n < 4 or n % 2:
            raise LatticeError(f"{family.value} needs an even number of sites >= 4, got {size!r}")
        return _chain(family, int(n))
    shape = tuple(size) if isinstance(size, (tuple, list)) else (size,)
    if shape not in SQUARE_SIZES:
        allowed = ", ".join(f"{a}x{b}" for a, b in SQUARE_SIZES)
        raise LatticeError(f"{family.value} supports sizes {allowed}, got {size!r}")
    return _square(family, *shape)


def preset_partition(lattice: Lattice) -> SublatticePartition:
    """Even sites on chains, the Neel sublattice on square clusters."""
    if lattice.dimension == 1:
        r = [i for i in range(lattice.num_sites) if i % 2 == 0]
    else:
        Lx, _ = lattice.shape
        r = [i for i in range(lattice.num_sites) if (i % Lx + i // Lx) % 2 == 0]
    return make_partition(lattice, r)


# ---------------------------------------------------------------------------
# automatic selection


def _is_translation_invariant(r: set[int], perms: list[list[int]]) -> bool:
    return all({p[i] for i in r} == r for p in perms)


def _exhaustive(lattice: Lattice) -> list[tuple[int, ...]]:
    n = lattice.num_sites
    combos = np.array(list(itertools.combinations(range(n), n // 2)), dtype=np.int64)
    masks = np.zeros(len(combos), dtype=np.int64)
    for col in combos.T:
        masks |= np.int64(1) << col
    cut = np.zeros(len(combos), dtype=np.int64)
    for b in lattice.bonds:
        cut += ((masks >> b.i) & 1) ^ ((masks >> b.j) & 1)
    best = cut.max()
    return [tuple(int(s) for s in c) for c in combos[cut == best]]


def _greedy(lattice: Lattice, start: Sequence[int]) -> tuple[int, ...]:
    r = set(start)
    current = count_cut_bonds(lattice, r)
    while True:
        best_gain, best_swap = 0, None
        b_sites = [s for s in range(lattice.num_sites) if s not in r]
        for a in sorted(r):
            for b in b_sites:
                trial = (r - {a}) | {b}
                gain = count_cut_bonds(lattice, trial) - current
                if gain > best_gain:
                    best_gain, best_swap = gain, (a, b)
        if best_swap is None:
            return tuple(sorted(r))
        a, b = best_swap
        r = (r - {a}) | {b}
        current += best_gain


def auto_partition(lattice: Lattice, budget: int = 200_000) -> SublatticePartition:
    """Balanced bipartition maximizing the number of cut bonds.

    Exhaustive over all ``C(N, N/2)`` subsets when ``N <= 20`` and the count
    fits in ``budget``; otherwise greedy pair swaps starting from the preset.
    Among equal cuts, partitions invariant under translations by two sites
    win, then the lexicographically smallest site list.
    """
    n = lattice.num_sites
    if n % 2:
        raise LatticeError(f"balanced bipartition required: N={n} is odd")
    if n <= 20 and comb(n, n // 2) <= budget:
        candidates = _exhaustive(lattice)
    else:
        candidates = [_greedy(lattice, preset_partition(lattice).r_sites)]
    perms = lattice.translations(step=2)
    canon = []
    for c in candidates:
        comp = tuple(s for s in range(n) if s not in set(c))
        canon.append(min(c, comp))
    invariant = [c for c in canon if _is_translation_invariant(set(c), perms)]
    chosen = min(invariant or canon)
    return make_partition(lattice, chosen)
