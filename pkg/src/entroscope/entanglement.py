"""Sublattice reduced density matrices and von Neumann entropy (bits)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigensolver import GroundState
from .hilbert import FullStateVector, Kind, SectorBasis, embed_full, reorder_signs
from .lattice import SublatticePartition

TRACE_TOL = 1e-8
CLAMP_TOL = 1e-12


class EntanglementError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ReducedDensityMatrix:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))


@dataclass(frozen=True, eq=False)
class EntropyValue:
    """Entropy in bits; ``spectrum`` holds the eigenvalues of rho when known,
    ``modes`` the per-mode occupations of a Gaussian state."""

    bits: float
    spectrum: np.ndarray | None
    modes: np.ndarray | None = None


def mode_split(partition: SublatticePartition, kind: Kind) -> tuple[list[int], list[int]]:
    """Mode (bit-axis) order for the regrouped state: subsystem modes first.

    For fermion sites the subsystem keeps up modes before down modes, and so
    does the complement.
    """
    r, b = list(partition.r_sites), list(partition.b_sites)
    if kind is Kind.SPIN_HALF:
        return r, b
    n = partition.num_sites
    return r + [n + s for s in r], b + [n + s for s in b]


def partial_trace(
    state: FullStateVector,
    partition: SublatticePartition,
    kind: Kind | None = None,
    *,
    jordan_wigner: bool = False,
) -> ReducedDensityMatrix:
    """Trace out ``partition.b_sites`` from a pure state.

    Fermion amplitudes are first multiplied by the sign of moving the
    subsystem's creation operators in front of the rest. ``jordan_wigner=True``
    applies the same rule to a spin chain read as spinless fermions
    (down spin = occupied), giving the fermionic-mode entropy.
    """
    kind = Kind(kind or state.kind)
    n = state.num_sites
    if partition.num_sites != n:
        raise EntanglementError(f"partition covers {partition.num_sites} sites, state has {n}")
    n_bits = n if kind is Kind.SPIN_HALF else 2 * n
    amps = np.asarray(state.amplitudes, dtype=float)
    if amps.shape != (1 << n_bits,):
        raise EntanglementError(f"state length {amps.shape} does not match {kind.value} with {n} sites")
    r_modes, b_modes = mode_split(partition, kind)
    if kind is Kind.FERMION_SITE4 or jordan_wigner:
        nz = np.nonzero(amps)[0]
        amps = amps.copy()
        amps[nz] *= reorder_signs(nz, r_modes + b_modes)
    m = amps.reshape((2,) * n_bits).transpose(r_modes + b_modes).reshape(1 << len(r_modes), -1)
    return ReducedDensityMatrix(m @ m.T)


def von_neumann_entropy(rho: ReducedDensityMatrix | np.ndarray) -> EntropyValue:
    """S = -sum p log2 p over the spectrum of ``rho`` (0 log 0 = 0)."""
    mat = rho.matrix if isinstance(rho, ReducedDensityMatrix) else np.asarray(rho, dtype=float)
    tr = float(np.trace(mat))
    if abs(tr - 1.0) > TRACE_TOL:
        raise EntanglementError(f"density matrix trace {tr!r} deviates from 1")
    p = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    if p.min() < -CLAMP_TOL:
        raise EntanglementError(f"density matrix has negative eigenvalue {p.min():.3e}")
    p = np.clip(p, 0.0, 1.0)
    nz = p[p > 0.0]
    bits = float(-np.sum(nz * np.log2(nz)))
    return EntropyValue(max(bits, 0.0), np.sort(p)[::-1])


def entropy_of_spectrum(p) -> float:
    p = np.asarray(p, dtype=float)
    return von_neumann_entropy(np.diag(p)).bits


def sublattice_entropy(
    ground: GroundState,
    basis: SectorBasis,
    partition: SublatticePartition,
    *,
    jordan_wigner: bool = False,
) -> EntropyValue:
    full = embed_full(ground.vector, basis)
    return von_neumann_entropy(partial_trace(full, partition, jordan_wigner=jordan_wigner))
