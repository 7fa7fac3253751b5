"""Free-fermion solution of the transverse-field Ising ring.

For H = -sum_i (sx_i sx_{i+1} + lambda sz_i) with periodic spins, the ground
state lives in the even fermion-parity sector, where the Jordan-Wigner
fermions obey antiperiodic boundary conditions: k = +-(2m-1) pi / N.
The Majorana two-point function is encoded in the kernel

    g(r) = (1/N) sum_k exp(-i k r) (cos k - lambda - i sin k) / |cos k - lambda - i sin k|

with g(r - N) = -g(r).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .entanglement import EntropyValue


class GaussianError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IsingGaussianState:
    N: int
    lam: float
    momenta: np.ndarray
    g_values: np.ndarray  # g(r), r = 0..N-1

    def g(self, r) -> np.ndarray:
        """Kernel at arbitrary integer offsets, using antiperiodicity."""
        r = np.asarray(r)
        wraps = np.floor_divide(r, self.N)
        sign = np.where(wraps % 2 == 0, 1.0, -1.0)
        return sign * self.g_values[np.mod(r, self.N)]

    @property
    def single_particle_energies(self) -> np.ndarray:
        return single_particle_energies(self.momenta, self.lam)

    @property
    def ground_energy(self) -> float:
        eps = self.single_particle_energies
        return float(-np.sum(eps[self.momenta > 0]))


def antiperiodic_momenta(N: int) -> np.ndarray:
    m = np.arange(1, N // 2 + 1)
    k = (2 * m - 1) * np.pi / N
    return np.concatenate([k, -k])


def single_particle_energies(momenta: np.ndarray, lam: float) -> np.ndarray:
    return 2.0 * np.sqrt(1.0 + lam * lam - 2.0 * lam * np.cos(momenta))


def build_kernel(N: int, lam: float) -> IsingGaussianState:
    if N % 2 or not 4 <= N <= 4096:
        raise GaussianError(f"chain length must be even and in [4, 4096], got {N}")
    if lam < 0 or not np.isfinite(lam):
        raise GaussianError(f"transverse field must be finite and >= 0, got {lam}")
    k = antiperiodic_momenta(N)
    c, s = np.cos(k), np.sin(k)
    phase = (c - lam - 1j * s) / np.sqrt((c - lam) ** 2 + s**2)
    r = np.arange(N)
    g = np.exp(-1j * np.outer(r, k)) @ phase / N
    return IsingGaussianState(N, float(lam), k, g)


def _kernel_block(state: IsingGaussianState, sites: Sequence[int]) -> np.ndarray:
    s = np.asarray(sites)
    return state.g(s[:, None] - s[None, :]).real


def restricted_covariance(state: IsingGaussianState, sites: Sequence[int]) -> np.ndarray:
    """Majorana covariance on ``sites``, ordered (a_0, b_0, a_1, b_1, ...)."""
    G = _kernel_block(state, sites)
    n = len(sites)
    gamma = np.zeros((2 * n, 2 * n))
    gamma[0::2, 1::2] = G
    gamma[1::2, 0::2] = -G.T
    return gamma


def covariance_spectrum(state: IsingGaussianState, sites: Sequence[int]) -> np.ndarray:
    """Eigenvalues of i*Gamma restricted to ``sites``, ascending (pairs +-nu)."""
    return np.linalg.eigvalsh(1j * restricted_covariance(state, sites))


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        hp = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        hq = np.where(q > 0, -q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return hp + hq


def entropy_from_nu(nu: np.ndarray) -> float:
    nu = np.clip(np.abs(np.asarray(nu, dtype=float)), 0.0, 1.0)
    return float(np.sum(_binary_entropy((1.0 + nu) / 2.0)))


def subsystem_entropy(state: IsingGaussianState, sites: Sequence[int]) -> EntropyValue:
    """Entropy (bits) of the Jordan-Wigner fermion modes on ``sites``.

    The +-nu pairs of i*Gamma are the singular values of the kernel block,
    which is what gets decomposed here.
    """
    sites = list(sites)
    if not sites or len(sites) >= state.N or len(set(sites)) != len(sites):
        raise GaussianError("sites must be a nonempty proper subset of the chain")
    if min(sites) < 0 or max(sites) >= state.N:
        raise GaussianError(f"sites outside 0..{state.N - 1}")
    nu = np.linalg.svd(_kernel_block(state, sites), compute_uv=False)
    nu = np.clip(nu, 0.0, 1.0)
    return EntropyValue(entropy_from_nu(nu), None, modes=(1.0 + nu) / 2.0)
