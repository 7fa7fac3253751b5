"""Independent oracles: each check pairs the production path with a second route."""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import gaussian_ising
from .eigensolver import SolverOptions, dense_lowest, lanczos_lowest
from .entanglement import partial_trace, sublattice_entropy, von_neumann_entropy
from .hamiltonian import ModelSpec, build_hamiltonian, default_basis
from .hilbert import FullStateVector, Kind, embed_full
from .lattice import Bond, Family, Lattice, make_partition, make_preset_lattice

TIGHT = SolverOptions(tol=1e-11, max_iter=2000)


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.name}: max error {self.max_error:.3e} (tol {self.tolerance:.0e})"
                f"{'; ' + self.detail if self.detail else ''}")


# ---------------------------------------------------------------------------
# brute-force partial trace


def _bubble_sign(modes: list[int], position: dict[int, int]) -> int:
    """Sign of sorting a creation string by ``position`` with adjacent swaps."""
    seq = list(modes)
    sign = 1
    for end in range(len(seq) - 1, 0, -1):
        for k in range(end):
            if position[seq[k]] > position[seq[k + 1]]:
                seq[k], seq[k + 1] = seq[k + 1], seq[k]
                sign = -sign
    return sign


def brute_force_rdm(amplitudes: np.ndarray, n_modes: int, r_modes: list[int], b_modes: list[int],
                    fermionic: bool) -> np.ndarray:
    """rho = sum_b <b|psi><psi|b> by explicit enumeration of basis strings."""
    order = list(r_modes) + list(b_modes)
    position = {m: k for k, m in enumerate(order)}
    dim_r, dim_b = 1 << len(r_modes), 1 << len(b_modes)
    coeff = np.zeros((dim_r, dim_b))
    for x, amp in enumerate(amplitudes):
        if amp == 0.0:
            continue
        occ = [m for m in range(n_modes) if (x >> (n_modes - 1 - m)) & 1]
        sign = _bubble_sign(occ, position) if fermionic else 1
        r_idx = sum(1 << (len(r_modes) - 1 - k) for k, m in enumerate(r_modes) if m in occ)
        b_idx = sum(1 << (len(b_modes) - 1 - k) for k, m in enumerate(b_modes) if m in occ)
        coeff[r_idx, b_idx] += sign * amp
    rho = np.zeros((dim_r, dim_r))
    for b in range(dim_b):
        col = coeff[:, b]
        rho += np.outer(col, col)
    return rho


def check_partial_trace(n_states: int = 100, seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(n_states):
        n = 4 + t % 3
        kind = Kind.SPIN_HALF if t % 2 == 0 else Kind.FERMION_SITE4
        n_modes = n if kind is Kind.SPIN_HALF else 2 * n
        psi = rng.standard_normal(1 << n_modes)
        if t % 4 == 3:
            psi[rng.random(psi.shape) < 0.7] = 0.0
        psi /= np.linalg.norm(psi)
        size = int(rng.integers(1, n))
        r = [int(s) for s in rng.permutation(n)[:size]]
        part = make_partition(_open_chain(n), r)
        rho = partial_trace(FullStateVector(psi, kind, n), part).matrix
        if kind is Kind.SPIN_HALF:
            r_modes, b_modes = list(part.r_sites), list(part.b_sites)
        else:
            r_modes = list(part.r_sites) + [n + s for s in part.r_sites]
            b_modes = list(part.b_sites) + [n + s for s in part.b_sites]
        oracle = brute_force_rdm(psi, n_modes, r_modes, b_modes, kind is Kind.FERMION_SITE4)
        worst = max(worst, float(np.max(np.abs(rho - oracle))))
    return CheckResult("brute-force partial trace (spin + fermion)", worst <= 1e-12, worst, 1e-12,
                       f"{n_states} random 4-6 site states")


def _open_chain(n: int) -> Lattice:
    return Lattice(n, 1, (n,), tuple(Bond(i, i + 1, "NN") for i in range(n - 1)), f"open_{n}")


# ---------------------------------------------------------------------------
# dense vs Lanczos


def _ring_heisenberg(n: int) -> Lattice:
    return Lattice(n, 1, (n,), tuple(Bond(i, (i + 1) % n, "J1") for i in range(n)), f"ring_{n}", Family.J1J2_2D)


def dense_vs_lanczos_cases():
    rng = np.random.default_rng(11)
    cases = []
    a = rng.standard_normal((50, 50))
    cases.append(("random 50x50", (a + a.T) / 2))
    a = rng.standard_normal((300, 300))
    cases.append(("random 300x300", (a + a.T) / 2))
    spec = ModelSpec(Family.ISING_CHAIN, make_preset_lattice(Family.ISING_CHAIN, 10), {"lambda": 1.0})
    cases.append(("Ising N=10 lambda=1", build_hamiltonian(spec)[0]))
    spec = ModelSpec(Family.HUBBARD_CHAIN, make_preset_lattice(Family.HUBBARD_CHAIN, 6), {"U": 4.0, "V": 1.5})
    cases.append(("Hubbard N=6 U=4 V=1.5", build_hamiltonian(spec)[0]))
    spec = ModelSpec(Family.J1J2_2D, _ring_heisenberg(12), {"J2": 0.0})
    cases.append(("Heisenberg ring N=12", build_hamiltonian(spec)[0]))
    return cases


def check_dense_vs_lanczos() -> CheckResult:
    worst = 0.0
    for name, h in dense_vs_lanczos_cases():
        w, _ = dense_lowest(h, 2)
        gs = lanczos_lowest(h, opts=TIGHT)
        worst = max(worst, abs(gs.energy - w[0]), abs(gs.excited_energy - w[1]))
    return CheckResult("dense vs Lanczos lowest energies", worst <= 1e-10, worst, 1e-10, "dims <= 2000")


# ---------------------------------------------------------------------------
# entropy symmetries


def _hubbard_ground(n: int = 6, U: float = 4.0, V: float = 1.0):
    spec = ModelSpec(Family.HUBBARD_CHAIN, make_preset_lattice(Family.HUBBARD_CHAIN, n), {"U": U, "V": V})
    h, basis = build_hamiltonian(spec)
    return spec, basis, lanczos_lowest(h, opts=TIGHT)


def check_complement_symmetry() -> CheckResult:
    worst = 0.0
    spec, basis, gs = _hubbard_ground()
    subsets = [[0, 2, 4], [0, 1], [1, 3, 4], [5]]
    for r in subsets:
        pa = make_partition(spec.lattice, r)
        pb = make_partition(spec.lattice, pa.b_sites)
        worst = max(worst, abs(sublattice_entropy(gs, basis, pa).bits - sublattice_entropy(gs, basis, pb).bits))
    for fam, size, c in ((Family.J1J2_2D, (4, 4), {"J2": 0.5}), (Family.ISING_CHAIN, 10, {"lambda": 0.8})):
        spec = ModelSpec(fam, make_preset_lattice(fam, size), c)
        h, basis = build_hamiltonian(spec)
        gs = lanczos_lowest(h, opts=TIGHT)
        n = spec.lattice.num_sites
        # both sides at most 10 sites: rho of the larger side is materialized too
        for r in (list(range(0, n, 2)), list(range(n - 10, n - 4)) if n > 10 else [0, 1, 2]):
            pa = make_partition(spec.lattice, r)
            pb = make_partition(spec.lattice, pa.b_sites)
            worst = max(worst, abs(sublattice_entropy(gs, basis, pa).bits - sublattice_entropy(gs, basis, pb).bits))
    return CheckResult("complement symmetry S(R) = S(B)", worst <= 1e-10, worst, 1e-10)


def check_fermion_relabel() -> CheckResult:
    spec, basis, gs = _hubbard_ground()
    worst = 0.0
    for base in ([0, 2, 4], [0, 1, 3], [1, 4]):
        ref = sublattice_entropy(gs, basis, make_partition(spec.lattice, base)).bits
        for perm in itertools.permutations(base):
            s = sublattice_entropy(gs, basis, make_partition(spec.lattice, list(perm))).bits
            worst = max(worst, abs(s - ref))
    return CheckResult("fermion relabel invariance", worst <= 1e-12, worst, 1e-12)


# ---------------------------------------------------------------------------
# free-fermion oracles


def ising_ed_ground(n: int, lam: float):
    spec = ModelSpec(Family.ISING_CHAIN, make_preset_lattice(Family.ISING_CHAIN, n), {"lambda": lam})
    h, basis = build_hamiltonian(spec)
    return spec, basis, lanczos_lowest(h, opts=TIGHT)


def check_gaussian_vs_ed(sizes=(8, 10, 12, 14), lams=(0.3, 0.7, 1.0, 1.5)) -> CheckResult:
    worst = 0.0
    for n in sizes:
        for lam in lams:
            spec, basis, gs = ising_ed_ground(n, lam)
            state = gaussian_ising.build_kernel(n, lam)
            full = embed_full(gs.vector, basis)
            for length in range(1, n // 2 + 1):
                block = list(range(length))
                ed = von_neumann_entropy(partial_trace(full, make_partition(spec.lattice, block))).bits
                worst = max(worst, abs(ed - gaussian_ising.subsystem_entropy(state, block).bits))
            even = list(range(0, n, 2))
            jw = von_neumann_entropy(partial_trace(full, make_partition(spec.lattice, even), jordan_wigner=True)).bits
            worst = max(worst, abs(jw - gaussian_ising.subsystem_entropy(state, even).bits))
            worst = max(worst, abs(gs.energy - state.ground_energy))
    return CheckResult("Gaussian vs ED (contiguous blocks, JW even sites, energies)", worst <= 1e-8, worst, 1e-8,
                       f"N in {list(sizes)}")


def free_fermion_hubbard_entropy(n: int, sites) -> float:
    """Entropy of the U=V=0 ring ground state on ``sites`` from the correlation matrix."""
    hop = np.zeros((n, n))
    for i in range(n):
        j = (i + 1) % n
        hop[i, j] = hop[j, i] = -1.0
    _, orb = np.linalg.eigh(hop)
    occ = orb[:, : n // 2]
    corr = occ @ occ.T
    c_r = corr[np.ix_(list(sites), list(sites))]
    p = np.clip(np.linalg.eigvalsh(c_r), 0.0, 1.0)
    # one spin species, doubled
    return 2.0 * gaussian_ising.entropy_from_nu(2.0 * p - 1.0)


def check_hubbard_free_fermion(n: int = 6) -> CheckResult:
    spec, basis, gs = _hubbard_ground(n, 0.0, 0.0)
    worst = 0.0
    for r in ([0, 2, 4], [0, 1, 2], [0, 3], [1, 2, 5]):
        s = sublattice_entropy(gs, basis, make_partition(spec.lattice, r)).bits
        worst = max(worst, abs(s - free_fermion_hubbard_entropy(n, r)))
    return CheckResult("Hubbard U=V=0 vs correlation matrix", worst <= 1e-8, worst, 1e-8)


CHECKS: list[Callable[[], CheckResult]] = [
    check_dense_vs_lanczos,
    check_partial_trace,
    check_complement_symmetry,
    check_fermion_relabel,
    check_gaussian_vs_ed,
    check_hubbard_free_fermion,
]


def run_all(checks=None) -> list[CheckResult]:
    results = []
    for fn in checks or CHECKS:
        t0 = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # a crashing check is a failing check
            res = CheckResult(fn.__name__, False, float("nan"), 0.0, f"raised {type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results
