import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entroscope.eigensolver import lanczos_lowest
from entroscope.entanglement import (
    EntanglementError,
    ReducedDensityMatrix,
    entropy_of_spectrum,
    partial_trace,
    sublattice_entropy,
    von_neumann_entropy,
)
from entroscope.hamiltonian import ModelSpec, build_hamiltonian
from entroscope.hilbert import FullStateVector, Kind, enumerate_sector, popcount
from entroscope.lattice import Bond, Family, Lattice, make_partition, make_preset_lattice
from entroscope.validate import brute_force_rdm, free_fermion_hubbard_entropy


def chain(n):
    return Lattice(n, 1, (n,), tuple(Bond(i, i + 1, "NN") for i in range(n - 1)), f"open{n}")


def state(amps, kind=Kind.SPIN_HALF):
    amps = np.asarray(amps, dtype=float)
    n_bits = int(np.log2(len(amps)))
    return FullStateVector(amps, kind, n_bits if kind is Kind.SPIN_HALF else n_bits // 2)


def test_product_up_up():
    rho = partial_trace(state([1, 0, 0, 0]), make_partition(chain(2), [0]))
    assert np.array_equal(rho.matrix, [[1.0, 0.0], [0.0, 0.0]])
    assert von_neumann_entropy(rho).bits == 0.0


def test_bell_pair():
    rho = partial_trace(state(np.array([0, 1, -1, 0]) / np.sqrt(2)), make_partition(chain(2), [0]))
    assert np.allclose(rho.matrix, 0.5 * np.eye(2), atol=1e-15)
    assert von_neumann_entropy(rho).bits == pytest.approx(1.0, abs=1e-14)


def test_random_four_site_against_oracle():
    psi = np.random.default_rng(1).standard_normal(16)
    psi /= np.linalg.norm(psi)
    rho = partial_trace(state(psi), make_partition(chain(4), [0, 2])).matrix
    assert np.max(np.abs(rho - brute_force_rdm(psi, 4, [0, 2], [1, 3], False))) < 1e-12


@pytest.mark.parametrize("spectrum,bits", [([1.0], 0.0), ([0.5, 0.25, 0.25], 1.5), ([0.25] * 4, 2.0)])
def test_spectrum_entropies(spectrum, bits):
    assert entropy_of_spectrum(spectrum) == pytest.approx(bits, abs=1e-14)


def test_entropy_guards():
    with pytest.raises(EntanglementError, match="trace"):
        von_neumann_entropy(np.diag([0.5, 0.4]))
    with pytest.raises(EntanglementError, match="negative"):
        von_neumann_entropy(np.diag([1.1, -0.1]))
    # tiny negative eigenvalues are clamped
    v = von_neumann_entropy(np.diag([1.0 + 5e-13, -5e-13]))
    assert v.bits == 0.0 and v.spectrum.min() == 0.0


def test_two_site_singlet_ground_state():
    lat = Lattice(2, 1, (2,), (Bond(0, 1, "J1"),), "pair")
    h, basis = build_hamiltonian(ModelSpec(Family.J1J2_2D, lat), enumerate_sector(Kind.SPIN_HALF, 2, 0))
    s = sublattice_entropy(lanczos_lowest(h), basis, make_partition(lat, [0]))
    assert s.bits == pytest.approx(1.0, abs=1e-12)


def tfim_even_entropy(lam):
    spec = ModelSpec(Family.ISING_CHAIN, make_preset_lattice(Family.ISING_CHAIN, 10), {"lambda": lam})
    h, basis = build_hamiltonian(spec)
    return sublattice_entropy(lanczos_lowest(h), basis, make_partition(spec.lattice, [0, 2, 4, 6, 8])).bits


def test_tfim_strong_field_even_sublattice():
    # golden value from dense diagonalization of the same sector; every bond is cut,
    # so at lambda=2 the residual fluctuations still carry almost a bit
    assert tfim_even_entropy(2.0) == pytest.approx(0.9054655681481959, abs=1e-8)
    values = [tfim_even_entropy(lam) for lam in (2.0, 5.0, 10.0, 50.0)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[2] < 0.2 and values[3] < 5e-3


def test_hubbard_free_fermions_even_sites():
    spec = ModelSpec(Family.HUBBARD_CHAIN, make_preset_lattice(Family.HUBBARD_CHAIN, 6), {"U": 0.0, "V": 0.0})
    h, basis = build_hamiltonian(spec)
    s = sublattice_entropy(lanczos_lowest(h), basis, make_partition(spec.lattice, [0, 2, 4])).bits
    assert abs(s - free_fermion_hubbard_entropy(6, [0, 2, 4])) < 1e-8


def test_product_state_across_cut():
    rng = np.random.default_rng(5)
    a, b = rng.standard_normal(4), rng.standard_normal(8)
    psi = np.kron(a / np.linalg.norm(a), b / np.linalg.norm(b))  # sites 0,1 then 2,3,4
    for r in ([0, 1], [1, 0], [2, 3, 4]):
        assert von_neumann_entropy(partial_trace(state(psi), make_partition(chain(5), r))).bits < 1e-12


def test_fermion_product_state():
    # up electron on site 0 (mode 0), down electron on site 1 (mode 3); 2 sites, 4 modes
    psi = np.zeros(16)
    psi[0b1001] = 1.0
    for r in ([0], [1]):
        rho = partial_trace(state(psi, Kind.FERMION_SITE4), make_partition(chain(2), r))
        assert von_neumann_entropy(rho).bits == 0.0


def test_mismatched_state():
    with pytest.raises(EntanglementError):
        partial_trace(state(np.ones(8) / np.sqrt(8)), make_partition(chain(4), [0, 1]))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.booleans(), st.integers(0, 2**31 - 1), st.data())
def test_bounds_and_complement(n, fermion, seed, data):
    kind = Kind.FERMION_SITE4 if fermion and n <= 4 else Kind.SPIN_HALF
    d = 4 if kind is Kind.FERMION_SITE4 else 2
    psi = np.random.default_rng(seed).standard_normal(d**n)
    if kind is Kind.FERMION_SITE4:
        # physical fermion states have definite parity; mixed parity breaks Schmidt duality
        psi[popcount(np.arange(d**n)) % 2 == 1] = 0.0
    psi /= np.linalg.norm(psi)
    r = data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n - 1, unique=True))
    part = make_partition(chain(n), r)
    fs = FullStateVector(psi, kind, n)
    rho = partial_trace(fs, part)
    assert isinstance(rho, ReducedDensityMatrix)
    assert np.array_equal(rho.matrix, rho.matrix.T)
    assert abs(rho.trace - 1.0) < 1e-12
    assert np.linalg.eigvalsh(rho.matrix).min() > -1e-12
    s = von_neumann_entropy(rho).bits
    assert 0.0 <= s <= len(r) * np.log2(d) + 1e-12
    s_b = von_neumann_entropy(partial_trace(fs, make_partition(chain(n), part.b_sites))).bits
    assert abs(s - s_b) < 1e-10
    # internal order of the subsystem does not matter
    s_rev = von_neumann_entropy(partial_trace(fs, make_partition(chain(n), list(reversed(r))))).bits
    assert abs(s - s_rev) < 1e-12
