import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vdsqed.hamiltonian import (
    AtomSpec,
    BathGraph,
    HamiltonianError,
    HermitianOperator,
    assemble_bath,
    assemble_full,
    boundary_element,
    dumps_bath,
    loads_bath,
    remove_site,
    vacancy_embed,
)
from vdsqed.models import ModelParams, build_model, site_index
from vdsqed.spectra import diagonalize, find_ingap_states
from vdsqed.models import analytic_gap


def dimer(J=1.0):
    return BathGraph.from_couplings([0.0, 0.0], [(0, 1, -J)])


def test_dimer_operator():
    H = assemble_bath(dimer(1.0)).dense()
    np.testing.assert_array_equal(H, [[0, -1], [-1, 0]])


def test_uncoupled_cavities_diagonal():
    H = assemble_bath(BathGraph.from_couplings([0.3, 0.3, 0.3], [])).dense()
    np.testing.assert_array_equal(H, 0.3 * np.eye(3))


def test_non_hermitian_pair_is_named():
    with pytest.raises(HamiltonianError, match=r"\(0, 1\)"):
        BathGraph.from_couplings([0, 0], [(0, 1, 1j), (1, 0, 1j)])


def test_conjugate_pair_accepted():
    b = BathGraph.from_couplings([0, 0], [(0, 1, 1j), (1, 0, -1j)])
    assert b.n_edges == 1
    assert assemble_bath(b).dense()[1, 0] == -1j


def test_self_coupling_and_duplicates_rejected():
    with pytest.raises(HamiltonianError):
        BathGraph.from_couplings([0, 0], [(1, 1, 0.5)])
    with pytest.raises(HamiltonianError):
        BathGraph.from_couplings([0, 0], [(0, 1, 0.5), (0, 1, 0.5)])


def test_haldane_patch_matches_naive_construction():
    p = ModelParams("haldane", Nx=2, Ny=2, t=0.1, phi=0.7, m=0.2)
    bath = build_model(p)
    naive = np.diag(bath.omega).astype(complex)
    for i, j, val in bath.couplings():
        naive[i, j] += val
        naive[j, i] += np.conj(val)
    w1 = np.linalg.eigvalsh(assemble_bath(bath).dense())
    w2 = np.linalg.eigvalsh(naive)
    np.testing.assert_allclose(w1, w2, atol=1e-12)


def test_remove_site_dimer_and_ring():
    bv = remove_site(dimer(), 0)
    assert bv.M == 1 and bv.n_edges == 0
    assert bv.parent.tolist() == [1]
    ring = build_model(ModelParams("chain", N=8, bc="periodic"))
    open_chain = remove_site(ring, 3)
    assert open_chain.M == 7 and open_chain.n_edges == 6
    ref = build_model(ModelParams("chain", N=7, bc="open"))
    np.testing.assert_allclose(np.linalg.eigvalsh(assemble_bath(open_chain).dense()),
                               np.linalg.eigvalsh(assemble_bath(ref).dense()), atol=1e-12)


def test_remove_site_out_of_range():
    with pytest.raises(HamiltonianError):
        remove_site(dimer(), 5)


def test_remove_site_composes_parent_map():
    b = build_model(ModelParams("chain", N=6, bc="open"))
    b2 = remove_site(remove_site(b, 1), 3)
    assert b2.parent.tolist() == [0, 2, 3, 5]


def test_ssh_vacancy_single_midgap_state():
    p = ModelParams("ssh", N=20, delta=0.5)
    bath = build_model(p)
    bv = remove_site(bath, site_index(bath, 10, "a"))
    assert bv.M == 39
    states = find_ingap_states(diagonalize(assemble_bath(bv)), analytic_gap(p))
    assert len(states) == 1
    assert abs(states[0][0]) < 1e-8


def test_readding_removed_site_restores_operator():
    p = ModelParams("creutz", N=5, m=0.3, alpha=0.4)
    b = build_model(p)
    v = 4
    bv = remove_site(b, v)
    H = assemble_bath(b).dense()
    rebuilt = np.zeros_like(H)
    keep = bv.parent
    rebuilt[np.ix_(keep, keep)] = assemble_bath(bv).dense()
    rebuilt[v, v] = b.omega[v]
    for i, val in b.neighbors(v):
        rebuilt[v, i] = val
        rebuilt[i, v] = np.conj(val)
    np.testing.assert_array_equal(rebuilt, H)


def test_assemble_full_structure():
    b = dimer()
    H0 = assemble_full(b, [AtomSpec(0.7, 0.0, 0)]).dense()
    np.testing.assert_array_equal(H0[0, 1:], 0)
    assert H0[0, 0] == 0.7
    H = assemble_full(b, [AtomSpec(0.0, 0.5, 0)]).dense()
    assert H.shape == (3, 3)
    assert np.min(np.abs(np.linalg.eigvalsh(H))) < 1e-14
    chain = build_model(ModelParams("chain", N=40, bc="open"))
    H2 = assemble_full(chain, [AtomSpec(0, 0.2, 3), AtomSpec(0, 0.2, 30)])
    assert H2.dim == 42
    assert H2.check_hermitian() == 0.0


def test_assemble_full_no_atoms_equals_bath():
    b = build_model(ModelParams("ssh", N=4, delta=0.2))
    np.testing.assert_array_equal(assemble_full(b, []).dense(), assemble_bath(b).dense())


def test_duplicate_atom_sites_rejected():
    with pytest.raises(HamiltonianError, match="duplicate"):
        assemble_full(dimer(), [AtomSpec(0, 0.1, 0), AtomSpec(0, 0.1, 0)])


def test_atom_coupling_must_be_real_nonnegative():
    with pytest.raises(HamiltonianError):
        AtomSpec(0.0, -0.1, 0)
    with pytest.raises(HamiltonianError):
        AtomSpec(0.0, 0.1j, 0)


def test_check_hermitian_flags_asymmetric_matrix():
    op = HermitianOperator(np.array([[0, 1], [0.5, 0]], dtype=complex), ("x", "y"))
    with pytest.raises(HamiltonianError):
        op.check_hermitian()


def test_boundary_element_examples():
    assert boundary_element(dimer(2.0), 0, np.array([1.0])) == -2.0
    chain = build_model(ModelParams("chain", N=10, bc="open"))
    psi = np.zeros(9)
    psi[6] = 1.0  # site 7 of the parent, far from v = 2
    assert boundary_element(chain, 2, psi) == 0
    with pytest.raises(HamiltonianError):
        boundary_element(chain, 2, np.zeros(10))


def test_boundary_element_creutz_matches_direct_sum():
    p = ModelParams("creutz", N=40, m=0.5, alpha=np.pi / 2)
    b = build_model(p)
    v = site_index(b, 0, "a")
    es = diagonalize(assemble_bath(remove_site(b, v)))
    (w, psi), = find_ingap_states(es, analytic_gap(p))
    full = vacancy_embed(psi, v)
    H = assemble_bath(b).dense()
    direct = sum(H[v, i] * full[i] for i in range(b.M) if i != v)
    assert abs(boundary_element(b, v, psi) - direct) < 1e-12


def test_serialization_round_trip_lossless():
    p = ModelParams("haldane", Nx=3, Ny=3, t=0.13, phi=0.3, m=0.1, bc="open")
    b = remove_site(build_model(p), 4)
    b2 = loads_bath(dumps_bath(b))
    np.testing.assert_array_equal(assemble_bath(b).dense(), assemble_bath(b2).dense())
    assert b2.labels == b.labels
    np.testing.assert_array_equal(b2.parent, b.parent)
    np.testing.assert_array_equal(b2.positions, b.positions)
    assert b2.boundary == "open" and b2.meta["variant"] == "haldane"


@settings(max_examples=40, deadline=None)
@given(
    M=st.integers(2, 7),
    seed=st.integers(0, 10_000),
)
def test_random_bath_is_hermitian_and_round_trips(M, seed):
    gen = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(M) for j in range(i + 1, M) if gen.random() < 0.6]
    coup = [(j, i, complex(gen.normal(), gen.normal())) for i, j in pairs]  # lower orientation
    b = BathGraph.from_couplings(gen.normal(size=M), coup)
    H = assemble_bath(b)
    assert H.check_hermitian() == 0.0
    for i, j, val in coup:
        assert H.dense()[i, j] == val
    np.testing.assert_array_equal(assemble_bath(loads_bath(dumps_bath(b))).dense(), H.dense())
