import numpy as np
import pytest

from vdsqed.hamiltonian import BathGraph, HermitianOperator, assemble_bath, remove_site, vacancy_embed
from vdsqed.models import GapInfo, ModelParams, analytic_gap, build_model, center_cell, site_index
from vdsqed.spectra import (
    EigenSystem,
    canonical_phase,
    count_levels,
    diagonalize,
    eigenvalues,
    find_gaps,
    find_ingap_states,
    localization,
    mean_offset,
)


def test_two_by_two():
    es = diagonalize(np.array([[0, -1], [-1, 0]], dtype=complex))
    np.testing.assert_allclose(es.values, [-1, 1])


def test_random_hermitian_reconstruction():
    gen = np.random.default_rng(7)
    A = gen.normal(size=(50, 50)) + 1j * gen.normal(size=(50, 50))
    H = A + A.conj().T
    es = diagonalize(HermitianOperator(H, tuple(range(50))))
    X, w = es.vectors, es.values
    assert np.linalg.norm(H - X @ np.diag(w) @ X.conj().T) <= 1e-9
    assert np.all(np.diff(w) >= 0)
    np.testing.assert_allclose(X.conj().T @ X, np.eye(50), atol=1e-10)


def test_canonical_phase_largest_component_real_positive():
    gen = np.random.default_rng(1)
    V = gen.normal(size=(6, 4)) + 1j * gen.normal(size=(6, 4))
    C = canonical_phase(V)
    for k in range(4):
        i = np.argmax(np.abs(C[:, k]))
        assert C[i, k].real > 0 and abs(C[i, k].imag) < 1e-15
        # same ray
        assert abs(abs(np.vdot(C[:, k], V[:, k])) - np.linalg.norm(V[:, k]) ** 2) < 1e-12
    # ties go to the lowest index
    tie = canonical_phase(np.array([1j, -1j, 0.5]) / np.sqrt(2.25))
    assert tie[0].real > 0 and abs(tie[0].imag) < 1e-15


def test_ssh_bulk_gap_empty():
    p = ModelParams("ssh", N=32, delta=0.5)
    w = eigenvalues(assemble_bath(build_model(p)))
    assert not np.any(np.abs(w) < 1 - 1e-6)


def test_find_gaps_chain_ssh():
    chain = build_model(ModelParams("chain", N=200, bc="periodic"))
    assert find_gaps(eigenvalues(assemble_bath(chain)), 0.1) == []
    ssh = build_model(ModelParams("ssh", N=40, delta=0.5))
    gaps = find_gaps(diagonalize(assemble_bath(ssh)), 0.1)
    assert len(gaps) == 1
    assert gaps[0].omega_mid == pytest.approx(0.0, abs=1e-12)
    assert gaps[0].width == pytest.approx(2.0, abs=1e-9)


def test_ingap_states_examples():
    p = ModelParams("ssh", N=24, delta=0.5)
    b = build_model(p)
    es = diagonalize(assemble_bath(remove_site(b, site_index(b, 5, "a"))))
    states = find_ingap_states(es, analytic_gap(p))
    assert len(states) == 1 and abs(states[0][0]) <= 1e-8

    c = ModelParams("creutz", N=20, m=0.5, alpha=np.pi / 2)
    bc = build_model(c)
    es = diagonalize(assemble_bath(remove_site(bc, site_index(bc, 0, "a"))))
    states = find_ingap_states(es, analytic_gap(c))
    assert len(states) == 1
    assert abs(states[0][0] - analytic_gap(c).omega_mid) <= 1e-6


def test_count_levels():
    assert count_levels([0.0, 1e-10, 1.0, 2.0, 2.0]) == [(pytest.approx(5e-11), 2), (1.0, 1), (2.0, 2)]


def test_ipr_limits():
    line = build_model(ModelParams("chain", N=10, bc="open"))
    e = np.zeros(10)
    e[4] = 1
    assert localization(e, line, 4).ipr == 1.0
    u = np.ones(10) / np.sqrt(10)
    assert localization(u, line, 0).ipr == pytest.approx(0.1)


def test_localization_too_few_distances():
    b = BathGraph.from_couplings([0, 0], [(0, 1, -1.0)], labels=(((0,), "a"), ((1,), "a")))
    assert localization(np.array([1.0, 0.0]), b, 0).decay_length is None


def test_ssh_decay_length():
    delta = 0.5
    p = ModelParams("ssh", N=64, delta=delta)
    b = build_model(p)
    v = site_index(b, 32, "a")
    (_, psi), = find_ingap_states(diagonalize(assemble_bath(remove_site(b, v))), analytic_gap(p))
    xi = localization(vacancy_embed(psi, v), b, v).decay_length
    expected = 1 / np.log((1 + delta) / (1 - delta))
    assert abs(xi - expected) <= 0.1 * expected


def test_ssh_polarization_and_side_flip():
    offsets = []
    for delta in (0.5, -0.5):
        p = ModelParams("ssh", N=40, delta=delta)
        b = build_model(p)
        v = site_index(b, 20, "a")
        (_, psi), = find_ingap_states(diagonalize(assemble_bath(remove_site(b, v))), analytic_gap(p))
        full = vacancy_embed(psi, v)
        subs = np.array([lab[1] for lab in b.labels])
        assert np.sum(np.abs(full[subs == "a"]) ** 2) <= 1e-12
        offsets.append(mean_offset(full, b, v))
    assert np.sign(offsets[0]) == -np.sign(offsets[1]) != 0


def _ingap_count(p, bath, v, gap):
    es = diagonalize(assemble_bath(remove_site(bath, v)), check=False)
    return len(count_levels([w for w, _ in find_ingap_states(es, gap)]))


def test_at_most_one_vacancy_state_per_gap_1d():
    gen = np.random.default_rng(3)
    for _ in range(100):
        p = ModelParams("ssh", N=20, delta=float(gen.uniform(-0.95, 0.95)))
        b = build_model(p)
        assert _ingap_count(p, b, site_index(b, 3, "a"), analytic_gap(p)) <= 1
    for _ in range(100):
        p = ModelParams("creutz", N=16, m=float(gen.uniform(-0.95, 0.95)), alpha=float(gen.uniform(-np.pi, np.pi)))
        g = analytic_gap(p)
        if g.width < 1e-3:
            continue
        b = build_model(p)
        assert _ingap_count(p, b, site_index(b, 0, "a"), g) <= 1


@pytest.mark.slow
def test_at_most_one_vacancy_state_per_gap_haldane():
    gen = np.random.default_rng(4)
    checked = 0
    while checked < 100:
        p = ModelParams("haldane", Nx=9, Ny=9, t=0.1, phi=float(gen.uniform(-np.pi, np.pi)),
                        m=float(gen.uniform(-0.8, 0.8)))
        b = build_model(p)
        w = eigenvalues(assemble_bath(b))
        n = b.M // 2
        if w[n] - w[n - 1] < 0.05:
            continue
        gap = GapInfo(0.5 * (w[n - 1] + w[n]), w[n] - w[n - 1])
        assert _ingap_count(p, b, site_index(b, center_cell(p), "a"), gap) <= 1
        checked += 1


def test_eigensystem_pair():
    es = EigenSystem(np.array([1.0, 2.0]), np.eye(2))
    w, x = es.pair(1)
    assert w == 2.0 and x.tolist() == [0, 1]
    assert len(es) == 2
