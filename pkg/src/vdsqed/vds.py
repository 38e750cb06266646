"""Vacancy-like dressed states (VDS).

A VDS of an atom at site ``v`` is an eigenstate of the full single-excitation
Hamiltonian at exactly the bare atomic frequency ``omega0``. Its photonic part
vanishes at ``v`` and is an eigenstate of the bath with ``v`` deleted; the
atomic amplitude follows from ``g * eps + <v|H_B|psi> = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hamiltonian import (
    AtomSpec,
    BathGraph,
    assemble_bath,
    assemble_full,
    boundary_element,
    remove_site,
    vacancy_embed,
)
from .models import GapInfo, ModelParams, build_model
from .spectra import DEGENERACY_TOL, canonical_phase, count_levels, diagonalize, eigenvalues, find_ingap_states

EIGEN_TOL = 1e-8
BOUNDARY_TOL = 1e-12


class VDSError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DressedState:
    """``cos(theta) |e> + e^{i phi} sin(theta) |psi_hat>`` with ``psi_hat`` normalized.

    ``psi`` stores the full photonic part ``e^{i phi} sin(theta) psi_hat`` on
    the bath ``B`` (length ``M``), with an explicit zero at ``v``.
    """

    epsilon: complex
    psi: np.ndarray
    theta: float
    phi_angle: float
    eta: complex
    energy: float
    v: int
    psi_hat: np.ndarray = field(repr=False, default=None)

    def vector(self) -> np.ndarray:
        """Embedding in the single-atom basis ``(|e>, |0>, ..., |M-1>)``."""
        return np.concatenate([[self.epsilon], self.psi])

    @property
    def norm(self) -> float:
        return float(np.sqrt(abs(self.epsilon) ** 2 + np.sum(np.abs(self.psi) ** 2)))


def make_vds(bath: BathGraph, atom: AtomSpec, psi, check: bool = True) -> DressedState:
    """Dress a normalized ``B_v`` eigenstate ``psi`` (at ``atom.omega0``) into a VDS."""
    v = atom.v
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (bath.M - 1,):
        raise VDSError(f"psi must live on B_v (length {bath.M - 1}), got {psi.shape}")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-10:
        raise VDSError(f"psi must be normalized, |psi| = {nrm}")
    if check:
        Hv = assemble_bath(remove_site(bath, v)).dense()
        res = np.linalg.norm(Hv @ psi - atom.omega0 * psi)
        if res > EIGEN_TOL:
            raise VDSError(f"psi is not a B_v eigenstate at omega0 (residual {res:.3e})")
    be = boundary_element(bath, v, psi)
    full_hat = vacancy_embed(psi, v)
    if atom.g == 0:
        eta = 0j
    else:
        if abs(be) <= BOUNDARY_TOL:
            raise VDSError(
                "unbound/ill-conditioned VDS: <v|H_B|psi> vanishes, so theta -> pi/2"
            )
        eta = -atom.g / be
    theta = float(np.arctan(abs(eta)))
    phi = float(np.angle(eta)) + 0.0 if eta != 0 else 0.0  # + 0.0 drops a signed zero
    photon = np.exp(1j * phi) * np.sin(theta) * full_hat
    return DressedState(
        epsilon=complex(np.cos(theta)),
        psi=photon,
        theta=theta,
        phi_angle=phi,
        eta=complex(eta),
        energy=float(atom.omega0),
        v=v,
        psi_hat=full_hat,
    )


def verify_vds(ds: DressedState, bath: BathGraph, atom: AtomSpec) -> float:
    """``||H x - omega0 x||`` for the embedded dressed state ``x``."""
    H = assemble_full(bath, [atom]).dense()
    x = ds.vector()
    return float(np.linalg.norm(H @ x - atom.omega0 * x))


def vds_candidates(bath: BathGraph, v: int, tol: float = DEGENERACY_TOL) -> list[tuple[float, int]]:
    """Atom frequencies that seed a VDS at ``v``: the ``B_v`` levels with multiplicities."""
    return count_levels(eigenvalues(assemble_bath(remove_site(bath, v))), tol)


def find_vds(bath: BathGraph, atom: AtomSpec, tol: float = DEGENERACY_TOL) -> list[DressedState]:
    """All VDS at ``atom.omega0``.

    A degenerate ``B_v`` eigenspace is rotated so that at most one basis
    vector has a non-zero boundary element; the rest are photon-only dark
    states and are not returned.
    """
    es = diagonalize(assemble_bath(remove_site(bath, atom.v)))
    sel = np.flatnonzero(np.abs(es.values - atom.omega0) <= tol)
    if sel.size == 0:
        return []
    X = es.vectors[:, sel]
    b = np.array([boundary_element(bath, atom.v, X[:, k]) for k in range(sel.size)])
    if np.linalg.norm(b) <= BOUNDARY_TOL:
        return []
    if sel.size == 1:
        return [make_vds(bath, atom, X[:, 0], check=False)]
    bright = canonical_phase(X @ np.conj(b) / np.linalg.norm(b))
    return [make_vds(bath, atom, bright, check=False)]


# --- atom as a mirror -----------------------------------------------------


def semi_infinite_chain(L: int, J: float = 1.0, omega_c: float = 0.0) -> BathGraph:
    return build_model(ModelParams("chain", N=L, J=J, omega_c=omega_c, bc="open"))


def bic_scan(L: int, s: int, omega0: float, g: float = 0.1, J: float = 1.0, omega_c: float = 0.0,
             tol: float = EIGEN_TOL):
    """Bound VDS in a semi-infinite waveguide with the atom ``s + 1`` sites from the end.

    The ``s`` sites between the open end and the atom form a cavity; a bound
    VDS (a BIC, since the chain is gapless) exists iff that cavity has a mode
    at ``omega0``. Returns ``(exists, DressedState or None)``.
    """
    if not 0 <= s < L - 1:
        raise VDSError(f"need 0 <= s < L - 1, got s={s}, L={L}")
    bath = semi_infinite_chain(L, J, omega_c)
    atom = AtomSpec(omega0, g, s)
    if s == 0:
        return False, None
    seg = build_model(ModelParams("chain", N=s, J=J, omega_c=omega_c, bc="open")) if s >= 2 else None
    if seg is None:
        seg_es = diagonalize(np.array([[omega_c]], dtype=complex))
    else:
        seg_es = diagonalize(assemble_bath(seg))
    hit = np.flatnonzero(np.abs(seg_es.values - omega0) <= tol * J)
    if hit.size == 0:
        return False, None
    mode = seg_es.vectors[:, hit[0]]
    psi = np.zeros(L - 1, dtype=complex)
    psi[:s] = mode
    return True, make_vds(bath, atom, psi, check=False)


def full_spectrum_leakage(L: int, s: int, omega0: float, g: float = 0.1, J: float = 1.0,
                          omega_c: float = 0.0, tol: float = EIGEN_TOL):
    """Independent check of :func:`bic_scan` by diagonalizing the full chain + atom.

    Returns ``(n_levels, leakage)``: the number of full-H eigenvalues within
    ``tol`` of ``omega0`` and, for the one with the largest atomic weight, its
    photon probability beyond the atom (sites ``> s``) relative to its total
    photon probability. ``leakage`` is None when no level sits at ``omega0``.
    """
    bath = semi_infinite_chain(L, J, omega_c)
    es = diagonalize(assemble_full(bath, [AtomSpec(omega0, g, s)]), check=False)
    hit = np.flatnonzero(np.abs(es.values - omega0) <= tol)
    if hit.size == 0:
        return 0, None
    k = hit[np.argmax(np.abs(es.vectors[0, hit]))]
    photon = np.abs(es.vectors[1:, k]) ** 2
    return int(hit.size), float(photon[s + 1:].sum() / photon.sum())


@dataclass(frozen=True)
class NodeState:
    energy: float
    psi_v: float
    overlap: float
    left_weight: float
    epsilon: float


@dataclass(frozen=True)
class MirrorReport:
    omega0: float
    v: int
    node_states: tuple
    at_resonance: int
    dressed_at_resonance: int
    min_offresonant_psi_v: float


def unbound_vds_check(n_sites: int, omega0: float, g: float = 0.5, J: float = 1.0,
                      omega_c: float = 0.0, window: float = 0.1, node_tol: float = 1e-6,
                      snap: bool = True) -> MirrorReport:
    """Atom in the middle of a long open waveguide acting as a mirror.

    With odd ``n_sites`` the atom sits in the middle and both sides are
    identical, so each level of the vacancy chain is doubly degenerate: one
    bright combination dresses the atom (the VDS) and the mirror-odd one is a
    photon-only node state.

    In a finite chain the continuum of node states is discrete: a VDS needs
    ``omega0`` to be a level of the chain with the atom site removed. With
    ``snap`` the requested ``omega0`` is moved to the nearest such level
    (the reported ``omega0`` is the snapped one).

    Full-H eigenstates within ``window`` of ``omega0`` that vanish at the atom
    site (``|psi_v| <= node_tol``) are matched against standing waves
    ``sin(k |x - v|)`` on each side of the atom (``k`` from the chain
    dispersion); ``overlap`` is the squared norm of the projection onto the
    span of the left and right profiles.
    """
    if n_sites < 400:
        raise VDSError("the waveguide stand-in needs n_sites >= 400")
    if abs(omega0 - omega_c) >= 2 * J * 0.99:
        raise VDSError(f"omega0={omega0} is at or beyond the band edge; pick a frequency inside the band")
    bath = semi_infinite_chain(n_sites, J, omega_c)
    v = n_sites // 2
    if snap:
        levels = eigenvalues(assemble_bath(remove_site(bath, v)))
        omega0 = float(levels[np.argmin(np.abs(levels - omega0))])
    atom = AtomSpec(omega0, g, v)
    es = diagonalize(assemble_full(bath, [atom]), check=False)
    x = np.arange(n_sites)
    left = x < v
    right = x > v
    nodes = []
    other = []
    for k in np.flatnonzero(np.abs(es.values - omega0) <= window):
        vec = es.vectors[:, k]
        photon = vec[1:]
        if np.linalg.norm(photon) <= node_tol:
            continue  # the bare atom when g = 0
        amp_v = abs(photon[v])
        if amp_v > node_tol:
            other.append(amp_v)
            continue
        E = es.values[k]
        q = np.arccos(np.clip((omega_c - E) / (2 * J), -1, 1))
        prof = np.sin(q * np.abs(x - v))
        basis = np.zeros((n_sites, 2))
        basis[left, 0] = prof[left]
        basis[right, 1] = prof[right]
        basis /= np.linalg.norm(basis, axis=0)
        pn = photon / max(np.linalg.norm(photon), 1e-300)
        ov = float(np.sum(np.abs(basis.T @ pn) ** 2))
        nodes.append(
            NodeState(
                energy=float(E),
                psi_v=float(amp_v),
                overlap=ov,
                left_weight=float(np.sum(np.abs(photon[left]) ** 2)),
                epsilon=float(abs(vec[0])),
            )
        )
    res = [n for n in nodes if abs(n.energy - omega0) <= EIGEN_TOL]
    return MirrorReport(
        omega0=omega0,
        v=v,
        node_states=tuple(nodes),
        at_resonance=len(res),
        dressed_at_resonance=sum(1 for n in res if n.epsilon > node_tol),
        min_offresonant_psi_v=float(min(other)) if other else float("nan"),
    )


# --- detuning robustness --------------------------------------------------


@dataclass(frozen=True)
class RobustnessCurve:
    detunings: np.ndarray
    fidelity: np.ndarray
    energies: np.ndarray
    truncated: bool
    omega_psi: float


def vacancy_bound_state(bath: BathGraph, v: int, gap: GapInfo, margin: float = 0.01):
    """The unique in-gap eigenpair of ``B_v`` (raises if none or several)."""
    es = diagonalize(assemble_bath(remove_site(bath, v)), check=False)
    states = find_ingap_states(es, gap, margin)
    if not states:
        raise VDSError(f"no vacancy bound state inside gap {gap}")
    levels = count_levels([s[0] for s in states])
    if len(levels) > 1:
        raise VDSError(f"{len(levels)} distinct vacancy levels inside gap {gap}")
    if levels[0][1] > 1:
        raise VDSError("degenerate vacancy bound state; choose a basis explicitly")
    return states[0]


def detuning_robustness(bath: BathGraph, v: int, g: float, gap: GapInfo, detunings: Sequence[float],
                        margin: float = 0.01) -> RobustnessCurve:
    """Overlap of the exact in-gap dressed state with the resonant VDS versus detuning.

    For each ``dw`` the atom sits at ``omega_psi + dw``; the in-gap eigenstate of
    the full Hamiltonian with the largest atomic weight is compared with the
    VDS built at ``dw = 0``. Points where no dressed state remains inside the
    gap get ``nan`` and set ``truncated``.
    """
    omega_psi, psi = vacancy_bound_state(bath, v, gap, margin)
    ref = make_vds(bath, AtomSpec(omega_psi, g, v), psi, check=False).vector()
    ref = ref / np.linalg.norm(ref)
    lo = gap.lower + margin * gap.width
    hi = gap.upper - margin * gap.width
    det = np.asarray(detunings, dtype=float)
    fid = np.full(det.size, np.nan)
    ene = np.full(det.size, np.nan)
    truncated = False
    for n, dw in enumerate(det):
        es = diagonalize(assemble_full(bath, [AtomSpec(omega_psi + dw, g, v)]), check=False)
        sel = np.flatnonzero((es.values > lo) & (es.values < hi))
        if sel.size == 0:
            truncated = True
            continue
        k = sel[np.argmax(np.abs(es.vectors[0, sel]))]
        fid[n] = abs(np.vdot(es.vectors[:, k], ref)) ** 2
        ene[n] = es.values[k]
    return RobustnessCurve(det, fid, ene, truncated, float(omega_psi))
