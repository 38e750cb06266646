"""Bloch Hamiltonians, Chern and winding numbers, Haldane phase diagram."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .hamiltonian import assemble_bath, remove_site
from .models import ModelParams, SQRT3, GapInfo, analytic_gap, build_model, site_index, unit_cell
from .spectra import eigenvalues

DEFAULT_NK = 24
SMALL_GAP = 0.05


class TopologyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BlochMap:
    """Bloch Hamiltonians on an ``Nk^dim`` grid of reduced momenta ``j / Nk``."""

    nk: int
    hk: np.ndarray  # shape (Nk,)*dim + (d, d)


def bloch_hamiltonian(p: ModelParams, kred) -> np.ndarray:
    """``H(k)`` for reduced momenta ``kred`` (in units of 2 pi), shape ``(..., dim)``."""
    uc = unit_cell(p)
    k = np.asarray(kred, dtype=float)
    if uc.dim == 1:
        k = k[..., None]
    d = len(uc.onsite)
    shape = k.shape[:-1]
    H = np.zeros(shape + (d, d), dtype=complex)
    H[..., np.arange(d), np.arange(d)] = uc.onsite
    for dst, src, R, val in uc.hoppings:
        ph = np.exp(-2j * np.pi * (k @ np.asarray(R, dtype=float)))
        H[..., dst, src] += val * ph
        H[..., src, dst] += np.conj(val * ph)
    return H


def bloch_map(p: ModelParams, nk: int) -> BlochMap:
    uc = unit_cell(p)
    axes = [np.arange(nk) / nk] * uc.dim
    grid = axes[0] if uc.dim == 1 else np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return BlochMap(nk, bloch_hamiltonian(p, grid))


def band_gap(p: ModelParams, nk: int = DEFAULT_NK, band: int = 0) -> GapInfo:
    """Gap between band ``band`` and ``band + 1`` sampled on the Bloch grid."""
    bm = bloch_map(p, nk)
    w = np.linalg.eigvalsh(bm.hk)
    lo = w[..., band].max()
    hi = w[..., band + 1].min()
    return GapInfo(0.5 * (lo + hi), max(hi - lo, 0.0))


def chern_number(p: ModelParams, nk: int = DEFAULT_NK, band: int = 0) -> int:
    """Chern number of band ``band`` from plaquette Berry fluxes on an ``nk x nk`` grid.

    Sign convention: C = (1 / 2 pi) sum over plaquettes of
    arg(U_1(k) U_2(k + e1) U_1(k + e2)^* U_2(k)^*) with link variables
    ``U_mu(k) = <u(k)|u(k + e_mu)>``.
    """
    if p.variant != "haldane":
        raise TopologyError("chern_number is implemented for the Haldane model")
    if analytic_gap(p).width <= 1e-6 * p.J:
        raise TopologyError(f"gap closed at m={p.m}, phi={p.phi}, t={p.t}")
    if analytic_gap(p).width < SMALL_GAP * p.J:
        nk = 2 * nk
    _, vecs = np.linalg.eigh(bloch_map(p, nk).hk)
    u = vecs[..., :, band]
    u1 = np.roll(u, -1, axis=0)
    u2 = np.roll(u, -1, axis=1)
    U1 = np.einsum("ijk,ijk->ij", u.conj(), u1)
    U2 = np.einsum("ijk,ijk->ij", u.conj(), u2)
    flux = np.angle(U1 * np.roll(U2, -1, axis=0) * np.conj(np.roll(U1, -1, axis=1)) * np.conj(U2))
    c = flux.sum() / (2 * np.pi)
    if abs(c - round(c)) > 1e-6:
        raise TopologyError(f"non-integer Berry flux sum {c}")
    return int(round(c))


def chiral_operator(p: ModelParams) -> np.ndarray:
    if p.variant == "ssh":
        return np.diag([1.0, -1.0]).astype(complex)
    if p.variant == "creutz":
        return np.array([[0, -1j], [1j, 0]])
    raise TopologyError(f"no chiral operator for variant {p.variant!r}")


def winding_number(p: ModelParams, nk: int = 256) -> int:
    """Winding of ``det q(k)`` where ``q`` is the off-diagonal block in the chiral basis.

    With the (a, b) cell convention and the +1 eigenvector of the chiral
    operator first, SSH gives -1 for ``delta > 0`` and 0 for ``delta < 0``;
    Creutz at ``alpha = +-pi/2`` gives ``-+1`` for ``|m| < 1``. Only the
    difference between phases is convention independent.
    """
    if p.variant == "ssh" and p.delta == 0:
        raise TopologyError("SSH at delta = 0 is gapless")
    if p.variant == "creutz" and abs(abs(p.m) - 1) < 1e-12:
        raise TopologyError("Creutz at |m| = 1 is gapless")
    G = chiral_operator(p)
    H = bloch_hamiltonian(p, np.arange(nk) / nk) - p.omega_c * np.eye(2)
    anti = np.abs(G @ H + H @ G).max()
    if anti > 1e-10:
        raise TopologyError(f"parameters break chiral symmetry (max |{{H, G}}| = {anti:.2e})")
    w, U = np.linalg.eigh(G)
    U = U[:, ::-1]  # +1 eigenvector first
    Hc = U.conj().T @ H @ U
    q = Hc[:, 0, 1]
    if np.min(np.abs(q)) < 1e-10:
        raise TopologyError("off-diagonal block vanishes on the grid (gap closed)")
    dphi = np.angle(np.roll(q, -1) / q)
    wind = dphi.sum() / (2 * np.pi)
    return int(round(wind))


# --- Haldane phase diagram ------------------------------------------------


@dataclass(frozen=True)
class PhasePoint:
    phi: float
    m_over_t: float
    gap: float
    chern: Optional[int]
    bs_exists: bool
    bs_energy: Optional[float]
    mesh: int


def vacancy_bs_exists(p: ModelParams, mesh: int, margin: float = 0.02, sub: str = "a"):
    """Whether a vacancy at the centre ``sub`` site seeds an in-gap state on a periodic ``mesh x mesh`` patch.

    The gap window comes from the vacancy-free spectrum of the same patch.
    Returns ``(exists, energy or None, bulk gap)``.
    """
    q = p.replace(Nx=mesh, Ny=mesh, bc="periodic")
    bath = build_model(q)
    w = eigenvalues(assemble_bath(bath))
    n = bath.M // 2
    lo, hi = w[n - 1], w[n]
    if hi - lo <= 1e-9:
        return False, None, 0.0
    gap = GapInfo(0.5 * (lo + hi), hi - lo)
    v = site_index(bath, (mesh // 2, mesh // 2), sub)
    wv = eigenvalues(assemble_bath(remove_site(bath, v)))
    inside = wv[(wv > gap.lower + margin * gap.width) & (wv < gap.upper - margin * gap.width)]
    if inside.size == 0:
        return False, None, gap.width
    return True, float(inside[np.argmin(np.abs(inside - gap.omega_mid))]), gap.width


def mesh_for_gap(gap: float, base: int = 12, cap: int = 30) -> int:
    """Patch size growing as the gap closes (bound-state size ~ J / gap), multiple of 3."""
    if gap <= 0:
        return base
    L = int(np.ceil(1.5 / gap))
    L = max(base, min(cap, L))
    return L + (-L) % 3


def phase_point(phi: float, m_over_t: float, t: float = 0.1, nk: int = DEFAULT_NK,
                base_mesh: int = 12, omega_c: float = 0.0) -> PhasePoint:
    p = ModelParams("haldane", m=m_over_t * t, t=t, phi=phi, omega_c=omega_c)
    gap = band_gap(p, nk).width
    try:
        chern = chern_number(p, nk)
    except TopologyError:
        chern = None
    mesh = mesh_for_gap(gap, base_mesh)
    exists, energy, _ = vacancy_bs_exists(p, mesh) if gap > 1e-9 else (False, None, 0.0)
    return PhasePoint(float(phi), float(m_over_t), float(gap), chern, bool(exists), energy, mesh)


def _phase_point_args(args):
    return phase_point(*args)


def phase_diagram(phi_grid: Sequence[float], mt_grid: Sequence[float], t: float = 0.1, nk: int = DEFAULT_NK,
                  base_mesh: int = 12, workers: int = 1) -> list[PhasePoint]:
    """Gap, Chern number and vacancy-BS existence on the ``phi x m/t`` grid (row-major in phi)."""
    from .parallel import parallel_map

    for phi in phi_grid:
        if not -np.pi - 1e-12 <= phi <= np.pi + 1e-12:
            raise TopologyError(f"phi={phi} outside [-pi, pi]")
    bound = 2 * 3 * SQRT3
    for mt in mt_grid:
        if abs(mt) > bound + 1e-9:
            raise TopologyError(f"m/t={mt} outside [-{bound:.4f}, {bound:.4f}]")
    tasks = [(float(phi), float(mt), t, nk, base_mesh) for phi in phi_grid for mt in mt_grid]
    return parallel_map(_phase_point_args, tasks, workers)
