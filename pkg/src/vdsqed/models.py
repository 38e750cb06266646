"""Photonic baths used throughout: dimer, chain, SSH, Creutz ladder, Haldane.

Every lattice model is described by a unit cell (on-site frequencies, orbital
offsets and a hopping list). The same description drives both the finite
real-space :class:`~vdsqed.hamiltonian.BathGraph` and the Bloch Hamiltonian
used by :mod:`vdsqed.topology`, so the two can be checked against each other.

Conventions
-----------
* Energies are in units of ``J``; ``omega_c`` is an explicit offset.
* Chain: nearest-neighbour coupling ``-J``, so ``omega_k = omega_c - 2 J cos k``.
* SSH: cell ``(a, b)``; intracell ``J(1 - delta)``, intercell ``J(1 + delta)``.
* Creutz: vertical ``-2 m J``, diagonals ``J``, upper (a) row ``J e^{-i alpha}``
  and lower (b) row ``J e^{+i alpha}`` for hops from cell ``n`` to ``n + 1``.
* Haldane: a-sites at ``omega_c + m J``, b-sites at ``omega_c - m J``, NN ``J``,
  NNN ``t J e^{+i phi}`` for hops that turn left (counter-clockwise) through
  the intermediate site, i.e. ``e^{+i phi}`` along ``a1, a2 - a1, -a2`` on
  sublattice a and ``e^{-i phi}`` along the same vectors on sublattice b.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .hamiltonian import BathGraph

VARIANTS = ("dimer", "chain", "ssh", "creutz", "haldane")
SQRT3 = np.sqrt(3.0)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Parameters of one bath instance.

    Only the fields relevant to ``variant`` are used. ``N`` counts unit cells
    of the 1D models (sites for ``chain``); ``Nx, Ny`` the Haldane cells.
    """

    variant: str
    N: int = 2
    Nx: int = 2
    Ny: int = 2
    omega_c: float = 0.0
    J: float = 1.0
    delta: float = 0.0
    m: float = 0.0
    alpha: float = 0.0
    t: float = 0.0
    phi: float = 0.0
    bc: str = "periodic"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ModelError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.bc not in ("periodic", "open"):
            raise ModelError(f"bc must be 'periodic' or 'open', got {self.bc!r}")
        if self.J <= 0:
            raise ModelError("J must be positive")
        if self.variant in ("chain", "ssh", "creutz") and self.N < 2:
            raise ModelError("N must be >= 2")
        if self.variant == "haldane" and (self.Nx < 2 or self.Ny < 2):
            raise ModelError("Nx and Ny must be >= 2")
        if self.variant == "ssh" and abs(self.delta) > 1:
            raise ModelError(f"SSH dimerization |delta| <= 1 required, got {self.delta}")
        if self.variant == "creutz" and abs(self.m) > 1:
            raise ModelError(f"Creutz |m| <= 1 required, got {self.m}")

    def replace(self, **changes) -> "ModelParams":
        d = asdict(self)
        d.update(changes)
        return ModelParams(**d)


@dataclass(frozen=True)
class GapInfo:
    """A spectral gap given by its midpoint and width."""

    omega_mid: float
    width: float

    def __post_init__(self):
        if self.width < 0:
            raise ModelError("gap width must be non-negative")

    @property
    def lower(self) -> float:
        return self.omega_mid - 0.5 * self.width

    @property
    def upper(self) -> float:
        return self.omega_mid + 0.5 * self.width


@dataclass(frozen=True)
class UnitCell:
    """Translation-invariant description of a lattice.

    ``hoppings`` holds ``(dst, src, R, value)``: the element
    ``H[(cell + R, dst), (cell, src)] = value``. Each bond is listed once.
    """

    onsite: tuple
    sublattices: tuple
    offsets: np.ndarray
    lattice_vectors: np.ndarray
    hoppings: tuple
    dim: int
    interaction_range: int = 1
    extra: dict = field(default_factory=dict)


def unit_cell(p: ModelParams) -> UnitCell:
    J, wc = p.J, p.omega_c
    if p.variant == "chain":
        return UnitCell(
            onsite=(wc,), sublattices=("s",), offsets=np.zeros((1, 2)),
            lattice_vectors=np.array([[1.0, 0.0]]),
            hoppings=((0, 0, (1,), -J),), dim=1,
        )
    if p.variant == "ssh":
        return UnitCell(
            onsite=(wc, wc), sublattices=("a", "b"),
            offsets=np.array([[0.0, 0.0], [0.5, 0.0]]),
            lattice_vectors=np.array([[1.0, 0.0]]),
            hoppings=(
                (1, 0, (0,), J * (1 - p.delta)),
                (0, 1, (1,), J * (1 + p.delta)),
            ),
            dim=1,
        )
    if p.variant == "creutz":
        ea = np.exp(-1j * p.alpha)
        return UnitCell(
            onsite=(wc, wc), sublattices=("a", "b"),
            offsets=np.array([[0.0, 1.0], [0.0, 0.0]]),
            lattice_vectors=np.array([[1.0, 0.0]]),
            hoppings=(
                (1, 0, (0,), -2 * p.m * J),
                (0, 0, (1,), J * ea),
                (1, 1, (1,), J * np.conj(ea)),
                (1, 0, (1,), J),
                (0, 1, (1,), J),
            ),
            dim=1,
        )
    if p.variant == "haldane":
        nnn = p.t * J * np.exp(1j * p.phi)
        # lattice coords of a1, a2 - a1, -a2
        turns = ((1, 0), (-1, 1), (0, -1))
        hops = [
            (1, 0, (0, 0), J),
            (1, 0, (1, -1), J),
            (1, 0, (0, -1), J),
        ]
        hops += [(0, 0, R, nnn) for R in turns]
        hops += [(1, 1, R, np.conj(nnn)) for R in turns]
        return UnitCell(
            onsite=(wc + p.m * J, wc - p.m * J), sublattices=("a", "b"),
            offsets=np.array([[0.0, 0.0], [0.0, 1.0]]),
            lattice_vectors=np.array([[SQRT3, 0.0], [SQRT3 / 2, 1.5]]),
            hoppings=tuple(hops), dim=2,
        )
    raise ModelError(f"variant {p.variant!r} has no unit cell")


def _cells(p: ModelParams) -> tuple[int, ...]:
    if p.variant == "haldane":
        return (p.Nx, p.Ny)
    return (p.N,)


def lattice_from_cell(uc: UnitCell, shape: tuple[int, ...], periodic: bool, meta=None) -> BathGraph:
    """Finite lattice of ``shape`` cells (row-major, sublattice fastest)."""
    norb = len(uc.onsite)
    cells = list(itertools.product(*(range(n) for n in shape)))
    cell_index = {c: k for k, c in enumerate(cells)}
    omega = np.tile(np.asarray(uc.onsite, dtype=float), len(cells))
    labels = tuple((c, uc.sublattices[s]) for c in cells for s in range(norb))
    positions = np.array(
        [np.asarray(c, dtype=float) @ uc.lattice_vectors + uc.offsets[s] for c in cells for s in range(norb)]
    )
    acc: dict[tuple[int, int], complex] = {}
    for c in cells:
        for dst, src, R, val in uc.hoppings:
            target = tuple(ci + ri for ci, ri in zip(c, R))
            if periodic:
                target = tuple(ti % n for ti, n in zip(target, shape))
            elif any(not 0 <= ti < n for ti, n in zip(target, shape)):
                continue
            i = cell_index[target] * norb + dst
            j = cell_index[c] * norb + src
            if i == j:
                omega[i] += 2 * complex(val).real
                continue
            key, upper = ((i, j), complex(val)) if i < j else ((j, i), complex(val).conjugate())
            # small periodic systems can wrap two bonds onto one pair
            acc[key] = acc.get(key, 0j) + upper
    couplings = [(i, j, v) for (i, j), v in sorted(acc.items()) if v != 0]
    return BathGraph.from_couplings(
        omega,
        couplings,
        labels=labels,
        positions=positions,
        cell_size=norb,
        interaction_range=uc.interaction_range,
        boundary="periodic" if periodic else "open",
        meta=dict(meta or {}),
    )


def build_model(p: ModelParams) -> BathGraph:
    """Real-space bath for ``p``."""
    if p.variant == "dimer":
        return BathGraph.from_couplings(
            [p.omega_c, p.omega_c],
            [(0, 1, -p.J)],
            labels=(((0,), "v"), ((0,), "1")),
            positions=np.array([[0.0, 0.0], [1.0, 0.0]]),
            cell_size=2,
            boundary="open",
            meta={"variant": "dimer"},
        )
    uc = unit_cell(p)
    return lattice_from_cell(uc, _cells(p), p.bc == "periodic", meta={"variant": p.variant})


def analytic_gap(p: ModelParams) -> GapInfo:
    """Closed-form central bandgap of the SSH, Creutz and Haldane baths.

    For Haldane the width reported is ``||m| - 3 sqrt(3) t |sin phi|| J``,
    which is half the direct gap at the Dirac points (see :func:`haldane_full_gap`).
    """
    J, wc = p.J, p.omega_c
    if p.variant == "ssh":
        return GapInfo(wc, 4 * abs(p.delta) * J)
    if p.variant == "creutz":
        # band edges sit at k = 0 and k = pi; their differences are the four
        # quantities 4|m -+ 1| and 2(|m+1| + |m-1| +- 2 cos alpha)
        dp, dm = abs(p.m + 1), abs(p.m - 1)
        c = np.cos(p.alpha)
        lo = max(2 * c - 2 * dm, -2 * c - 2 * dp)
        hi = min(2 * c + 2 * dm, -2 * c + 2 * dp)
        if hi - lo <= 1e-12:
            return GapInfo(wc + 0.5 * (lo + hi) * J, 0.0)
        return GapInfo(wc + 0.5 * (lo + hi) * J, (hi - lo) * J)
    if p.variant == "haldane":
        width = abs(abs(p.m) - 3 * SQRT3 * p.t * abs(np.sin(p.phi)))
        return GapInfo(wc - 3 * p.t * np.cos(p.phi) * J, width * J)
    raise ModelError(f"no gap formula for variant {p.variant!r}")


def vacancy_bs_energy(p: ModelParams) -> float:
    """Closed-form energy of the bound state seeded by a single a-site vacancy.

    SSH: ``omega_c``; Creutz: ``omega_c + 2 m cos(alpha) J`` (inside the gap
    but at its centre only for ``cos(alpha) = 0``); Haldane: ``omega_c - 3 t cos(phi) J``.
    """
    if p.variant == "ssh":
        return float(p.omega_c)
    if p.variant == "creutz":
        return float(p.omega_c + 2 * p.m * np.cos(p.alpha) * p.J)
    if p.variant == "haldane":
        return float(p.omega_c - 3 * p.t * np.cos(p.phi) * p.J)
    raise ModelError(f"no bound-state formula for variant {p.variant!r}")


def haldane_full_gap(p: ModelParams) -> float:
    """Direct Dirac-point gap ``2 ||m| - 3 sqrt(3) t |sin phi|| J``."""
    return 2 * analytic_gap(p).width


def chain_dispersion(p: ModelParams, k) -> np.ndarray:
    """``omega_k = omega_c - 2 J cos k`` for the uniform chain."""
    if p.variant != "chain":
        raise ModelError("chain_dispersion only applies to the chain variant")
    return p.omega_c - 2 * p.J * np.cos(k)


def site_index(bath: BathGraph, cell, sub: str) -> int:
    """Index of the site labelled ``(cell, sub)``."""
    if isinstance(cell, int):
        cell = (cell,)
    return bath.index_of((tuple(cell), sub))


def center_cell(p: ModelParams) -> tuple[int, ...]:
    return tuple(n // 2 for n in _cells(p))


def honeycomb_nn_mask(bath: BathGraph) -> np.ndarray:
    """Nearest-neighbour (a-b) bonds of a honeycomb bath."""
    subs = np.array([lab[1] for lab in bath.labels])
    return subs[bath.rows] != subs[bath.cols]
