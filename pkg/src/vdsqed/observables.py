"""Photon densities and bond currents.

The bond current ``I(i->j)`` is the probability flowing from site ``i`` to site
``j`` per unit time, fixed by the lattice continuity equation
``d|psi_i|^2/dt = -sum_j I(i->j)`` under ``i d psi/dt = H psi``. With
``H[i, j] = J_ij`` this gives ``I(i->j) = 2 Im(conj(psi_j) J_ji psi_i)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .hamiltonian import BathGraph


class FieldError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CurrentField:
    """Currents on the stored edges ``rows[k] -> cols[k]`` (antisymmetric by construction)."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    n_sites: int

    def current(self, i: int, j: int) -> float:
        hit = np.flatnonzero((self.rows == i) & (self.cols == j))
        if hit.size:
            return float(self.values[hit[0]])
        hit = np.flatnonzero((self.rows == j) & (self.cols == i))
        if hit.size:
            return -float(self.values[hit[0]])
        raise FieldError(f"no edge between sites {i} and {j}")

    def divergence(self) -> np.ndarray:
        """Net outflow ``sum_j I(i->j)`` at each site."""
        out = np.zeros(self.n_sites)
        np.add.at(out, self.rows, self.values)
        np.add.at(out, self.cols, -self.values)
        return out

    def restrict(self, mask) -> "CurrentField":
        mask = np.asarray(mask, dtype=bool)
        return CurrentField(self.rows[mask], self.cols[mask], self.values[mask], self.n_sites)


def probability_density(state) -> np.ndarray:
    return np.abs(np.asarray(state)) ** 2


def bond_currents(bath: BathGraph, state) -> CurrentField:
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (bath.M,):
        raise FieldError(f"state has shape {psi.shape}, bath has {bath.M} sites")
    # stored value is H[i, j]; H[j, i] = conj(H[i, j])
    I = 2 * np.imag(np.conj(psi[bath.cols]) * np.conj(bath.values) * psi[bath.rows])
    return CurrentField(bath.rows.copy(), bath.cols.copy(), I, bath.M)


def circulation(field: CurrentField, loop: Sequence[int]) -> float:
    """Signed sum of currents along the closed, oriented site cycle ``loop``."""
    loop = list(loop)
    if len(loop) < 2:
        raise FieldError("loop needs at least two sites")
    return float(sum(field.current(a, b) for a, b in zip(loop, loop[1:] + loop[:1])))


def current_extremum(field: CurrentField):
    """Edge of largest ``|I|``, its signed value, and the field rescaled by ``|I|_max``."""
    if field.values.size == 0:
        raise FieldError("empty current field")
    k = int(np.argmax(np.abs(field.values)))
    peak = float(field.values[k])
    scale = abs(peak)
    rescaled = field.values / scale if scale > 0 else np.zeros_like(field.values)
    return (int(field.rows[k]), int(field.cols[k])), peak, rescaled


def write_field_csv(path, bath: BathGraph, field: CurrentField, digits: int = 8) -> None:
    """Rows ``(i, j, x_i, y_i, x_j, y_j, I)`` for arrow plots."""
    pos = bath.positions if bath.positions is not None else np.zeros((bath.M, 2))
    fmt = f"{{:.{digits}g}}"
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "x_i", "y_i", "x_j", "y_j", "I"])
        for i, j, val in zip(field.rows, field.cols, field.values):
            w.writerow([int(i), int(j), *(fmt.format(float(c)) for c in (*pos[i], *pos[j], val))])


def ring_around(bath: BathGraph, v: int, radius: float) -> list[int]:
    """Sites at distance ``radius`` from site ``v``, ordered counter-clockwise.

    On the honeycomb, ``radius=1`` gives the triangle of nearest neighbours
    and ``radius=sqrt(3)`` the hexagon of next-nearest neighbours; both are
    closed loops of NNN bonds encircling ``v``. Vacancy-state fields are
    evaluated on the parent bath (with ``psi_v = 0``), so ``v`` is a valid index.
    """
    pos = bath.positions
    centre = pos[v]
    d = np.linalg.norm(pos - centre, axis=1)
    ring = np.flatnonzero(np.abs(d - radius) < 1e-6)
    ang = np.arctan2(pos[ring, 1] - centre[1], pos[ring, 0] - centre[0])
    return [int(i) for i in ring[np.argsort(ang, kind="stable")]]
