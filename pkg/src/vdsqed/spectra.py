"""Exact diagonalization, gap detection, in-gap states and localization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.sparse.csgraph import shortest_path
import scipy.sparse as sp

from .hamiltonian import BathGraph, HermitianOperator
from .models import GapInfo

DEGENERACY_TOL = 1e-8
DEFAULT_MARGIN = 0.01


class EigenError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending eigenvalues and matching orthonormal eigenvectors (columns)."""

    values: np.ndarray
    vectors: np.ndarray

    def __len__(self):
        return self.values.size

    def pair(self, k: int):
        return float(self.values[k]), self.vectors[:, k]


@dataclass(frozen=True)
class LocalizationMetrics:
    ipr: float
    decay_length: Optional[float]
    center: int


def canonical_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive.

    Ties (within 1e-12 relative) go to the lowest index.
    """
    vecs = np.array(vectors, dtype=complex, copy=True)
    single = vecs.ndim == 1
    if single:
        vecs = vecs[:, None]
    mags = np.abs(vecs)
    top = mags.max(axis=0)
    idx = np.argmax(mags >= top * (1 - 1e-12), axis=0)
    pivots = vecs[idx, np.arange(vecs.shape[1])]
    safe = np.where(np.abs(pivots) > 0, pivots, 1.0)
    vecs *= (np.abs(safe) / safe)[None, :]
    return vecs[:, 0] if single else vecs


def diagonalize(H, check: Optional[bool] = None) -> EigenSystem:
    """Full Hermitian eigendecomposition.

    Parameters
    ----------
    H : HermitianOperator or ndarray
    check : bool, optional
        Verify residual and orthonormality; defaults to on below dimension 1000.
    """
    mat = H.dense() if isinstance(H, HermitianOperator) else np.asarray(H)
    n = mat.shape[0]
    try:
        w, U = sla.eigh(mat, driver="evd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        w, U = np.linalg.eigh(mat)
        resid = np.linalg.norm(mat @ U - U * w, axis=0).max() if n else 0.0
        if resid > 1e-10 * max(n, 1):
            raise EigenError(f"eigensolver failed ({exc}); achieved residual {resid:.3e}") from exc
    U = canonical_phase(U)
    if check is None:
        check = n <= 1000
    if check and n:
        resid = np.linalg.norm(mat @ U - U * w, axis=0).max()
        ortho = np.abs(U.conj().T @ U - np.eye(n)).max()
        if resid > 1e-10 * n or ortho > 1e-10:
            raise EigenError(f"eigen-residual {resid:.3e}, orthonormality defect {ortho:.3e}")
    return EigenSystem(np.asarray(w, dtype=float), U)


def eigenvalues(H) -> np.ndarray:
    mat = H.dense() if isinstance(H, HermitianOperator) else np.asarray(H)
    return sla.eigvalsh(mat)


def find_gaps(es, min_width: float) -> list[GapInfo]:
    """Eigenvalue-free intervals wider than ``min_width`` between the extreme levels.

    ``es`` may be an :class:`EigenSystem` or a plain array of eigenvalues.
    """
    w = np.sort(es.values if isinstance(es, EigenSystem) else np.asarray(es))
    diffs = np.diff(w)
    out = []
    for k in np.flatnonzero(diffs > min_width):
        out.append(GapInfo(0.5 * (w[k] + w[k + 1]), float(diffs[k])))
    return out


def find_ingap_states(es_vacancy: EigenSystem, gap: GapInfo, margin: float = DEFAULT_MARGIN):
    """Eigenpairs strictly inside ``gap`` shrunk by ``margin * width`` per side."""
    lo = gap.lower + margin * gap.width
    hi = gap.upper - margin * gap.width
    sel = np.flatnonzero((es_vacancy.values > lo) & (es_vacancy.values < hi))
    return [(float(es_vacancy.values[k]), es_vacancy.vectors[:, k]) for k in sel]


def count_levels(values, tol: float = DEGENERACY_TOL) -> list[tuple[float, int]]:
    """Group sorted eigenvalues into ``(value, multiplicity)`` levels."""
    w = np.sort(np.asarray(values, dtype=float))
    levels: list[list] = []
    for x in w:
        if levels and x - levels[-1][2] <= tol:
            levels[-1][1] += 1
            levels[-1][2] = x
        else:
            levels.append([x, 1, x])
    return [(float(np.mean(w[(w >= a) & (w <= c)])), n) for a, n, c in levels]


def graph_distances(bath: BathGraph, source: int) -> np.ndarray:
    """Unweighted shortest-path distance (in hops) from ``source``."""
    adj = sp.coo_matrix(
        (np.ones(bath.n_edges), (bath.rows, bath.cols)), shape=(bath.M, bath.M)
    ).tocsr()
    return shortest_path(adj, directed=False, unweighted=True, indices=source)


def _cell_key(bath: BathGraph, i: int):
    return bath.labels[i][0] if bath.labels is not None else i


def localization(state, bath: BathGraph, center: int, floor: float = 1e-20) -> LocalizationMetrics:
    """Inverse participation ratio and exponential decay length of ``state``.

    The decay length is the amplitude length ``xi`` in cells, from a
    least-squares fit of ``log P_cell = c - 2 d / xi`` where ``P_cell`` is the
    cell-summed probability and ``d`` the hop distance from ``center`` divided
    by the sites per cell. Cells below ``floor * max P_cell`` are ignored.
    """
    psi = np.asarray(state)
    p = np.abs(psi) ** 2
    p = p / p.sum()
    ipr = float(np.sum(p**2))
    dist = graph_distances(bath, center)
    cells: dict = {}
    for i in range(bath.M):
        key = _cell_key(bath, i)
        P, d = cells.get(key, (0.0, np.inf))
        cells[key] = (P + p[i], min(d, dist[i]))
    P = np.array([v[0] for v in cells.values()])
    d = np.array([v[1] for v in cells.values()]) / max(bath.cell_size, 1)
    keep = np.isfinite(d) & (P > floor * P.max())
    decay = None
    if np.unique(d[keep]).size >= 3:
        slope, _ = np.polyfit(d[keep], np.log(P[keep]), 1)
        if slope < 0:
            decay = float(-2.0 / slope)
    return LocalizationMetrics(ipr=ipr, decay_length=decay, center=center)


def mean_offset(state, bath: BathGraph, center: int, axis: int = 0) -> float:
    """Probability-weighted mean displacement from ``center`` along ``axis``.

    Uses minimum-image displacements for periodic 1D baths (positions along
    the chain wrap with the number of cells).
    """
    p = np.abs(np.asarray(state)) ** 2
    p = p / p.sum()
    x = bath.positions[:, axis] - bath.positions[center, axis]
    if bath.boundary == "periodic" and bath.labels is not None:
        ncell = max(lab[0][axis] for lab in bath.labels) + 1
        x = (x + ncell / 2) % ncell - ncell / 2
    return float(np.sum(p * x))
