"""Single-excitation Hamiltonians of atoms coupled to coupled-cavity baths.

A bath is a graph of cavities with on-site frequencies and complex Hermitian
couplings. The single-excitation sector of atoms + bath is spanned by the
atomic excited states ``|e_nu>`` (listed first) followed by the one-photon
states ``|i>``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Sequence

import numpy as np
import scipy.sparse as sp

HERMITIAN_ATOL = 1e-12
DENSE_LIMIT = 4096


class HamiltonianError(ValueError):
    """Raised for malformed baths, atoms or operators."""


@dataclass(frozen=True, eq=False)
class BathGraph:
    """Photonic bath: site frequencies plus Hermitian couplings.

    Couplings are stored once per unordered pair as ``(i, j, J_ij)`` with
    ``i < j``; the ``(j, i)`` element is implicitly ``conj(J_ij)``. Use
    :meth:`from_couplings` to build one from an arbitrary coupling list.

    Attributes
    ----------
    omega : (M,) float array
        On-site frequencies.
    rows, cols : (E,) int arrays
        Coupled pairs, ``rows < cols``.
    values : (E,) complex array
        ``H[rows, cols]``.
    labels : tuple or None
        Per-site labels ``(cell, sublattice)``; ``cell`` is a tuple of ints.
    positions : (M, 2) float array or None
        Real-space coordinates used for plotting exports.
    cell_size : int
        Sites per unit cell.
    interaction_range : int
        Coupling range in cells.
    boundary : str
        ``"periodic"`` or ``"open"``.
    parent : (M,) int array or None
        For vacancy baths, the site index in the parent bath of each site.
    """

    omega: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    labels: Optional[tuple] = None
    positions: Optional[np.ndarray] = None
    cell_size: int = 1
    interaction_range: int = 1
    boundary: str = "open"
    parent: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_couplings(cls, omega, couplings, **kwargs) -> "BathGraph":
        """Build a bath from frequencies and an ``(i, j, J_ij)`` list.

        Either orientation of a pair may be given; giving both is allowed only
        when they are complex conjugates of each other.
        """
        omega = np.asarray(omega, dtype=float).ravel()
        M = omega.size
        seen: dict[tuple[int, int], complex] = {}
        given: set[tuple[int, int]] = set()
        for entry in couplings:
            i, j, val = int(entry[0]), int(entry[1]), complex(entry[2])
            if not (0 <= i < M and 0 <= j < M):
                raise HamiltonianError(f"coupling ({i}, {j}) references a site outside 0..{M - 1}")
            if i == j:
                raise HamiltonianError(f"self-coupling on site {i}; put it in omega instead")
            if (i, j) in given:
                raise HamiltonianError(f"duplicate coupling entry ({i}, {j})")
            given.add((i, j))
            key, upper = ((i, j), val) if i < j else ((j, i), val.conjugate())
            if key in seen:
                if abs(seen[key] - upper) > HERMITIAN_ATOL:
                    raise HamiltonianError(
                        f"non-Hermitian coupling pair ({key[0]}, {key[1]}): "
                        f"J_ij={seen[key]!r} but conj(J_ji)={upper!r}"
                    )
                continue
            seen[key] = upper
        keys = sorted(seen)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        values = np.array([seen[k] for k in keys], dtype=complex)
        return cls(omega=omega, rows=rows, cols=cols, values=values, **kwargs)

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != self.M:
            raise HamiltonianError("labels must have one entry per site")
        if self.labels is not None and len(set(self.labels)) != len(self.labels):
            raise HamiltonianError("site labels must be unique")
        if np.any(self.rows >= self.cols):
            raise HamiltonianError("stored couplings must satisfy i < j")

    @property
    def M(self) -> int:
        return int(self.omega.size)

    @property
    def n_edges(self) -> int:
        return int(self.rows.size)

    def couplings(self):
        """Iterate over stored ``(i, j, J_ij)`` triples."""
        for i, j, val in zip(self.rows, self.cols, self.values):
            yield int(i), int(j), complex(val)

    def index_of(self, label) -> int:
        if self.labels is None:
            raise HamiltonianError("bath has no site labels")
        try:
            return self.labels.index(label)
        except ValueError:
            raise HamiltonianError(f"no site labelled {label!r}") from None

    def neighbors(self, v: int) -> list[tuple[int, complex]]:
        """Sites coupled to ``v`` with the element ``H[v, i]``."""
        out = []
        for i, j, val in self.couplings():
            if i == v:
                out.append((j, val))
            elif j == v:
                out.append((i, val.conjugate()))
        return out


@dataclass(frozen=True, eq=False)
class AtomSpec:
    """Two-level atom of frequency ``omega0`` coupled with ``g`` to site ``v``."""

    omega0: float
    g: float
    v: int

    def __post_init__(self):
        if not np.isrealobj(self.g) or self.g < 0:
            raise HamiltonianError(f"atom coupling g must be real and >= 0, got {self.g!r}")


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Hermitian matrix with basis labels; dense up to ``DENSE_LIMIT``."""

    matrix: Any
    basis: tuple

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.matrix.toarray()
        return self.matrix

    def check_hermitian(self, atol: float = HERMITIAN_ATOL) -> float:
        m = self.matrix
        dev = abs(m - m.conj().T)
        dev = dev.max() if dev.shape[0] else 0.0
        dev = float(dev)
        if dev > atol:
            raise HamiltonianError(f"operator not Hermitian: max |H - H^dag| = {dev:.3e}")
        return dev


def _site_labels(bath: BathGraph) -> tuple:
    if bath.labels is not None:
        return tuple(("site", lab) for lab in bath.labels)
    return tuple(("site", i) for i in range(bath.M))


def _build_matrix(diag: np.ndarray, rows, cols, vals, dim: int):
    r = np.concatenate([np.arange(dim), rows, cols])
    c = np.concatenate([np.arange(dim), cols, rows])
    d = np.concatenate([diag.astype(complex), vals, np.conj(vals)])
    if dim > DENSE_LIMIT:
        return sp.coo_matrix((d, (r, c)), shape=(dim, dim)).tocsr()
    out = np.zeros((dim, dim), dtype=complex)
    np.add.at(out, (r, c), d)
    return out


def assemble_bath(bath: BathGraph) -> HermitianOperator:
    """Bath Hamiltonian ``sum_i omega_i |i><i| + sum_ij J_ij |i><j|``."""
    mat = _build_matrix(bath.omega, bath.rows, bath.cols, bath.values, bath.M)
    return HermitianOperator(mat, _site_labels(bath))


def remove_site(bath: BathGraph, v: int) -> BathGraph:
    """Replace cavity ``v`` with a vacancy.

    Sites keep their relative order; ``parent`` of the result maps each new
    index back to the site index of the *original* bath (composing with any
    earlier removals).
    """
    M = bath.M
    if not 0 <= v < M:
        raise HamiltonianError(f"site {v} out of range 0..{M - 1}")
    keep = np.ones(M, dtype=bool)
    keep[v] = False
    new_index = np.cumsum(keep) - 1
    mask = (bath.rows != v) & (bath.cols != v)
    parent = np.flatnonzero(keep) if bath.parent is None else bath.parent[keep]
    return replace(
        bath,
        omega=bath.omega[keep].copy(),
        rows=new_index[bath.rows[mask]],
        cols=new_index[bath.cols[mask]],
        values=bath.values[mask].copy(),
        labels=None if bath.labels is None else tuple(l for k, l in zip(keep, bath.labels) if k),
        positions=None if bath.positions is None else bath.positions[keep].copy(),
        parent=parent,
        meta=dict(bath.meta),
    )


def vacancy_embed(psi_v: np.ndarray, v: int) -> np.ndarray:
    """Lift a state on ``B_v`` back to ``B`` with an explicit zero at ``v``."""
    psi_v = np.asarray(psi_v)
    return np.insert(psi_v.astype(complex), v, 0.0)


def assemble_full(bath: BathGraph, atoms: Sequence[AtomSpec]) -> HermitianOperator:
    """Single-excitation Hamiltonian of ``atoms`` coupled to ``bath``.

    The basis is ``(|e_0>, ..., |e_{n-1}>, |0>, ..., |M-1>)``.
    """
    n = len(atoms)
    sites = [a.v for a in atoms]
    for a in atoms:
        if not 0 <= a.v < bath.M:
            raise HamiltonianError(f"atom site {a.v} out of range 0..{bath.M - 1}")
    if len(set(sites)) != n:
        raise HamiltonianError(f"duplicate atom attachment sites: {sites}")
    diag = np.concatenate([[a.omega0 for a in atoms], bath.omega])
    rows = np.concatenate([np.arange(n), bath.rows + n])
    cols = np.concatenate([np.array(sites, dtype=np.int64) + n, bath.cols + n])
    vals = np.concatenate([np.array([a.g for a in atoms], dtype=complex), bath.values])
    mat = _build_matrix(diag, rows.astype(np.int64), cols.astype(np.int64), vals, n + bath.M)
    basis = tuple(("atom", k) for k in range(n)) + _site_labels(bath)
    return HermitianOperator(mat, basis)


def boundary_element(bath: BathGraph, v: int, psi: np.ndarray) -> complex:
    """``<v|H_B|psi> = sum_{i != v} J_{v,i} psi_i`` for ``psi`` living on ``B_v``."""
    psi = np.asarray(psi)
    if psi.shape != (bath.M - 1,):
        raise HamiltonianError(f"psi has shape {psi.shape}, expected ({bath.M - 1},) on B_v")
    total = 0j
    for i, val in bath.neighbors(v):
        total += val * psi[i if i < v else i - 1]
    return complex(total)


# --- serialization --------------------------------------------------------

SCHEMA_VERSION = 1


def _label_to_json(label):
    cell, sub = label
    return {"cell": list(cell), "sub": sub}


def bath_to_dict(bath: BathGraph) -> dict:
    """Structured-text form of a bath (see README for the schema)."""
    sites = []
    for i in range(bath.M):
        entry: dict = {"omega": float(bath.omega[i])}
        if bath.labels is not None:
            entry["label"] = _label_to_json(bath.labels[i])
        if bath.positions is not None:
            entry["pos"] = [float(x) for x in bath.positions[i]]
        if bath.parent is not None:
            entry["parent"] = int(bath.parent[i])
        sites.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "sites": sites,
        "couplings": [[i, j, val.real, val.imag] for i, j, val in bath.couplings()],
        "metadata": {
            "cell_size": bath.cell_size,
            "interaction_range": bath.interaction_range,
            "boundary": bath.boundary,
            **bath.meta,
        },
    }


def bath_from_dict(data: dict) -> BathGraph:
    sites = data["sites"]
    meta = dict(data.get("metadata", {}))
    omega = [s["omega"] for s in sites]
    labels = None
    if sites and all("label" in s for s in sites):
        labels = tuple((tuple(s["label"]["cell"]), s["label"]["sub"]) for s in sites)
    positions = None
    if sites and all("pos" in s for s in sites):
        positions = np.array([s["pos"] for s in sites], dtype=float)
    parent = None
    if sites and all("parent" in s for s in sites):
        parent = np.array([s["parent"] for s in sites], dtype=np.int64)
    couplings = [(c[0], c[1], complex(c[2], c[3])) for c in data["couplings"]]
    return BathGraph.from_couplings(
        omega,
        couplings,
        labels=labels,
        positions=positions,
        cell_size=int(meta.pop("cell_size", 1)),
        interaction_range=int(meta.pop("interaction_range", 1)),
        boundary=meta.pop("boundary", "open"),
        parent=parent,
        meta=meta,
    )


def dumps_bath(bath: BathGraph) -> str:
    # repr-exact floats make the round trip lossless
    return json.dumps(bath_to_dict(bath), indent=1)


def loads_bath(text: str) -> BathGraph:
    return bath_from_dict(json.loads(text))
