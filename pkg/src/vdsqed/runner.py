"""Scenario configs and the scenario implementations driven by the CLI.

A config is a JSON document::

    {
      "schema_version": 1,
      "scenario": "ssh-vds",
      "model": {"variant": "ssh", "N": 64, "delta": 0.5},
      "atoms": [{"g": 0.01, "site": {"cell": [32], "sub": "a"}}],
      "options": {"margin": 0.01},
      "sweep": {"axes": [{"parameter": "model.delta", "start": 0.2, "stop": 0.6, "steps": 5}]},
      "output": "out/ssh",
      "workers": 1
    }

Every scenario returns a :class:`ScenarioResult` holding a JSON-ready
payload, CSV tables and a flat summary of headline numbers.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .effective import coupling_column, coupling_matrix, splitting_oracle, vacancy_profile
from .hamiltonian import AtomSpec, BathGraph, assemble_bath, assemble_full, remove_site, vacancy_embed
from .models import (
    SQRT3,
    GapInfo,
    ModelParams,
    analytic_gap,
    build_model,
    center_cell,
    honeycomb_nn_mask,
    site_index,
    vacancy_bs_energy,
)
from .observables import bond_currents, circulation, ring_around
from .spectra import diagonalize, eigenvalues, find_ingap_states, localization, mean_offset
from .topology import band_gap, phase_diagram, winding_number
from .vds import (
    bic_scan,
    detuning_robustness,
    find_vds,
    full_spectrum_leakage,
    make_vds,
    unbound_vds_check,
    vacancy_bound_state,
    verify_vds,
)

SCHEMA_VERSION = 1
SCENARIOS = ("dimer", "mirror-bic", "ssh-vds", "creutz-vds", "haldane-vds", "heff", "phase-diagram", "robustness")
SWEEP_CAP = 10_000
TOP_KEYS = {"schema_version", "scenario", "model", "atoms", "options", "sweep", "output", "workers"}


class ConfigError(ValueError):
    pass


# --- config ---------------------------------------------------------------


@dataclass(frozen=True)
class SiteRef:
    """A bath site given either by index or by ``(cell, sublattice)`` label."""

    index: Optional[int] = None
    cell: Optional[tuple] = None
    sub: Optional[str] = None

    def resolve(self, bath: BathGraph, default_cell, default_sub: str) -> int:
        if self.index is not None:
            if not 0 <= self.index < bath.M:
                raise ConfigError(f"site index {self.index} outside bath of {bath.M} sites")
            return self.index
        cell = self.cell if self.cell is not None else default_cell
        sub = self.sub if self.sub is not None else default_sub
        try:
            return site_index(bath, cell, sub)
        except Exception as exc:
            raise ConfigError(f"no site with cell={list(cell)} sub={sub!r}") from exc


@dataclass(frozen=True)
class AtomConfig:
    g: float
    omega0: Optional[float] = None
    site: SiteRef = field(default_factory=SiteRef)


@dataclass(frozen=True)
class SweepAxis:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    model: ModelParams
    atoms: tuple
    options: dict
    axes: tuple = ()
    cap: int = SWEEP_CAP
    output: Optional[str] = None
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False, repr=False)


DEFAULT_MODELS = {
    "dimer": {"variant": "dimer"},
    "mirror-bic": {"variant": "chain", "N": 400, "bc": "open"},
    "ssh-vds": {"variant": "ssh", "N": 64, "delta": 0.5},
    "creutz-vds": {"variant": "creutz", "N": 20, "m": 0.5, "alpha": float(np.pi / 2)},
    "haldane-vds": {"variant": "haldane", "Nx": 30, "Ny": 30, "t": 0.1, "phi": float(np.pi / 2), "m": 0.0},
    "heff": {"variant": "creutz", "N": 20, "m": 0.5, "alpha": float(np.pi / 2)},
    "phase-diagram": {"variant": "haldane", "t": 0.1},
    "robustness": {"variant": "ssh", "N": 40, "delta": 0.5},
}

DEFAULT_OPTIONS: dict[str, dict] = {
    "dimer": {},
    "mirror-bic": {"s_values": [2, 3], "unbound_sites": 0, "unbound_omega0": 0.5, "unbound_g": 0.5},
    "ssh-vds": {"margin": 0.01, "flip": True},
    "creutz-vds": {"margin": 0.01},
    "haldane-vds": {"margin": 0.01, "flip_phi": True, "contrast": None},
    "heff": {"margin": 0.01, "oracle": True, "creutz_rules": False},
    "phase-diagram": {"phi_steps": 41, "mt_steps": 41, "nk": 24, "base_mesh": 12},
    "robustness": {"margin": 0.01, "g_over_gap": 0.01, "detuning_steps": 21, "detuning_span": 2.0},
}

DEFAULT_G = {
    "dimer": 1.0,
    "mirror-bic": 0.1,
    "ssh-vds": 0.01,
    "creutz-vds": 0.01,
    "haldane-vds": 0.01,
    "heff": 1e-3,
    "phase-diagram": 0.0,
    "robustness": None,
}


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    return float(value)


def _parse_site(raw, path: str) -> SiteRef:
    if raw is None:
        return SiteRef()
    if isinstance(raw, int) and not isinstance(raw, bool):
        return SiteRef(index=raw)
    if not isinstance(raw, dict):
        _fail(path, "expected an integer index or {cell, sub}")
    extra = set(raw) - {"cell", "sub"}
    if extra:
        _fail(path, f"unknown keys {sorted(extra)}")
    cell = raw.get("cell")
    if cell is not None:
        cell = (cell,) if isinstance(cell, int) else tuple(cell)
        if not all(isinstance(c, int) and not isinstance(c, bool) for c in cell):
            _fail(f"{path}.cell", "expected integers")
    sub = raw.get("sub")
    if sub is not None and not isinstance(sub, str):
        _fail(f"{path}.sub", "expected a string")
    return SiteRef(cell=cell, sub=sub)


def _parse_model(raw, scenario: str) -> ModelParams:
    merged = dict(DEFAULT_MODELS[scenario])
    if raw is not None:
        if not isinstance(raw, dict):
            _fail("model", "expected an object")
        if "variant" in raw and raw["variant"] != merged["variant"]:
            merged = {"variant": raw["variant"]}
        merged.update(raw)
    known = {f.name for f in fields(ModelParams)}
    for key in merged:
        if key not in known:
            _fail(f"model.{key}", f"unknown parameter (expected one of {sorted(known)})")
    try:
        return ModelParams(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc


def _axis_values(raw, path: str) -> tuple:
    if not isinstance(raw, dict):
        _fail(path, "expected an object")
    if "parameter" not in raw or not isinstance(raw["parameter"], str):
        _fail(f"{path}.parameter", "missing or not a string")
    if "values" in raw:
        vals = raw["values"]
        if not isinstance(vals, list) or not vals:
            _fail(f"{path}.values", "expected a non-empty list")
        return tuple(vals)
    for key in ("start", "stop", "steps"):
        if key not in raw:
            _fail(f"{path}.{key}", "missing (give start/stop/steps or values)")
    steps = raw["steps"]
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
        _fail(f"{path}.steps", f"expected a positive integer, got {steps!r}")
    start = _number(raw["start"], f"{path}.start")
    stop = _number(raw["stop"], f"{path}.stop")
    return tuple(float(x) for x in np.linspace(start, stop, steps))


def _check_axis_target(cfg_raw: dict, param: str, path: str) -> None:
    head, _, rest = param.partition(".")
    if head == "model":
        if rest not in {f.name for f in fields(ModelParams)}:
            _fail(path, f"{param!r} is not a model parameter")
    elif head == "options":
        if rest not in DEFAULT_OPTIONS[cfg_raw["scenario"]]:
            _fail(path, f"{param!r} is not an option of scenario {cfg_raw['scenario']!r}")
    elif head == "atoms":
        idx, _, key = rest.partition(".")
        if not idx.isdigit() or key not in ("g", "omega0"):
            _fail(path, f"{param!r}: atom axes look like 'atoms.<i>.g' or 'atoms.<i>.omega0'")
        if int(idx) >= max(len(cfg_raw.get("atoms") or [None]), 1):
            _fail(path, f"{param!r} refers to a missing atom")
    else:
        _fail(path, f"{param!r} must start with 'model.', 'options.' or 'atoms.'")


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a decoded config document; errors name the offending field."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(raw) - TOP_KEYS
    if extra:
        _fail(sorted(extra)[0], f"unknown top-level key (allowed: {sorted(TOP_KEYS)})")
    if raw.get("schema_version") != SCHEMA_VERSION:
        _fail("schema_version", f"expected {SCHEMA_VERSION}, got {raw.get('schema_version')!r}")
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        _fail("scenario", f"expected one of {list(SCENARIOS)}, got {scenario!r}")
    model = _parse_model(raw.get("model"), scenario)

    atoms_raw = raw.get("atoms")
    if atoms_raw is None:
        atoms_raw = [{}]
    if not isinstance(atoms_raw, list) or not atoms_raw:
        _fail("atoms", "expected a non-empty list")
    atoms = []
    for k, a in enumerate(atoms_raw):
        path = f"atoms[{k}]"
        if not isinstance(a, dict):
            _fail(path, "expected an object")
        extra = set(a) - {"g", "omega0", "site"}
        if extra:
            _fail(f"{path}.{sorted(extra)[0]}", "unknown key")
        g = a.get("g", DEFAULT_G[scenario])
        if g is not None:
            g = _number(g, f"{path}.g")
            if g < 0:
                _fail(f"{path}.g", "must be >= 0")
        w0 = a.get("omega0")
        if w0 is not None:
            w0 = _number(w0, f"{path}.omega0")
        atoms.append(AtomConfig(g=g, omega0=w0, site=_parse_site(a.get("site"), f"{path}.site")))

    opts = dict(DEFAULT_OPTIONS[scenario])
    given = raw.get("options") or {}
    if not isinstance(given, dict):
        _fail("options", "expected an object")
    for key, val in given.items():
        if key not in opts:
            _fail(f"options.{key}", f"unknown option for scenario {scenario!r} (allowed: {sorted(opts)})")
        opts[key] = val

    axes = []
    cap = SWEEP_CAP
    sweep = raw.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict):
            _fail("sweep", "expected an object")
        extra = set(sweep) - {"axes", "cap"}
        if extra:
            _fail(f"sweep.{sorted(extra)[0]}", "unknown key")
        cap = sweep.get("cap", SWEEP_CAP)
        if isinstance(cap, bool) or not isinstance(cap, int) or cap < 1:
            _fail("sweep.cap", "expected a positive integer")
        axes_raw = sweep.get("axes")
        if not isinstance(axes_raw, list) or not axes_raw:
            _fail("sweep.axes", "expected a non-empty list")
        for k, ax in enumerate(axes_raw):
            path = f"sweep.axes[{k}]"
            vals = _axis_values(ax, path)
            _check_axis_target(raw, ax["parameter"], f"{path}.parameter")
            axes.append(SweepAxis(ax["parameter"], vals))
        total = int(np.prod([len(a.values) for a in axes]))
        if total > cap:
            _fail("sweep", f"{total} grid points exceed the cap of {cap}")

    workers = raw.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        _fail("workers", "expected a positive integer")
    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        _fail("output", "expected a path string")
    return ScenarioConfig(scenario, model, tuple(atoms), opts, tuple(axes), cap, output, workers, raw)


def load_config(path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return parse_config(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def override(raw: dict, param: str, value) -> dict:
    """Copy of ``raw`` with the dotted ``param`` set to ``value`` (used by sweeps)."""
    out = copy.deepcopy(raw)
    out.pop("sweep", None)
    head, _, rest = param.partition(".")
    if head == "atoms":
        idx, _, key = rest.partition(".")
        atoms = out.setdefault("atoms", [{}])
        atoms[int(idx)][key] = value
    else:
        out.setdefault(head, {})[rest] = value
    return out


# --- results --------------------------------------------------------------


@dataclass
class ScenarioResult:
    payload: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    summary: dict = field(default_factory=dict)


def _c(z) -> dict:
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


def _gap_dict(gap: GapInfo) -> dict:
    return {"omega_mid": gap.omega_mid, "width": gap.width}


def _bulk_gap(bath: BathGraph) -> GapInfo:
    """Gap between the lower and upper halves of the bath spectrum (two-band models)."""
    w = eigenvalues(assemble_bath(bath))
    n = bath.M // 2
    return GapInfo(0.5 * (w[n - 1] + w[n]), max(float(w[n] - w[n - 1]), 0.0))


def _atom(cfg: ScenarioConfig, bath: BathGraph, k: int = 0, default_sub: str = "a",
          default_cell=None) -> tuple[AtomConfig, int]:
    if k >= len(cfg.atoms):
        raise ConfigError(f"scenario {cfg.scenario!r} needs at least {k + 1} atoms")
    a = cfg.atoms[k]
    cell = default_cell if default_cell is not None else center_cell(cfg.model)
    return a, a.site.resolve(bath, cell, default_sub)


def _profile_table(bath: BathGraph, psi) -> tuple:
    rows = []
    for i in range(bath.M):
        cell, sub = bath.labels[i]
        rows.append([i, " ".join(str(c) for c in cell), sub, *bath.positions[i],
                     abs(psi[i]) ** 2, psi[i].real, psi[i].imag])
    return (["i", "cell", "sub", "x", "y", "prob", "re", "im"], rows)


def _field_table(bath: BathGraph, fieldv, mask=None) -> tuple:
    rows = []
    for k in range(fieldv.values.size):
        if mask is not None and not mask[k]:
            continue
        i, j = int(fieldv.rows[k]), int(fieldv.cols[k])
        rows.append([i, j, *bath.positions[i], *bath.positions[j], fieldv.values[k]])
    return (["i", "j", "x_i", "y_i", "x_j", "y_j", "I"], rows)


def _vds_record(ds, residual: float) -> dict:
    return {
        "energy": ds.energy,
        "theta": ds.theta,
        "phi": ds.phi_angle,
        "tan_theta": float(np.tan(ds.theta)),
        "eta": _c(ds.eta),
        "epsilon": _c(ds.epsilon),
        "residual": residual,
    }


# --- scenarios ------------------------------------------------------------


def scenario_dimer(cfg: ScenarioConfig) -> ScenarioResult:
    p = cfg.model
    if p.variant != "dimer":
        raise ConfigError("dimer scenario needs model.variant = 'dimer'")
    bath = build_model(p)
    a, v = _atom(cfg, bath, default_sub="v", default_cell=(0,))
    w0 = p.omega_c if a.omega0 is None else a.omega0
    atom = AtomSpec(w0, a.g, v)
    found = find_vds(bath, atom)
    if not found:
        raise ConfigError(f"no VDS at omega0={w0}: the remaining cavity sits at {p.omega_c}")
    ds = found[0]
    res = verify_vds(ds, bath, atom)
    rec = _vds_record(ds, res)
    rec["g_over_J"] = a.g / p.J
    return ScenarioResult(
        {"vds": rec},
        summary={"theta": ds.theta, "phi": ds.phi_angle, "tan_theta": rec["tan_theta"],
                 "g_over_J": rec["g_over_J"], "residual": res},
    )


def scenario_mirror_bic(cfg: ScenarioConfig) -> ScenarioResult:
    p = cfg.model
    if p.variant != "chain":
        raise ConfigError("mirror-bic scenario needs model.variant = 'chain'")
    a = cfg.atoms[0]
    w0 = p.omega_c if a.omega0 is None else a.omega0
    o = cfg.options
    cases = []
    summary = {}
    for s in o["s_values"]:
        exists, ds = bic_scan(p.N, int(s), w0, a.g, p.J, p.omega_c)
        rec: dict[str, Any] = {"s": int(s), "exists": bool(exists)}
        if exists:
            bath = build_model(p)
            atom = AtomSpec(w0, a.g, int(s))
            rec.update(_vds_record(ds, verify_vds(ds, bath, atom)))
            photon = np.abs(ds.psi) ** 2
            rec["leakage"] = float(photon[int(s) + 1:].sum() / photon.sum())
        n_lev, leak = full_spectrum_leakage(p.N, int(s), w0, a.g, p.J, p.omega_c)
        rec["full_levels_at_omega0"] = n_lev
        rec["full_leakage"] = leak
        if leak is not None:
            summary[f"s{s}_full_leakage"] = leak
        summary[f"s{s}_exists"] = bool(exists)
        cases.append(rec)
    payload: dict[str, Any] = {"omega0": w0, "cases": cases}
    if o["unbound_sites"]:
        rep = unbound_vds_check(int(o["unbound_sites"]), float(o["unbound_omega0"]), float(o["unbound_g"]),
                                p.J, p.omega_c)
        payload["unbound"] = {
            "omega0": rep.omega0,
            "v": rep.v,
            "at_resonance": rep.at_resonance,
            "dressed_at_resonance": rep.dressed_at_resonance,
            "min_offresonant_psi_v": rep.min_offresonant_psi_v,
            "node_states": [
                {"energy": n.energy, "psi_v": n.psi_v, "overlap": n.overlap,
                 "left_weight": n.left_weight, "epsilon": n.epsilon}
                for n in rep.node_states
            ],
        }
        summary["unbound_omega0"] = rep.omega0
        summary["unbound_at_resonance"] = rep.at_resonance
        summary["unbound_dressed_at_resonance"] = rep.dressed_at_resonance
    return ScenarioResult(payload, summary=summary)


def _dressed_vacancy(cfg: ScenarioConfig, bath: BathGraph, gap: GapInfo, v: int, a: AtomConfig):
    w, psi = vacancy_bound_state(bath, v, gap, cfg.options["margin"])
    w0 = w if a.omega0 is None else a.omega0
    atom = AtomSpec(w0, a.g, v)
    ds = make_vds(bath, atom, psi, check=a.omega0 is not None)
    return w, psi, atom, ds


def scenario_ssh_vds(cfg: ScenarioConfig) -> ScenarioResult:
    p = cfg.model
    if p.variant != "ssh":
        raise ConfigError("ssh-vds scenario needs model.variant = 'ssh'")
    bath = build_model(p)
    a, v = _atom(cfg, bath)
    gap = analytic_gap(p)
    es = diagonalize(assemble_bath(remove_site(bath, v)), check=False)
    n_in = len(find_ingap_states(es, gap, cfg.options["margin"]))
    w, psi, atom, ds = _dressed_vacancy(cfg, bath, gap, v, a)
    full = ds.psi_hat
    subs = np.array([lab[1] for lab in bath.labels])
    wrong = float(np.sum(np.abs(full[subs == bath.labels[v][1]]) ** 2))
    loc = localization(full, bath, v)
    rec = _vds_record(ds, verify_vds(ds, bath, atom))
    expected = 1.0 / np.log((1 + abs(p.delta)) / (1 - abs(p.delta))) if abs(p.delta) < 1 else 0.0
    payload: dict[str, Any] = {
        "gap": _gap_dict(gap),
        "bulk_gap": _gap_dict(_bulk_gap(bath)),
        "n_ingap": n_in,
        "bs_energy": w,
        "bs_energy_expected": vacancy_bs_energy(p),
        "same_sublattice_weight": wrong,
        "mean_offset": mean_offset(full, bath, v),
        "decay_length": loc.decay_length,
        "decay_length_expected": float(expected),
        "ipr": loc.ipr,
        "winding": winding_number(p),
        "vds": rec,
    }
    summary = {"bs_energy": w, "n_ingap": n_in, "same_sublattice_weight": wrong,
               "mean_offset": payload["mean_offset"], "decay_length": loc.decay_length,
               "theta": ds.theta, "residual": rec["residual"]}
    if cfg.options["flip"]:
        q = p.replace(delta=-p.delta)
        qb = build_model(q)
        _, psi_f = vacancy_bound_state(qb, v, analytic_gap(q), cfg.options["margin"])
        payload["flipped_mean_offset"] = mean_offset(vacancy_embed(psi_f, v), qb, v)
        payload["flipped_winding"] = winding_number(q)
        summary["flipped_mean_offset"] = payload["flipped_mean_offset"]
    return ScenarioResult(payload, {"profile": _profile_table(bath, full)}, summary)


def creutz_reference_profile(bath: BathGraph, p: ModelParams, v_cell: int = 0) -> np.ndarray:
    """Closed-form vacancy bound state of a periodic Creutz ladder (vacancy on ``a`` of ``v_cell``).

    With cells ``n = 1..N`` counted from the vacancy cell (``n = 1``),
    ``psi_a(n) = A (e^{i alpha} m^{n-2} + e^{-i alpha} m^{N-n})`` and ``psi_b(n)``
    the same with both phase factors replaced by ``-1``, for ``n >= 2``;
    ``A = sqrt(1 - m^2) / 2`` and ``psi_b(1) = 0``.
    """
    N, m, al = p.N, p.m, p.alpha
    A = 0.5 * np.sqrt(1 - m * m)
    out = np.zeros(bath.M, dtype=complex)
    for i, ((c,), sub) in enumerate(bath.labels):
        n = (c - v_cell) % N + 1
        if n == 1:
            continue
        if sub == "a":
            out[i] = A * (np.exp(1j * al) * m ** (n - 2) + np.exp(-1j * al) * m ** (N - n))
        else:
            out[i] = -A * (m ** (n - 2) + m ** (N - n))
    return out


def scenario_creutz_vds(cfg: ScenarioConfig) -> ScenarioResult:
    p = cfg.model
    if p.variant != "creutz":
        raise ConfigError("creutz-vds scenario needs model.variant = 'creutz'")
    bath = build_model(p)
    a, v = _atom(cfg, bath, default_cell=(0,))
    gap = analytic_gap(p)
    w, psi, atom, ds = _dressed_vacancy(cfg, bath, gap, v, a)
    full = ds.psi_hat
    rec = _vds_record(ds, verify_vds(ds, bath, atom))
    payload: dict[str, Any] = {
        "gap": _gap_dict(gap),
        "bloch_gap": _gap_dict(band_gap(p, 512)),
        "bs_energy": w,
        "bs_energy_expected": vacancy_bs_energy(p),
        "vds": rec,
    }
    summary = {"bs_energy": w, "gap_width": gap.width, "theta": ds.theta, "phi": ds.phi_angle,
               "residual": rec["residual"]}
    vc = bath.labels[v][0][0]
    if p.bc == "periodic" and bath.labels[v][1] == "a":
        ref = creutz_reference_profile(bath, p, vc)
        fid = float(abs(np.vdot(ref / np.linalg.norm(ref), full)) ** 2)
        payload["reference_fidelity"] = fid
        summary["reference_fidelity"] = fid
    # phase chirality on the a-row: right tail (cells v+k) against left tail (v-k)
    chir = []
    for k in range(1, p.N // 2):
        r = full[site_index(bath, (vc + k) % p.N, "a")]
        lft = full[site_index(bath, (vc - k) % p.N, "a")]
        if min(abs(r), abs(lft)) < 1e-12:
            continue
        chir.append({"k": k, "abs_right": abs(r), "abs_left": abs(lft),
                     "phase_diff": float(np.angle(r * np.conj(lft)))})
    payload["chirality"] = chir
    if chir:
        summary["tail_phase_diff"] = chir[0]["phase_diff"]
        summary["tail_abs_asymmetry"] = max(abs(c["abs_right"] - c["abs_left"]) for c in chir)
    if abs(abs(np.cos(p.alpha))) < 1e-12 and abs(p.m) < 1:
        payload["winding"] = winding_number(p)
    return ScenarioResult(payload, {"profile": _profile_table(bath, full)}, summary)


def haldane_vacancy_field(p: ModelParams, g: float, margin: float = 0.01, cell=None, sub: str = "a"):
    """Vacancy bound state of a Haldane patch, its VDS and its bond-current field.

    Returns a dict with the bath, site, bulk gap, dressed state, current field
    (of the normalized photonic state ``psi_hat``) and circulation numbers.
    """
    bath = build_model(p)
    v = site_index(bath, cell if cell is not None else center_cell(p), sub)
    gap = _bulk_gap(bath)
    w, psi = vacancy_bound_state(bath, v, gap, margin)
    atom = AtomSpec(w, g, v)
    ds = make_vds(bath, atom, psi, check=False)
    fld = bond_currents(bath, ds.psi_hat)
    circ = {
        "nn_triangle": circulation(fld, ring_around(bath, v, 1.0)),
        "nnn_hexagon": circulation(fld, ring_around(bath, v, SQRT3)),
    }
    return {"bath": bath, "v": v, "gap": gap, "energy": w, "atom": atom, "vds": ds, "field": fld,
            "circulation": circ}


def dressed_ingap_field(p: ModelParams, g: float, margin: float = 0.01, cell=None, sub: str = "a"):
    """In-gap dressed state of the full Hamiltonian with the atom at mid-gap.

    The current field is that of the photonic part of the normalized
    atom+photon eigenvector (``I`` scales with the photon weight).
    """
    bath = build_model(p)
    v = site_index(bath, cell if cell is not None else center_cell(p), sub)
    gap = _bulk_gap(bath)
    es = diagonalize(assemble_full(bath, [AtomSpec(gap.omega_mid, g, v)]), check=False)
    lo = gap.lower + margin * gap.width
    hi = gap.upper - margin * gap.width
    sel = np.flatnonzero((es.values > lo) & (es.values < hi))
    if sel.size == 0:
        raise ConfigError(f"no in-gap dressed state at g={g}")
    k = sel[np.argmax(np.abs(es.vectors[0, sel]))]
    x = es.vectors[:, k]
    return {"bath": bath, "v": v, "gap": gap, "energy": float(es.values[k]), "n_ingap": int(sel.size),
            "atomic_weight": float(abs(x[0]) ** 2), "field": bond_currents(bath, x[1:])}


def scenario_haldane_vds(cfg: ScenarioConfig) -> ScenarioResult:
    p = cfg.model
    if p.variant != "haldane":
        raise ConfigError("haldane-vds scenario needs model.variant = 'haldane'")
    o = cfg.options
    a = cfg.atoms[0]
    cell = a.site.cell if a.site.cell is not None else center_cell(p)
    sub = a.site.sub or "a"
    r = haldane_vacancy_field(p, a.g, o["margin"], cell, sub)
    bath, v, fld, ds = r["bath"], r["v"], r["field"], r["vds"]
    ana = analytic_gap(p)
    div = fld.divergence()
    k = int(np.argmax(np.abs(fld.values)))
    imax = float(abs(fld.values[k]))
    phys = bond_currents(bath, ds.psi)
    payload: dict[str, Any] = {
        "gap": _gap_dict(r["gap"]),
        "analytic_gap": _gap_dict(ana),
        "gap_ratio_to_analytic": r["gap"].width / ana.width if ana.width > 0 else None,
        "bs_energy": r["energy"],
        "bs_energy_expected": vacancy_bs_energy(p),
        "vds": _vds_record(ds, verify_vds(ds, bath, r["atom"])),
        "kirchhoff_max": float(np.abs(div).max()),
        "circulation": r["circulation"],
        "I_max": imax,
        "I_max_edge": [int(fld.rows[k]), int(fld.cols[k])],
        "I_max_dressed": float(np.abs(phys.values).max()),
        "n_edges": int(fld.values.size),
    }
    summary = {"gap_width": r["gap"].width, "analytic_width": ana.width, "bs_energy": r["energy"],
               "theta": ds.theta, "phi": ds.phi_angle, "kirchhoff_max": payload["kirchhoff_max"],
               "circulation_triangle": r["circulation"]["nn_triangle"], "I_max": imax}
    if o["flip_phi"]:
        rf = haldane_vacancy_field(p.replace(phi=-p.phi), a.g, o["margin"], cell, sub)
        payload["flipped_circulation"] = rf["circulation"]
        payload["flipped_kirchhoff_max"] = float(np.abs(rf["field"].divergence()).max())
        summary["flipped_circulation_triangle"] = rf["circulation"]["nn_triangle"]
    if o["contrast"]:
        c = dict(o["contrast"])
        phi_c = float(c.get("phi", p.phi))
        mt = float(c["m_over_t"]) if "m_over_t" in c else 3 * SQRT3 * (1 + abs(np.sin(phi_c)))
        q = p.replace(phi=phi_c, m=mt * p.t)
        dr = dressed_ingap_field(q, float(c.get("g", a.g)), o["margin"], cell, sub)
        ref_dr = dressed_ingap_field(p, float(c.get("g", a.g)), o["margin"], cell, sub)
        cmax = float(np.abs(dr["field"].values).max())
        vmax = float(np.abs(ref_dr["field"].values).max())
        payload["contrast"] = {
            "phi": phi_c,
            "m_over_t": mt,
            "gap": _gap_dict(dr["gap"]),
            "analytic_gap": _gap_dict(analytic_gap(q)),
            "energy": dr["energy"],
            "n_ingap": dr["n_ingap"],
            "atomic_weight": dr["atomic_weight"],
            "I_max": cmax,
            "vds_dressed_I_max": vmax,
            "ratio_equal_g": vmax / cmax if cmax > 0 else None,
        }
        summary["contrast_ratio"] = payload["contrast"]["ratio_equal_g"]
    nn = honeycomb_nn_mask(bath) & (bath.rows != v) & (bath.cols != v)
    tables = {"currents_nn": _field_table(bath, fld, nn), "currents_all": _field_table(bath, fld)}
    return ScenarioResult(payload, tables, summary)


def coupling_profile_spread(bath: BathGraph, nu: int, g: float, gap: GapInfo, margin: float = 0.01,
                            floor: float = 1e-8) -> float:
    """Largest relative deviation of ``K[nu', nu] / psi^nu_{nu'}`` from its mean over all sites ``nu'``."""
    _, psi = vacancy_profile(bath, nu, gap, margin)
    col = coupling_column(bath, nu, g, gap, margin)
    keep = np.abs(psi) > floor
    keep[nu] = False
    ratios = col[keep] / psi[keep]
    mean = ratios.mean()
    return float(np.max(np.abs(ratios - mean)) / abs(mean))


def creutz_phase_rules(p: ModelParams, g: float, n: int = 0, n2: int = 2, margin: float = 0.01) -> dict:
    """``K`` between cells ``n`` and ``n2`` for aa, bb and ab pairs, and the sign-flipped-alpha aa."""
    gap = analytic_gap(p)

    def K(q, subs):
        b = build_model(q)
        atoms = [AtomSpec(0.0, g, site_index(b, c, s)) for c, s in zip((n, n2), subs)]
        return coupling_matrix(b, atoms, analytic_gap(q), margin).K

    aa = K(p, ("a", "a"))
    aa_m = K(p.replace(alpha=-p.alpha), ("a", "a"))
    bb = K(p, ("b", "b"))
    ab = K(p, ("a", "b"))
    ratio = []
    bath = build_model(p)
    for k in range(1, min(5, p.N // 2)):
        atoms = [AtomSpec(0.0, g, site_index(bath, n, "a")), AtomSpec(0.0, g, site_index(bath, n + k, "a")),
                 AtomSpec(0.0, g, site_index(bath, n + k + 1, "a"))]
        Km = coupling_matrix(bath, atoms, gap, margin).K
        ratio.append(Km[2, 0] / Km[1, 0])
    # ab is aa with the phase factor e^{i alpha} replaced by e^{i pi}
    aa_to_ab = aa[1, 0] * np.exp(1j * (np.pi - p.alpha))
    return {
        "aa": _c(aa[1, 0]),
        "aa_alpha_flipped": _c(aa_m[1, 0]),
        "bb": _c(bb[1, 0]),
        "ab": _c(ab[1, 0]),
        "bb_vs_aa_flipped": float(abs(bb[1, 0] - aa_m[1, 0]) / abs(aa_m[1, 0])),
        "ab_vs_aa_phase_pi": float(abs(ab[1, 0] - aa_to_ab) / abs(ab[1, 0])),
        "aa_phase": float(np.angle(aa[1, 0])),
        "cell_ratios": [_c(r) for r in ratio],
    }


def scenario_heff(cfg: ScenarioConfig) -> ScenarioResult:
    p = cfg.model
    o = cfg.options
    bath = build_model(p)
    gap = analytic_gap(p) if p.variant in ("ssh", "creutz") else _bulk_gap(bath)
    default_cell = (0,) if p.variant in ("ssh", "creutz") else center_cell(p)
    sites = [a.site.resolve(bath, default_cell, "a") for a in cfg.atoms]
    energies = [vacancy_profile(bath, s, gap, o["margin"])[0] for s in sites]
    atoms = [AtomSpec(a.omega0 if a.omega0 is not None else energies[k], a.g, s)
             for k, (a, s) in enumerate(zip(cfg.atoms, sites))]
    cm = coupling_matrix(bath, atoms, gap, o["margin"])
    H = cm.effective_hamiltonian()
    spreads = [coupling_profile_spread(bath, s, atoms[0].g, gap, o["margin"]) for s in sites]
    payload: dict[str, Any] = {
        "gap": _gap_dict(gap),
        "sites": list(sites),
        "labels": [[list(lab[0]), lab[1]] for lab in cm.labels],
        "bs_energies": energies,
        "K": [[_c(z) for z in row] for row in cm.K],
        "H_eff": [[_c(z) for z in row] for row in H],
        "profile_spread": spreads,
    }
    summary: dict[str, Any] = {"max_profile_spread": max(spreads)}
    if len(atoms) >= 2:
        summary["K_10_abs"] = float(abs(cm.K[1, 0]))
        summary["K_10_arg"] = float(np.angle(cm.K[1, 0])) if abs(cm.K[1, 0]) > 0 else 0.0
    if o["oracle"] and len(atoms) == 2:
        so = splitting_oracle(bath, atoms, gap, o["margin"])
        x = H[0, 1]
        rel = abs(abs(so.coupling) - abs(x)) / abs(x) if abs(x) > 0 else None
        dphase = float(np.angle(so.coupling * np.conj(x))) if so.resolved and abs(x) > 0 else None
        payload["oracle"] = {"coupling": _c(so.coupling), "resolved": so.resolved, "levels": list(so.levels),
                             "H_eff_01": _c(x), "rel_abs_error": rel, "phase_error": dphase}
        summary["oracle_rel_abs_error"] = rel
        summary["oracle_phase_error"] = dphase
    if o["creutz_rules"]:
        if p.variant != "creutz":
            raise ConfigError("options.creutz_rules needs a creutz model")
        rules = creutz_phase_rules(p, atoms[0].g)
        payload["creutz_rules"] = rules
        summary["bb_vs_aa_flipped"] = rules["bb_vs_aa_flipped"]
        summary["ab_vs_aa_phase_pi"] = rules["ab_vs_aa_phase_pi"]
    tables = {"coupling_matrix": (
        ["row", "col", "K_re", "K_im", "H_re", "H_im"],
        [[i, j, cm.K[i, j].real, cm.K[i, j].imag, H[i, j].real, H[i, j].imag]
         for i in range(len(atoms)) for j in range(len(atoms))],
    )}
    return ScenarioResult(payload, tables, summary)


def phase_diagram_grids(o: dict) -> tuple[np.ndarray, np.ndarray]:
    bound = 2 * 3 * SQRT3
    return (np.linspace(-np.pi, np.pi, int(o["phi_steps"])), np.linspace(-bound, bound, int(o["mt_steps"])))


def boundary_violations(points, phi_grid, mt_grid) -> list:
    """Grid points whose phase disagrees with ``|m| < 3 sqrt(3) t |sin phi|`` by more than one grid cell.

    A point counts as topological when its Chern number is +-1; gapless
    points (no Chern number) must themselves lie within a cell of the curve.
    """
    dm = float(mt_grid[1] - mt_grid[0]) if len(mt_grid) > 1 else np.inf
    out = []
    for pt in points:
        dist = abs(pt.m_over_t) - 3 * SQRT3 * abs(np.sin(pt.phi))
        if abs(dist) <= dm:
            continue
        topo = dist < 0
        if pt.chern is None or (abs(pt.chern) == 1) != topo:
            out.append((pt.phi, pt.m_over_t))
    return out


def scenario_phase_diagram(cfg: ScenarioConfig, workers: int = 1) -> ScenarioResult:
    p = cfg.model
    if p.variant != "haldane":
        raise ConfigError("phase-diagram scenario needs model.variant = 'haldane'")
    o = cfg.options
    phis, mts = phase_diagram_grids(o)
    pts = phase_diagram(phis, mts, p.t, int(o["nk"]), int(o["base_mesh"]), workers)
    rows = [[pt.phi, pt.m_over_t, pt.gap, "" if pt.chern is None else pt.chern, int(pt.bs_exists),
             "" if pt.bs_energy is None else pt.bs_energy, pt.mesh] for pt in pts]
    gapped = [pt for pt in pts if pt.chern is not None]
    mismatch = [(pt.phi, pt.m_over_t) for pt in gapped if (abs(pt.chern) == 1) != pt.bs_exists]
    viol = boundary_violations(pts, phis, mts)
    payload = {
        "t": p.t,
        "n_points": len(pts),
        "n_gapless": len(pts) - len(gapped),
        "n_topological": sum(1 for pt in gapped if abs(pt.chern) == 1),
        "n_bs_exists": sum(1 for pt in pts if pt.bs_exists),
        "chern_bs_mismatches": [list(x) for x in mismatch],
        "boundary_violations": [list(x) for x in viol],
    }
    summary = {"n_points": len(pts), "n_gapless": payload["n_gapless"], "n_topological": payload["n_topological"],
               "chern_bs_mismatches": len(mismatch), "boundary_violations": len(viol)}
    return ScenarioResult(payload, {"phase_diagram": (
        ["phi", "m_over_t", "gap", "chern", "bs_exists", "bs_energy", "mesh"], rows)}, summary)


def scenario_robustness(cfg: ScenarioConfig) -> ScenarioResult:
    p = cfg.model
    o = cfg.options
    bath = build_model(p)
    gap = analytic_gap(p) if p.variant in ("ssh", "creutz") else _bulk_gap(bath)
    a, v = _atom(cfg, bath)
    g = a.g if a.g is not None else float(o["g_over_gap"]) * gap.width
    span = float(o["detuning_span"]) * g
    det = np.linspace(-span, span, int(o["detuning_steps"]))
    curve = detuning_robustness(bath, v, g, gap, det, o["margin"])
    f = curve.fidelity
    within = np.abs(det) <= g * (1 + 1e-12)
    peak = int(np.nanargmax(f))
    finite = np.isfinite(f)
    left = f[: peak + 1][finite[: peak + 1]]
    right = f[peak:][finite[peak:]]
    peaked = bool(np.all(np.diff(left) >= -1e-12) and np.all(np.diff(right) <= 1e-12))
    payload = {
        "g": g,
        "gap": _gap_dict(gap),
        "omega_psi": curve.omega_psi,
        "truncated": curve.truncated,
        "peak_detuning": float(det[peak]),
        "min_fidelity_within_g": float(np.nanmin(f[within])),
        "monotone_peaked": peaked,
    }
    summary = {"g": g, "g_over_gap": g / gap.width, "peak_detuning": payload["peak_detuning"],
               "min_fidelity_within_g": payload["min_fidelity_within_g"], "monotone_peaked": peaked}
    rows = [[d, d / g if g else 0.0, fi, e] for d, fi, e in zip(det, f, curve.energies)]
    return ScenarioResult(payload, {"robustness": (["detuning", "detuning_over_g", "fidelity", "energy"], rows)},
                          summary)


SCENARIO_FUNCS: dict[str, Callable] = {
    "dimer": scenario_dimer,
    "mirror-bic": scenario_mirror_bic,
    "ssh-vds": scenario_ssh_vds,
    "creutz-vds": scenario_creutz_vds,
    "haldane-vds": scenario_haldane_vds,
    "heff": scenario_heff,
    "phase-diagram": scenario_phase_diagram,
    "robustness": scenario_robustness,
}


def run_scenario(cfg: ScenarioConfig, workers: int = 1) -> ScenarioResult:
    func = SCENARIO_FUNCS[cfg.scenario]
    if cfg.scenario == "phase-diagram":
        return func(cfg, workers)
    return func(cfg)


def _sweep_point(raw: dict) -> ScenarioResult:
    return run_scenario(parse_config(raw), workers=1)


def sweep_points(cfg: ScenarioConfig) -> list[tuple[dict, dict]]:
    """``(axis values, config document)`` for every grid point, first axis slowest."""
    grids = np.meshgrid(*[np.arange(len(a.values)) for a in cfg.axes], indexing="ij")
    out = []
    for idx in zip(*(g.ravel() for g in grids)):
        raw = copy.deepcopy(cfg.raw)
        values = {}
        for ax, k in zip(cfg.axes, idx):
            val = ax.values[int(k)]
            raw = override(raw, ax.parameter, val)
            values[ax.parameter] = val
        out.append((values, raw))
    return out


def run_sweep(cfg: ScenarioConfig, workers: int = 1) -> list[dict]:
    """Run every grid point; failures are recorded per point and the sweep carries on."""
    from .parallel import parallel_map_safe

    points = sweep_points(cfg)
    results = parallel_map_safe(_sweep_point, [raw for _, raw in points], workers)
    records = []
    for n, ((values, _), (status, value)) in enumerate(zip(points, results)):
        rec: dict[str, Any] = {"index": n, "params": values}
        if status == "ok":
            rec.update(status="ok", result=value)
        else:
            rec.update(status="error", error=value)
        records.append(rec)
    return records
