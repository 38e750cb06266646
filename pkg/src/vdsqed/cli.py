"""Command-line entry point: ``vdsqed run|sweep|validate <config>``.

Outputs (in ``--out`` or the config's ``output`` directory):

``results.json``
    config echo, tool version, payload (15 significant digits), per-table
    SHA-256 checksums and any per-point errors. No wall-clock data, so
    identical configs give byte-identical files.
``summary.txt``
    aligned table of headline numbers.
``<table>.csv``
    plot-ready tables at 8 significant digits.

Wall time is printed to stderr only.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .runner import ConfigError, ScenarioResult, load_config, run_scenario, run_sweep

RESULT_DIGITS = 15
CSV_DIGITS = 8


def _round(x: float, digits: int):
    if not math.isfinite(x):
        return None
    return float(f"{x:.{digits}g}")


def to_jsonable(obj, digits: int = RESULT_DIGITS):
    """Recursively convert numpy scalars/arrays, tuples and complex numbers; floats rounded."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist(), digits)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj), digits)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _round(obj.real, digits), "im": _round(obj.imag, digits)}
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if not math.isfinite(x) else f"{float(x):.{CSV_DIGITS}g}"
    return str(x)


def render_csv(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_cell(x) for x in row])
    return buf.getvalue().encode()


def render_summary(summary: dict) -> str:
    if not summary:
        return "(no summary)\n"
    width = max(len(k) for k in summary)
    lines = []
    for key, val in summary.items():
        lines.append(f"{key:<{width}}  {_csv_cell(val) if val is not None else 'n/a'}")
    return "\n".join(lines) + "\n"


def write_outputs(out: Path, doc: dict, tables: dict, summary_text: str) -> dict:
    """Write CSV tables, then ``results.json`` carrying their checksums."""
    out.mkdir(parents=True, exist_ok=True)
    checks = {}
    for name, (header, rows) in sorted(tables.items()):
        data = render_csv(header, rows)
        path = out / f"{name}.csv"
        path.write_bytes(data)
        checks[path.name] = {"sha256": hashlib.sha256(data).hexdigest(), "rows": len(rows)}
    (out / "summary.txt").write_text(summary_text)
    checks["summary.txt"] = {"sha256": hashlib.sha256(summary_text.encode()).hexdigest()}
    doc = dict(doc, files=checks)
    text = json.dumps(to_jsonable(doc), indent=1, sort_keys=True) + "\n"
    (out / "results.json").write_text(text)
    return doc


def _base_doc(cfg, command: str, seedless: bool) -> dict:
    return {
        "schema_version": 1,
        "tool": {"name": "vdsqed", "version": __version__},
        "command": command,
        "seedless": bool(seedless),
        "config": cfg.raw,
        "scenario": cfg.scenario,
    }


def cmd_run(cfg, out: Path, workers: int, seedless: bool) -> int:
    doc = _base_doc(cfg, "run", seedless)
    try:
        res = run_scenario(cfg, workers)
    except Exception as exc:  # numerical failure: keep a partial record
        doc.update(status="error", errors=[f"{type(exc).__name__}: {exc}"], payload={})
        write_outputs(out, doc, {}, render_summary({"status": "error"}))
        print(f"error: {exc}", file=sys.stderr)
        return 2
    doc.update(status="ok", errors=[], payload=res.payload, summary=res.summary)
    text = render_summary(res.summary)
    write_outputs(out, doc, res.tables, text)
    sys.stdout.write(text)
    return 0


def cmd_sweep(cfg, out: Path, workers: int, seedless: bool) -> int:
    if not cfg.axes:
        raise ConfigError("sweep: config has no sweep.axes")
    doc = _base_doc(cfg, "sweep", seedless)
    records = run_sweep(cfg, workers)
    keys: list[str] = []
    for rec in records:
        if rec["status"] == "ok":
            for k in rec["result"].summary:
                if k not in keys:
                    keys.append(k)
    axes = [ax.parameter for ax in cfg.axes]
    rows = []
    points = []
    for rec in records:
        res: ScenarioResult | None = rec.get("result")
        summ = res.summary if res is not None else {}
        rows.append([rec["index"], *[rec["params"][a] for a in axes], rec["status"],
                     *[summ.get(k, "") if summ.get(k) is not None else "" for k in keys]])
        entry = {"index": rec["index"], "params": rec["params"], "status": rec["status"]}
        if res is not None:
            entry.update(payload=res.payload, summary=res.summary)
        else:
            entry["error"] = rec["error"]
        points.append(entry)
    errors = [f"point {p['index']}: {p['error']}" for p in points if p["status"] == "error"]
    doc.update(status="ok" if not errors else "partial", errors=errors, points=points)
    tables = {"sweep": (["index", *axes, "status", *keys], rows)}
    n_ok = sum(1 for p in points if p["status"] == "ok")
    text = render_summary({"points": len(points), "ok": n_ok, "errors": len(errors)})
    write_outputs(out, doc, tables, text)
    sys.stdout.write(text)
    return 0 if not errors else 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vdsqed", description="Vacancy-like dressed states in photonic lattices.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run one scenario"), ("sweep", "run a scenario over a parameter grid"),
                           ("validate", "check a config without running it")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", type=Path)
        if name != "validate":
            sp.add_argument("--workers", type=int, default=None, help="worker processes (default: config value)")
            sp.add_argument("--out", type=Path, default=None, help="output directory (default: config value)")
            sp.add_argument("--seedless", action="store_true",
                            help="reserved; the pipeline uses no random numbers")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 1
    if args.command == "validate":
        n = 1
        for ax in cfg.axes:
            n *= len(ax.values)
        print(f"ok: scenario {cfg.scenario}, {n} point(s)")
        return 0
    workers = args.workers if args.workers is not None else cfg.workers
    if workers < 1:
        print("invalid --workers: must be >= 1", file=sys.stderr)
        return 1
    out = args.out if args.out is not None else Path(cfg.output or f"vdsqed-out/{cfg.scenario}")
    t0 = time.perf_counter()
    try:
        if args.command == "run":
            code = cmd_run(cfg, out, workers, args.seedless)
        else:
            code = cmd_sweep(cfg, out, workers, args.seedless)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 1
    print(f"wall time {time.perf_counter() - t0:.2f} s; outputs in {out}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
