"""``dam-lab`` command line.

Exit codes: 0 success, 1 I/O failure, 2 invalid input or config.
Every command prints one line of JSON on standard output.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from dataclasses import asdict, fields
from typing import List, Optional

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, resolve_seed
from .core import Family, Formulation, InteractionSpec, NetworkConfig, Precision, as_memories, as_state
from .dynamics import probe_overflow, relax
from .experiments import (
    CSV_FIELDS,
    SweepResultRow,
    aggregate,
    default_jobs,
    generate_bipolar_dataset,
    optimal_cell,
    run_sweep,
)
from .training import train

EXIT_OK, EXIT_IO, EXIT_INVALID = 0, 1, 2
MEMORY_FORMAT = "dam-lab-memories"
AGGREGATIONS = ("mean", "median", "min", "max")


class UsageError(Exception):
    """Invalid user input; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


# -- serialisation -----------------------------------------------------------

def network_to_dict(cfg: NetworkConfig) -> dict:
    return {
        "formulation": cfg.formulation.value,
        "dim": cfg.dim,
        "family": cfg.interaction.family.value,
        "vertex": cfg.interaction.vertex,
        "leak": cfg.interaction.leak,
        "temperature": cfg.temperature,
        "precision": cfg.precision.value,
    }


def network_from_dict(d: dict) -> NetworkConfig:
    try:
        spec = InteractionSpec(d["family"], d["vertex"], d["leak"])
        return NetworkConfig(d["formulation"], d["dim"], spec, d["temperature"], d["precision"])
    except (KeyError, TypeError) as e:
        raise UsageError(f"memory file network section is invalid: {e}") from None


def grid_to_dict(grid) -> dict:
    d = asdict(grid)
    for key in ("formulation", "family", "precision"):
        d[key] = getattr(grid, key).value
    for key in ("vertices", "learning_rates", "inverse_temperatures"):
        d[key] = list(d[key])
    return d


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=True)


def _write_text(path: str, text: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _manifest(command: str, cfg: Optional[RunConfig], resolved: dict) -> str:
    body = {
        "tool": "dam-lab",
        "version": __version__,
        "command": command,
        "config_path": None if cfg is None else cfg.path,
        "resolved": resolved,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _plain(obj):
    # stdout stays strict JSON: non-finite reals become strings
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: List[SweepResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in rows:
        writer.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])
    return buf.getvalue()


_FIELD_TYPES = {f.name: f.type for f in fields(SweepResultRow)}


def rows_from_csv(text: str) -> List[SweepResultRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_FIELDS:
        raise UsageError(f"CSV header must be {','.join(CSV_FIELDS)}")
    rows = []
    for lineno, record in enumerate(reader, start=2):
        if not record:
            continue
        if len(record) != len(CSV_FIELDS):
            raise UsageError(f"CSV line {lineno}: expected {len(CSV_FIELDS)} columns")
        values = {}
        for name, raw in zip(CSV_FIELDS, record):
            try:
                values[name] = int(raw) if _FIELD_TYPES[name] in (int, "int") else float(raw)
            except ValueError:
                raise UsageError(f"CSV line {lineno}: bad {name} value {raw!r}") from None
        rows.append(SweepResultRow(**values))
    return rows


def write_memory_file(path, memories, states, network, train_cfg, data_seed):
    body = {
        "format": MEMORY_FORMAT,
        "network": network_to_dict(network),
        "train": asdict(train_cfg),
        "data_seed": data_seed,
        "memories": [[float(v) for v in row] for row in memories],
        "states": [[int(v) for v in row] for row in states],
    }
    _write_text(path, _dumps(body) + "\n")


def read_memory_file(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        body = json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from None
    if not isinstance(body, dict) or body.get("format") != MEMORY_FORMAT:
        raise UsageError(f"{path} is not a dam-lab memory file")
    network = network_from_dict(body.get("network", {}))
    try:
        memories = np.asarray(body["memories"], dtype=float)
        states = np.asarray(body.get("states", []), dtype=float)
    except (KeyError, ValueError, TypeError):
        raise UsageError(f"{path}: malformed memories") from None
    if memories.ndim != 2 or memories.shape[1] != network.dim:
        raise UsageError(f"{path}: memories must be K x {network.dim}")
    return network, memories, states


# -- commands ----------------------------------------------------------------

def cmd_train(args) -> dict:
    cfg = load_config(args.config)
    network = cfg.network_config()
    seed = resolve_seed(args.seed, cfg.train["seed"])
    tcfg = cfg.train_config(seed=seed)
    data_seed = cfg.data_seed(seed)
    states = generate_bipolar_dataset(cfg.patterns, network.dim, data_seed)
    memories, trace = train(states, tcfg, network)
    write_memory_file(args.output, memories, states, network, tcfg, data_seed)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "loss", "effective_lr", "max_abs_gradient", "nonfinite_count",
                "max_abs_intermediate"])
    for r in trace.records:
        w.writerow([r.epoch, repr(r.loss), repr(r.effective_lr), repr(r.max_abs_gradient),
                    r.overflow.nonfinite_count, repr(r.overflow.max_abs_intermediate)])
    _write_text(args.output + ".trace.csv", buf.getvalue())
    resolved = {"network": network_to_dict(network), "train": asdict(tcfg),
                "patterns": cfg.patterns, "data_seed": data_seed}
    _write_text(args.output + ".manifest.json", _manifest("train", cfg, resolved))
    return {
        "output": args.output,
        "memory_count": int(memories.shape[0]),
        "dim": network.dim,
        "epochs": len(trace),
        "final_loss": trace.final_loss,
        "overflow": trace.overflow.to_dict(),
    }


def _parse_probe(args, network, states):
    if args.probe is not None:
        text = args.probe
        if text.startswith("@"):
            with open(text[1:], encoding="utf-8") as fh:
                text = fh.read()
        text = text.strip()
        try:
            values = json.loads(text) if text.startswith("[") else [
                int(v) for v in text.replace(",", " ").split()]
        except ValueError:
            raise UsageError("probe must be a list of -1/+1 values") from None
    else:
        if states.ndim != 2 or states.shape[0] == 0:
            raise UsageError("memory file holds no training states; pass --probe")
        if not 0 <= args.state < states.shape[0]:
            raise UsageError(f"--state must be in [0, {states.shape[0]})")
        values = states[args.state]
    try:
        probe = as_state(values, network.dim).copy()
    except ValueError as e:
        raise UsageError(f"probe: {e}") from None
    if args.flips:
        if args.flips > network.dim:
            raise UsageError("--flips exceeds the state dimension")
        rng = np.random.default_rng(args.flip_seed)
        idx = rng.choice(network.dim, size=args.flips, replace=False)
        probe[idx] *= -1
    return probe


def cmd_relax(args) -> dict:
    network, memories, states = read_memory_file(args.memories)
    try:
        as_memories(memories, network.dim)
    except ValueError as e:
        raise UsageError(f"{args.memories}: {e}") from None
    probe = _parse_probe(args, network, states)
    res = relax(memories, probe, network, args.max_sweeps, args.order_seed)
    out = res.to_dict()
    out["probe"] = [int(v) for v in probe]
    return out


def cmd_probe_overflow(args) -> dict:
    rep = probe_overflow(args.dim, args.vertex, Precision(args.precision),
                         Formulation(args.formulation), Family(args.family))
    return rep.to_dict()


def _render_rows(rows, vertex, aggregation, path, title_prefix=""):
    from .plotting import render_heatmap

    lrs, its, table = aggregate(rows, vertex, aggregation)
    title = f"{title_prefix}n={vertex} ({aggregation} over repeats)"
    return render_heatmap(lrs, its, table, path, title=title,
                          label=f"{aggregation} recall distance")


def cmd_sweep(args) -> dict:
    cfg = load_config(args.config)
    seed = resolve_seed(args.seed, cfg.sweep["base_seed"])
    grid = cfg.sweep_grid(base_seed=seed)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    rows = run_sweep(grid, jobs)
    _write_text(args.output, rows_to_csv(rows))
    _write_text(args.output + ".manifest.json",
                _manifest("sweep", cfg, {"sweep": grid_to_dict(grid)}))
    best = {}
    for n in sorted({r.n for r in rows}):
        lrs, its, table = aggregate(rows, n)
        if np.isfinite(table).any():
            li, ti = optimal_cell(rows, n)
            best[str(n)] = {"initial_lr": lrs[li], "inv_T": its[ti],
                            "mean_recall_distance": float(table[ti, li])}
    figures = []
    if args.figures:
        os.makedirs(args.figures, exist_ok=True)
        for n in sorted({r.n for r in rows}):
            path = os.path.join(args.figures, f"heatmap_n{n}.svg")
            _render_rows(rows, n, args.aggregation, path,
                         title_prefix=f"{grid.formulation.value} ")
            figures.append(path)
    return {"output": args.output, "rows": len(rows), "jobs": jobs, "best": best,
            "figures": figures}


def cmd_render(args) -> dict:
    with open(args.input, encoding="utf-8") as fh:
        rows = rows_from_csv(fh.read())
    if not rows:
        raise UsageError("CSV has no data rows")
    vertices = sorted({r.n for r in rows})
    if args.vertex is None:
        if len(vertices) != 1:
            raise UsageError(f"CSV holds vertices {vertices}; choose one with --vertex")
        vertex = vertices[0]
    else:
        vertex = args.vertex
        if vertex not in vertices:
            raise UsageError(f"vertex {vertex} not in CSV (has {vertices})")
    cells = _render_rows(rows, vertex, args.aggregation, args.output)
    return {"output": args.output, "vertex": vertex, "cells": cells,
            "aggregation": args.aggregation}


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dam-lab", description="Dense associative memory experiments.")
    p.add_argument("--version", action="version", version=f"dam-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train memories from a JSON config")
    t.add_argument("config")
    t.add_argument("-o", "--output", required=True, help="memory file to write")
    t.add_argument("--seed", type=int, help="override train.seed")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("relax", help="relax a probe against a memory file")
    r.add_argument("memories")
    r.add_argument("--probe", help="comma separated -1/+1 values, a JSON list, or @file")
    r.add_argument("--state", type=int, default=0,
                   help="use stored training state INDEX as the probe (default 0)")
    r.add_argument("--flips", type=int, default=0, help="corrupt this many random bits")
    r.add_argument("--flip-seed", type=int, default=0)
    r.add_argument("--max-sweeps", type=int, default=50)
    r.add_argument("--order-seed", type=int, default=0)
    r.set_defaults(func=cmd_relax)

    s = sub.add_parser("sweep", help="run a hyperparameter grid")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True, help="CSV file to write")
    s.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    s.add_argument("--seed", type=int, help="override sweep.base_seed")
    s.add_argument("--figures", help="directory for per-vertex SVG heatmaps")
    s.add_argument("--aggregation", choices=AGGREGATIONS, default="mean")
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("probe-overflow", help="worst-case overflow analysis")
    o.add_argument("--dim", type=int, required=True)
    o.add_argument("--vertex", type=int, required=True)
    o.add_argument("--precision", choices=[v.value for v in Precision], default="single")
    o.add_argument("--formulation", choices=[v.value for v in Formulation], default="original")
    o.add_argument("--family", choices=[v.value for v in Family], default="polynomial")
    o.set_defaults(func=cmd_probe_overflow)

    h = sub.add_parser("render", help="SVG heatmap from a sweep CSV")
    h.add_argument("input")
    h.add_argument("-o", "--output", required=True)
    h.add_argument("--vertex", type=int)
    h.add_argument("--aggregation", choices=AGGREGATIONS, default="mean")
    h.set_defaults(func=cmd_render)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        payload = args.func(args)
    except (ConfigError, UsageError, ValueError) as e:
        print(f"dam-lab: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"dam-lab: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(_plain(payload), sort_keys=True, allow_nan=False))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
