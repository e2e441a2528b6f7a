"""Command-line front end: parameter sweeps and figure-data tables as CSV or JSON.

    weakmeas <mode> [--config path] [--key value ...] [--format csv|json]
             [--out path] [--sweep name:start:stop:points[:log]] [--dump-circuit]
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import qubitsim, readout
from .errors import ConfigError, EmptyTable, WeakMeasError
from .qcore import QuantumState, sigma_x, sigma_y, sigma_z
from .readout import MajorityVoteRule, ReadoutErrorModel
from .weakvalue import max_postselection_probability, optimal_postselection_for_weak_value, optimal_weak_value_for_probability

MODES = ("error-rate", "loss-rate", "correction", "fisher", "majority", "optimize", "simulate", "figure")
INT_PARAMS = {"n", "k", "trials", "seed", "id"}
FLOAT_PARAMS = {"phi", "aw_re", "aw_im", "q01", "q10", "q", "p_s"}
STR_PARAMS = {"observable", "psi_i", "pointer"}
KNOWN = INT_PARAMS | FLOAT_PARAMS | STR_PARAMS
FIGURE_PHI = 0.01
FIGURE_QS = (0.05, 0.01)

_STATES = {
    "zero": [1, 0],
    "one": [0, 1],
    "plus": [1, 1],
    "minus": [1, -1],
    "plus_i": [1, 1j],
    "minus_i": [1, -1j],
}
_OBSERVABLES = {"x": sigma_x, "y": sigma_y, "z": sigma_z}


@dataclass
class Sweep:
    name: str
    start: float
    stop: float
    points: int
    spacing: str = "linear"

    def values(self):
        if self.spacing == "log":
            vals = np.geomspace(self.start, self.stop, self.points)
        else:
            vals = np.linspace(self.start, self.stop, self.points)
        if self.name in INT_PARAMS:
            return [int(round(v)) for v in vals]
        return [float(v) for v in vals]


@dataclass
class ExperimentConfig:
    mode: str
    parameters: dict = field(default_factory=dict)
    sweep: Sweep | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError("mode", f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        for key in self.parameters:
            if key not in KNOWN:
                raise ConfigError(key, "unknown parameter")
        if self.sweep is not None:
            if self.sweep.name not in KNOWN - STR_PARAMS:
                raise ConfigError("sweep", f"cannot sweep {self.sweep.name!r}")
            if self.sweep.points < 2:
                raise ConfigError("sweep", "needs at least 2 points")
            if self.sweep.spacing not in ("linear", "log"):
                raise ConfigError("sweep", f"spacing must be linear or log, got {self.sweep.spacing!r}")
            if self.sweep.spacing == "log" and (self.sweep.start <= 0 or self.sweep.stop <= 0):
                raise ConfigError("sweep", "log spacing needs positive bounds")

    def resolved(self):
        params = _defaults()
        params.update(self.parameters)
        out = {"mode": self.mode, "parameters": dict(sorted(params.items()))}
        if self.sweep is not None:
            out["sweep"] = vars(self.sweep)
        return out


def _coerce(name, value):
    if isinstance(value, list):
        return [_coerce(name, v) for v in value]
    try:
        if name in INT_PARAMS:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if name in FLOAT_PARAMS:
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"invalid value {value!r}") from None
    return value


def _parse_cli_value(name, text):
    if "," in text and name not in STR_PARAMS:
        return [_coerce(name, t) for t in text.split(",") if t]
    return _coerce(name, text)


def parse_sweep(spec):
    """``name:start:stop:points[:log]``."""
    parts = spec.split(":")
    if len(parts) not in (4, 5):
        raise ConfigError("sweep", f"expected name:start:stop:points[:log], got {spec!r}")
    try:
        start, stop, points = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise ConfigError("sweep", f"non-numeric bounds in {spec!r}") from None
    return Sweep(parts[0], start, stop, points, parts[4] if len(parts) == 5 else "linear")


def _sweep_from_json(obj):
    if isinstance(obj, str):
        return parse_sweep(obj)
    try:
        return Sweep(obj["name"], float(obj["start"]), float(obj["stop"]), int(obj["points"]), obj.get("spacing", "linear"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("sweep", f"malformed sweep object ({exc})") from None


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be an object")
    return doc


def build_config(argv):
    ap = argparse.ArgumentParser(prog="weakmeas", description="Entangled weak-measurement analysis tables.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--out")
    ap.add_argument("--sweep")
    ap.add_argument("--dump-circuit", action="store_true")
    args, extra = ap.parse_known_args(argv)

    doc = load_config(args.config) if args.config else {}
    params = dict(doc.get("parameters", {}))
    params.update({k: v for k, v in doc.items() if k not in ("mode", "parameters", "sweep")})
    sweep = _sweep_from_json(doc["sweep"]) if doc.get("sweep") else None

    if len(extra) % 2:
        raise ConfigError(extra[-1].lstrip("-"), "missing value")
    for flag, value in zip(extra[::2], extra[1::2]):
        if not flag.startswith("--"):
            raise ConfigError(flag, "expected --key value")
        name = flag[2:].replace("-", "_")
        if name not in KNOWN:
            raise ConfigError(name, "unknown parameter")
        params[name] = _parse_cli_value(name, value)
    if args.sweep:
        sweep = parse_sweep(args.sweep)
    params = {k: _coerce(k, v) for k, v in params.items()}
    if doc.get("mode") and doc["mode"] != args.mode:
        raise ConfigError("mode", f"config file is for {doc['mode']!r}, command line says {args.mode!r}")
    return ExperimentConfig(args.mode, params, sweep), args


# -- evaluation -------------------------------------------------------------------


def _env_seed():
    raw = os.environ.get("WEAKMEAS_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError("seed", f"WEAKMEAS_SEED={raw!r} is not an integer") from None


def _defaults():
    return {
        "n": 2,
        "phi": FIGURE_PHI,
        "aw_re": 30.0,
        "aw_im": 0.0,
        "k": 0,
        "trials": 0,
        "seed": _env_seed(),
        "observable": "z",
        "psi_i": "plus",
        "pointer": "zero",
    }


def _state(name, field_name):
    if isinstance(name, str):
        if name not in _STATES:
            raise ConfigError(field_name, f"unknown state {name!r}; one of {', '.join(_STATES)}")
        v = np.array(_STATES[name], dtype=complex)
    else:
        v = np.array(name, dtype=complex)
    if v.ndim != 1 or not np.linalg.norm(v) > 0:
        raise ConfigError(field_name, "state must be a nonzero amplitude list")
    return QuantumState(v / np.linalg.norm(v))


def _model(p):
    q = p.get("q")
    q01 = p.get("q01", q if q is not None else 0.0)
    q10 = p.get("q10", q if q is not None else 0.0)
    try:
        return ReadoutErrorModel(q01, q10)
    except WeakMeasError as exc:
        raise ConfigError("q01" if not 0 <= q01 < 1 else "q10", str(exc)) from None


def _vote(p):
    k = p["k"]
    if k == 0:
        return None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return MajorityVoteRule(p["n"], k)
    except ValueError as exc:
        raise ConfigError("k", str(exc)) from None


def _aw(p):
    return complex(p["aw_re"], p["aw_im"])


def _common(p):
    return {"n": p["n"], "aw_re": p["aw_re"], "aw_im": p["aw_im"], "phi": p["phi"], "q01": _model(p).q01, "q10": _model(p).q10, "k": p["k"]}


def _row_error_rate(p):
    n, model = p["n"], _model(p)
    e0, e1 = qubitsim.eta(n, p["phi"], _aw(p))
    row = _common(p)
    row["p0"] = e0 / (e0 + e1)
    row["error_rate"] = readout.error_rate(n, e0 / (e0 + e1), e1 / (e0 + e1), model, _vote(p))
    exact, approx = readout.error_rate_scaling(n, _aw(p), model)
    row["error_rate_linear"] = exact
    row["error_rate_superexp"] = approx
    row["plateau"] = readout.error_rate_plateau(n, p["phi"], model) if 0 < n * p["phi"] < math.pi / 2 else None
    return row


def _row_loss_rate(p):
    model = _model(p)
    return {
        "n": p["n"],
        "q01": model.q01,
        "k": p["k"],
        "loss_rate": readout.loss_rate(p["n"], model, _vote(p)),
        "loss_rate_linear": p["n"] * model.q01,
    }


def _row_correction(p):
    n, model, vote = p["n"], _model(p), _vote(p)
    pointer = _state(p["pointer"], "pointer")
    rep = readout.correction_report(n, p["phi"], _aw(p), model, vote, pointer)
    row = _common(p)
    row.update({k: v for k, v in rep.to_dict().items() if k not in ("trials", "seed")})
    row["pointer_shift"] = readout.corrected_pointer_shift(n, p["phi"], _aw(p), pointer, model, vote)
    if p["trials"] > 0:
        mc = readout.monte_carlo_readout(n, p["phi"], _aw(p), pointer, model, vote, p["trials"], p["seed"])
        row.update(
            trials=p["trials"],
            seed=p["seed"],
            mc_error_rate=mc.error_rate,
            mc_error_rate_se=mc.error_rate_se,
            mc_loss_rate=mc.loss_rate,
            mc_loss_rate_se=mc.loss_rate_se,
            mc_gamma=mc.gamma,
            mc_gamma_se=mc.gamma_se,
        )
    return row


def _row_fisher(p):
    n, aw = p["n"], _aw(p)
    pointer = _state(p["pointer"], "pointer")
    row = _common(p)
    qfi = qubitsim.branch_qfi(n, p["phi"], aw, pointer)
    row["branch_qfi"] = qfi
    row["branch_qfi_linear"] = qubitsim.branch_qfi_linear(n, p["phi"], aw)
    row["heisenberg_ratio"] = qfi / (4 * n * n)
    row["product_baseline"] = qubitsim.product_baseline_fisher(n, p["phi"], aw, pointer)
    row["fisher_factor"] = readout.fisher_factor(n, aw, _model(p), _vote(p))
    return row


def _row_majority(p):
    n, model, vote = p["n"], _model(p), _vote(p)
    e0, e1 = qubitsim.eta(n, p["phi"], _aw(p))
    row = _common(p)
    row["loss_rate"] = readout.loss_rate(n, model, vote)
    row["fisher_factor"] = readout.fisher_factor(n, _aw(p), model, vote)
    row["gamma"] = readout.correction_factor(n, e0, e1, model, vote)
    row["error_rate"] = readout.error_rate(n, e0 / (e0 + e1), e1 / (e0 + e1), model, vote)
    return row


def _row_optimize(p):
    obs_name = p["observable"]
    if obs_name not in _OBSERVABLES:
        raise ConfigError("observable", f"expected one of {', '.join(_OBSERVABLES)}")
    A = _OBSERVABLES[obs_name]
    psi = _state(p["psi_i"], "psi_i")
    row = {"observable": obs_name}
    if "p_s" in p:
        psi_f, aw_max = optimal_weak_value_for_probability(psi, A, p["p_s"])
        row.update(p_s=p["p_s"], aw_max=aw_max)
    else:
        aw = _aw(p)
        psi_f, p_max = optimal_postselection_for_weak_value(psi, A, aw)
        row.update(aw_re=aw.real, aw_im=aw.imag, p_max=p_max, p_max_closed_form=max_postselection_probability(psi, A, aw))
    for i, a in enumerate(psi_f.amplitudes):
        row[f"psi_f_{i}_re"] = float(a.real)
        row[f"psi_f_{i}_im"] = float(a.imag)
    return row


def _row_simulate(p):
    n, phi, aw = p["n"], p["phi"], _aw(p)
    pointer = _state(p["pointer"], "pointer")
    b0, b1 = qubitsim.run_protocol(n, phi, aw, pointer)
    shift0, shift1 = readout.branch_sx_shifts(n, phi, aw, pointer)
    row = _common(p)
    row.update(
        p0=b0.probability,
        p1=b1.probability,
        eta0=b0.eta0,
        eta1=b0.eta1,
        sx_branch0=float(np.vdot(b0.pointer_state.amplitudes, sigma_x.matrix @ b0.pointer_state.amplitudes).real),
        sx_shift0=shift0,
        sx_shift1=shift1,
        branch_qfi=qubitsim.branch_qfi(n, phi, aw, pointer),
    )
    return row


ROW_FUNCS = {
    "error-rate": _row_error_rate,
    "loss-rate": _row_loss_rate,
    "correction": _row_correction,
    "fisher": _row_fisher,
    "majority": _row_majority,
    "optimize": _row_optimize,
    "simulate": _row_simulate,
}


def _figure_table(p):
    fid = p.get("id")
    if fid is None:
        raise ConfigError("id", "figure mode needs --id 4..9")
    phi = p["phi"]
    rows = []
    aws = (20.0, 50.0, 100.0, 150.0)
    for q in FIGURE_QS:
        model = ReadoutErrorModel(q, q)
        if fid == 4:
            for n in range(2, 7):
                for aw in np.geomspace(1.0, 1000.0, 61):
                    e0, e1 = qubitsim.eta(n, phi, aw)
                    rows.append({"q": q, "n": n, "aw": float(aw), "error_rate": readout.error_rate(n, e0 / (e0 + e1), e1 / (e0 + e1), model)})
        elif fid in (5, 6):
            for aw in aws + (math.inf,):
                for n in range(1, 11):
                    if math.isinf(aw):
                        err = readout.error_rate_plateau(n, phi, model)
                    else:
                        e0, e1 = qubitsim.eta(n, phi, aw)
                        err = readout.error_rate(n, e0 / (e0 + e1), e1 / (e0 + e1), model)
                    row = {"q": q, "aw": aw, "n": n, "error_rate": err}
                    if fid == 6:
                        row["loss_rate"] = readout.loss_rate(n, model)
                    rows.append(row)
        elif fid == 7:
            for aw in aws:
                for n in range(1, 11):
                    rows.append({"q": q, "aw": aw, "n": n, "fisher_factor": readout.fisher_factor(n, aw, model)})
        elif fid in (8, 9):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                for n in range(2, 11):
                    for k in range(0, min(3, n // 2) + 1):
                        vote = MajorityVoteRule(n, k) if k else None
                        if fid == 8:
                            val = {"fisher_factor": readout.fisher_factor(n, 30.0, model, vote)}
                        else:
                            e0, e1 = qubitsim.eta(n, phi, 30.0)
                            val = {"gamma": readout.correction_factor(n, e0, e1, model, vote)}
                        rows.append({"q": q, "aw": 30.0, "n": n, "k": k, **val})
        else:
            raise ConfigError("id", f"figure id must be 4..9, got {fid}")
    return rows


def run(config):
    """Evaluate ``config`` and return its table as a list of row dicts, in sweep order."""
    p = _defaults()
    p.update(config.parameters)
    if config.mode == "figure":
        if config.sweep is not None:
            raise ConfigError("sweep", "figure mode has a fixed grid")
        return _figure_table(p)
    grid_keys = [k for k, v in p.items() if isinstance(v, list)]
    sweep_vals = config.sweep.values() if config.sweep else [None]
    rows = []
    for combo in itertools.product(*(p[k] for k in grid_keys)):
        for sv in sweep_vals:
            point = dict(p)
            point.update(zip(grid_keys, combo))
            if config.sweep:
                point[config.sweep.name] = sv
            row = ROW_FUNCS[config.mode](point)
            if config.sweep and config.sweep.name not in row:
                row = {config.sweep.name: sv, **row}
            rows.append(row)
    return rows


# -- output -----------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.12g" % (v + 0.0)
    return str(v)


def _columns(table):
    cols = []
    for row in table:
        for k in row:
            if k not in cols:
                cols.append(k)
    return cols


def format_table(table, fmt="csv", config=None):
    if not table:
        raise EmptyTable("nothing to write")
    if fmt == "json":
        clean = [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()} for row in table]
        return json.dumps(clean, indent=1, default=float) + "\n"
    buf = io.StringIO()
    if config is not None:
        for line in json.dumps(config, indent=1, sort_keys=True).splitlines():
            buf.write(f"# {line}\n")
    cols = _columns(table)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in table:
        w.writerow([_fmt(row.get(c)) for c in cols])
    return buf.getvalue()


def emit(table, fmt="csv", destination=None, config=None):
    """Write ``table`` as CSV (with a ``#`` config header) or as a JSON array."""
    text = format_table(table, fmt, config)
    if destination is None or destination == "-":
        sys.stdout.write(text)
    else:
        with open(destination, "w") as fh:
            fh.write(text)


def read_csv(text):
    """Parse CSV written by ``emit`` back into ``(config, rows)``; empty cells become None."""
    comment = [ln[2:] for ln in text.splitlines() if ln.startswith("#")]
    body = "\n".join(ln for ln in text.splitlines() if not ln.startswith("#"))
    config = json.loads("\n".join(comment)) if comment else None
    rows = []
    for rec in csv.DictReader(io.StringIO(body)):
        row = {}
        for k, v in rec.items():
            if v == "":
                row[k] = None
            else:
                try:
                    row[k] = float(v)
                except ValueError:
                    row[k] = v
        rows.append(row)
    return config, rows


def main(argv=None):
    try:
        config, args = build_config(sys.argv[1:] if argv is None else argv)
        if args.dump_circuit:
            if config.mode != "simulate":
                raise ConfigError("dump-circuit", "only available in simulate mode")
            p = _defaults()
            p.update(config.parameters)
            if any(isinstance(v, list) for v in p.values()) or config.sweep:
                raise ConfigError("dump-circuit", "needs a single operating point")
            text = qubitsim.protocol_circuit(p["n"], p["phi"], _aw(p)).to_text()
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return 0
        table = run(config)
        emit(table, args.format, args.out, config.resolved() if args.format == "csv" else None)
        return 0
    except ConfigError as exc:
        print(f"weakmeas: config error in {exc.field}: {exc}", file=sys.stderr)
        return 2
    except (WeakMeasError, ArithmeticError, ValueError) as exc:
        print(f"weakmeas: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"weakmeas: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
