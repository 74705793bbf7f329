"""Command-line front end: ``tempath run`` and ``tempath oracle``.

Both commands read a TOML configuration, validate it against ``CONFIG_SCHEMA`` and write
plain files into an output directory:

run
    ``distributions.csv`` (formalism, p, axis, coordinate, probability_density),
    ``summary.json``, ``plots/*.svg`` and, with ``--oracle-check``, ``oracle_errors.csv``.
oracle
    ``oracle_convergence.csv`` (case, parameter, value, error) and ``oracle_summary.json``.

Every command also writes ``manifest.json`` with SHA-256 checksums of the files above.

Exit codes: 0 success, 1 I/O failure, 2 configuration error (nothing written),
3 numerical failure (non-convergence, boundary leak, missing trajectory).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional

import jsonschema
import numpy as np
import tomli

from . import __version__
from .dipole import DipoleSpectrum, ImpulsiveField, exact_impulsive_packet, lattice_time_factor
from .errors import BoundaryLeak, CausticError, ConfigError, DetectorWindow, NonConvergent, NoTrajectory, StepRejected
from .experiment import ExperimentConfig, OracleSettings, compare_formalisms, default_threads, run_experiment
from .kernels import GaussianPacket4D, Grid, evolve_gaussian_free
from .lattice import LatticeConfig, PotentialSpec, _propagate_once, trotter_propagate

logger = logging.getLogger("tempath")

SUMMARY_SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (NonConvergent, BoundaryLeak, NoTrajectory, CausticError, StepRejected, DetectorWindow)

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int_list = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2}
_pos_list = {"type": "array", "items": _pos, "minItems": 2}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["mass", "packet", "spectrum", "field", "times"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "formalism": {"enum": ["path4d", "schrodinger", "both"]},
        "mass": _pos,
        "packet": {
            "type": "object",
            "additionalProperties": False,
            "required": ["sigma_t", "sigma_x"],
            "properties": {
                "t_a": _num,
                "x_a": _num,
                "omega_a": _num,
                "k_a": _num,
                "sigma_t": _pos,
                "sigma_x": _pos,
            },
        },
        "spectrum": {
            "type": "object",
            "additionalProperties": False,
            "required": ["eigenvalues", "weights"],
            "properties": {
                "eigenvalues": {"type": "array", "items": _num, "minItems": 1},
                "weights": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            },
        },
        "field": {
            "type": "object",
            "oneOf": [
                {
                    "additionalProperties": False,
                    "required": ["E0_bar", "E1_bar", "T_bar"],
                    "properties": {"E0_bar": _num, "E1_bar": _num, "T_bar": _num, "delta_T": {"type": "number", "minimum": 0}},
                },
                {
                    "additionalProperties": False,
                    "required": ["E0", "E1", "T1", "T2"],
                    "properties": {"E0": _num, "E1": _num, "T1": _num, "T2": _num},
                },
            ],
        },
        "times": {
            "type": "object",
            "additionalProperties": False,
            "required": ["T0", "T3"],
            "properties": {"T0": _num, "T3": _num},
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_samples": {"type": "integer", "minimum": 3},
                "hump_threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_t": {"type": "integer", "minimum": 64},
                "n_free": {"type": "integer", "minimum": 1},
                "n_pulse": {"type": "integer", "minimum": 1},
                "reg_eta": {"type": "number", "minimum": 0},
                "delta_T": _pos,
                "free_slices": _int_list,
                "reg_etas": _pos_list,
                "dipole_delta_T": _pos_list,
            },
        },
    },
}


def load_config(path) -> dict:
    """Parse and schema-check a TOML file; raise ``ConfigError`` on any problem."""
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except (tomli.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}")
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}")
    return raw


def build_experiment(raw: dict, formalism: Optional[str] = None, oracle_check: bool = False, seed: Optional[int] = None) -> ExperimentConfig:
    m = float(raw["mass"])
    pk = raw["packet"]
    k_a = float(pk.get("k_a", 0.0))
    omega_a = float(pk["omega_a"]) if "omega_a" in pk else math.hypot(k_a, m)
    packet = GaussianPacket4D(
        float(pk.get("t_a", 0.0)), float(pk.get("x_a", 0.0)), omega_a, k_a, float(pk["sigma_t"]), float(pk["sigma_x"])
    )
    sp = raw["spectrum"]
    if len(sp["eigenvalues"]) != len(sp["weights"]):
        raise ConfigError("spectrum: eigenvalues and weights differ in length")
    if sum(sp["weights"]) <= 0:
        raise ConfigError("spectrum: weights must have positive sum")
    spectrum = DipoleSpectrum(tuple(sp["eigenvalues"]), tuple(sp["weights"]))
    f = raw["field"]
    if "E0_bar" in f:
        imp = ImpulsiveField(float(f["E0_bar"]), float(f["E1_bar"]), float(f["T_bar"]), float(f.get("delta_T", 0.0)))
    else:
        if f["T2"] <= f["T1"]:
            raise ConfigError("field: need T2 > T1")
        imp = ImpulsiveField.from_field(float(f["E0"]), float(f["E1"]), float(f["T1"]), float(f["T2"]))
    oc = raw.get("oracle", {})
    osettings = OracleSettings(
        n_t=oc.get("n_t", 2048),
        n_free=oc.get("n_free", 64),
        n_pulse=oc.get("n_pulse", 2),
        reg_eta=oc.get("reg_eta", 1e-4),
        delta_T=oc.get("delta_T", 0.01),
    )
    smp = raw.get("sampling", {})
    return ExperimentConfig(
        mass=m,
        packet=packet,
        spectrum=spectrum,
        field=imp,
        T0=float(raw["times"]["T0"]),
        T3=float(raw["times"]["T3"]),
        formalism=formalism or raw.get("formalism", "both"),
        oracle_check=oracle_check,
        oracle=osettings,
        n_samples=smp.get("n_samples", 2001),
        hump_threshold=smp.get("hump_threshold", 0.05),
        seed=raw.get("seed", 0) if seed is None else seed,
    )


def _fmt(v) -> str:
    return format(float(v), ".12e")


def _csv_bytes(rows: List[list]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _svg_bytes(title: str, xlabel: str, curves: Dict[str, tuple]) -> bytes:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "tempath", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, (x, y) in curves.items():
            ax.plot(x, y, label=label, lw=1.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("probability density")
        ax.set_title(title)
        ax.legend(fontsize=8)
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


AXIS_LABELS = {"t": "arrival time t", "x": "position x", "v": "time velocity omega / m"}


def _run_outputs(config: ExperimentConfig, threads: int) -> Dict[str, bytes]:
    results = {f: run_experiment(config, f, threads) for f in config.formalisms}
    rows = [["formalism", "p", "axis", "coordinate", "probability_density"]]
    files: Dict[str, bytes] = {}
    summary = {"schema_version": SUMMARY_SCHEMA_VERSION, "version": __version__, "seed": config.seed, "formalisms": {}}
    for name, res in results.items():
        for axis in ("t", "x", "v"):
            d = res.distributions[axis]
            for p, dens in zip(config.spectrum.eigenvalues, d.components):
                rows += [[name, _fmt(p), axis, _fmt(c), _fmt(v)] for c, v in zip(d.coordinate, dens)]
            rows += [[name, "combined", axis, _fmt(c), _fmt(v)] for c, v in zip(d.coordinate, d.combined)]
        comps = []
        for c in res.components:
            entry = {"p": c.p, "delta_omega": c.delta_omega}
            if name == "path4d":
                entry.update(
                    omega_shift=c.omega_shift,
                    delta_v=c.delta_v,
                    delta_v_omega_over_k=c.delta_v_omega_over_k,
                    mean_arrival_t=c.mean_arrival_t,
                    dropped_phase=c.dropped_phase,
                )
            else:
                entry.update(phase_shift=c.phase_shift, delta_v=0.0)
            comps.append(entry)
        summary["formalisms"][name] = {
            "components": comps,
            "hump_count": res.hump_count,
            "hump_spacing_v": res.hump_spacing_v,
            "hump_spacing_omega": res.hump_spacing_omega,
            "delta_omega_width": res.delta_omega_width,
            "margin": res.margin,
            "detectable": res.detectable,
        }
        for axis in ("t", "x", "v"):
            d = res.distributions[axis]
            curves = {f"p = {p:g}": (d.coordinate, y) for p, y in zip(config.spectrum.eigenvalues, d.components)}
            curves["combined"] = (d.coordinate, d.combined)
            files[f"plots/{name}_{axis}.svg"] = _svg_bytes(f"{name}: {axis} distribution", AXIS_LABELS[axis], curves)
    if len(results) == 2:
        summary["comparison"] = compare_formalisms(results["path4d"], results["schrodinger"]).to_dict()
    files["distributions.csv"] = _csv_bytes(rows)
    files["summary.json"] = _json_bytes(summary)
    if config.oracle_check and "path4d" in results:
        orows = [["formalism", "p", "rel_l2"]]
        orows += [["path4d", _fmt(p), _fmt(e)] for p, e in sorted(results["path4d"].oracle_errors.items())]
        files["oracle_errors.csv"] = _csv_bytes(orows)
    return files


def _fit_order(h, err) -> float:
    h = np.log(np.asarray(h, dtype=float))
    e = np.log(np.asarray(err, dtype=float))
    return float(np.polyfit(h, e, 1)[0])


def _oracle_outputs(raw: dict, config: ExperimentConfig) -> Dict[str, bytes]:
    oc = raw.get("oracle", {})
    m = config.mass
    T0, T3 = config.T0, config.T3
    n_t = oc.get("n_t", 2048)
    rows = [["case", "parameter", "value", "error"]]
    summary = {"schema_version": SUMMARY_SCHEMA_VERSION, "version": __version__}

    # free time factor against the closed form
    packet = config.packet
    evolved = evolve_gaussian_free(packet, m, T0, T3)
    g = Grid.covering([packet, evolved], n_t, 2)
    ref = evolved.time_factor(g.t)
    free_err = []
    for n in oc.get("free_slices", [64, 128, 256]):
        cfg = LatticeConfig(n, T0, T3, g.t_min, g.t_max, n_t, reg_eta=oc.get("reg_eta", 1e-4))
        psi = trotter_propagate(cfg, PotentialSpec(), packet.time_factor(g.t), m)
        err = float(np.linalg.norm(psi - ref) / np.linalg.norm(ref))
        free_err.append(err)
        rows.append(["free", "n_slices", str(n), _fmt(err)])
    summary["free_monotone"] = bool(all(b < a for a, b in zip(free_err, free_err[1:])))

    # raw damped error versus the regularization strength
    for eta in oc.get("reg_etas", [1e-3, 1e-4]):
        cfg = LatticeConfig(128, T0, T3, g.t_min, g.t_max, n_t, reg_eta=0.0)
        psi = _propagate_once(cfg, PotentialSpec(), packet.time_factor(g.t), m, eta)
        rows.append(["free_raw", "reg_eta", _fmt(eta), _fmt(np.linalg.norm(psi - ref) / np.linalg.norm(ref))])

    # finite pulses against the impulsive closed form
    p = max(config.spectrum.eigenvalues, key=abs)
    widths = oc.get("dipole_delta_T", [0.1, 0.05, 0.025])
    exact = exact_impulsive_packet(packet, p, config.field, m, T0, T3)
    g = Grid.covering([packet, exact], n_t, 2)
    ref = exact.amplitude_scale * exact.time_factor(g.t)
    dip_err = []
    for w in widths:
        psi = lattice_time_factor(packet, p, config.field.with_duration(w), m, T0, T3, g.t, oc.get("n_free", 64), 2)
        err = float(np.linalg.norm(psi - ref) / np.linalg.norm(ref))
        dip_err.append(err)
        rows.append(["dipole", "delta_T", _fmt(w), _fmt(err)])
    summary["dipole_order"] = _fit_order(widths, dip_err) if min(dip_err) > 0 else None
    summary["dipole_p"] = p
    return {"oracle_convergence.csv": _csv_bytes(rows), "oracle_summary.json": _json_bytes(summary)}


def _write(out: Path, files: Dict[str, bytes], config_path: str, seed: int, started: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    manifest_files = {}
    for name in sorted(files):
        target = out / name
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(files[name])
        manifest_files[name] = hashlib.sha256(files[name]).hexdigest()
    manifest = {
        "config_path": str(config_path),
        "output_dir": str(out),
        "version": __version__,
        "seed": seed,
        "timestamps": {"started": started, "finished": _dt.datetime.now(_dt.timezone.utc).isoformat()},
        "checksums": manifest_files,
    }
    (out / "manifest.json").write_bytes(_json_bytes(manifest))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tempath", description="Dipole beam-splitting in the time coordinate with 4D path integrals.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run the experiment"), ("oracle", "lattice convergence tables")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="TOML configuration file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")
        sp.add_argument("--formalism", choices=["path4d", "schrodinger", "both"], default=None)
        if name == "run":
            sp.add_argument("--oracle-check", action="store_true", help="re-derive path4d components on the lattice")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        raw = load_config(args.config)
        config = build_experiment(raw, args.formalism, getattr(args, "oracle_check", False), args.seed)
        threads = default_threads()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:  # domain errors raised while building the packet/spectrum
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run":
            files = _run_outputs(config, threads)
        else:
            files = _oracle_outputs(raw, config)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _write(Path(args.out), files, args.config, config.seed, started)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
