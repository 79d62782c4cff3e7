"""Command-line entry point: ``paramgate <command> [options]``.

Every command writes into one run directory (``--out``): a snapshot of the
resolved configuration, its results and a manifest with the package
version, seed and a checksum per file.  Frequencies are given and reported
in MHz (f = omega / 2 pi), durations in ns and flux amplitudes in Phi0.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    TRANSFER,
    CalibrationError,
    GateRecipe,
    calibrate_gate,
    ideal_gate,
    predict_resonances,
    recipe_summary,
    simulate_chevron,
)
from .characterization import (
    ConfusionMatrix,
    FidelityReport,
    gate_superoperator,
    run_irb,
    write_counts,
    synthesize_tomography_data,
    mle_process_tomography,
    unitarity_bounds,
    average_gate_fidelity,
)
from .device import load_device, mhz, reference_device, reference_gate_table, to_mhz
from .dynamics import NoiseModel
from .hamiltonian import TRANSITIONS

GATES = tuple(TRANSFER)
DEFAULT_LENGTHS = (2, 4, 6, 8, 16, 24, 32, 48)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    device_file: str | None
    seed: int
    out: str
    params: dict = field(default_factory=dict)
    noise_overrides: dict = field(default_factory=dict)
    workers: int = 1

    def snapshot(self) -> dict:
        # worker count is deliberately left out: results must not depend on it
        return {"command": self.command, "device_file": self.device_file, "seed": self.seed,
                "params": self.params, "noise_overrides": self.noise_overrides}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _grid(lo: float, hi: float, points: int, name: str) -> np.ndarray:
    if points < 1:
        raise ConfigError(f"{name} grid is empty")
    if points == 1:
        return np.array([lo])
    if not hi > lo:
        raise ConfigError(f"{name} grid needs max > min")
    return np.linspace(lo, hi, points)


def _load_device(cfg: RunConfig):
    if cfg.device_file is None:
        return reference_device()
    path = Path(cfg.device_file)
    if not path.is_file():
        raise ConfigError(f"device file {path} does not exist")
    return load_device(path)


def _noise(cfg: RunConfig, device, gate: str):
    mode = cfg.params.get("noise", "none")
    if mode == "none":
        return None
    if mode != "table":
        raise ConfigError(f"unknown noise mode {mode!r}")
    base = NoiseModel.for_gate(device, reference_gate_table()[gate])
    over = {k: v * 1e-6 for k, v in cfg.noise_overrides.items() if v is not None}
    if over:
        base = NoiseModel(**{**base.__dict__, **over})
    return base


class RunWriter:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = Path(cfg.out)
        self.files: dict[str, str] = {}

    def path(self, name: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        return self.dir / name

    def text(self, name: str, content: str) -> None:
        self.path(name).write_text(content)

    def register(self, name: str) -> None:
        self.files[name] = hashlib.sha256(self.path(name).read_bytes()).hexdigest()

    def finish(self) -> None:
        self.text("config.json", _dump(self.cfg.snapshot()))
        self.register("config.json")
        manifest = {"package": "paramgate", "version": __version__, "seed": self.cfg.seed,
                    "command": self.cfg.command, "files": self.files}
        self.text("manifest.json", _dump(manifest))


# ---------------------------------------------------------------------------
# commands

def cmd_resonance_map(cfg: RunConfig) -> int:
    p = cfg.params
    amps = _grid(p["amp_min"], p["amp_max"], p["amp_points"], "amplitude")
    harmonics = p["harmonics"]
    if not harmonics or any(n <= 0 for n in harmonics):
        raise ConfigError("harmonics must be positive integers")
    if cfg.params.get("dry_run"):
        return 0
    device = _load_device(cfg)
    columns = [f"{tr}_n{n}" for n in harmonics for tr in TRANSITIONS]
    header = ["amp_phi0"] + [f"{c}_f_p_MHz" for c in columns] + [f"{c}_g_eff_MHz" for c in columns]
    rows = []
    for a in amps:
        preds = {(r.transition, r.harmonic_n): r
                 for r in predict_resonances(device, float(a), harmonics, strict=False)}
        freqs, gs = [], []
        for n in harmonics:
            for tr in TRANSITIONS:
                r = preds.get((tr, n))
                freqs.append(f"{to_mhz(r.omega_p_star):.6f}" if r else "nan")
                gs.append(f"{abs(to_mhz(r.g_eff)):.6f}" if r else "nan")
        rows.append([f"{a:.6f}"] + freqs + gs)
    w = RunWriter(cfg)
    w.text("resonance_map.csv", ",".join(header) + "\n" + "".join(",".join(r) + "\n" for r in rows))
    w.register("resonance_map.csv")
    w.finish()
    return 0


def cmd_chevron(cfg: RunConfig) -> int:
    p = cfg.params
    gate = p["gate"]
    freqs = _grid(p["f_min"], p["f_max"], p["f_points"], "frequency")
    taus = _grid(p["t_min"], p["t_max"], p["t_points"], "duration")
    if freqs.min() <= 0 or taus.min() < 2 * p["risetime"]:
        raise ConfigError("frequencies must be positive and durations cover both edges")
    if p.get("dry_run"):
        return 0
    device = _load_device(cfg)
    scan = simulate_chevron(device, _noise(cfg, device, gate), gate, p["amp"],
                            mhz(freqs), taus * 1e-9, risetime=p["risetime"] * 1e-9,
                            workers=cfg.workers)
    w = RunWriter(cfg)
    scan.to_csv(w.path("chevron.csv"))
    w.register("chevron.csv")
    w.text("chevron.json", _dump(scan.sidecar()))
    w.register("chevron.json")
    w.finish()
    return 0


def cmd_calibrate(cfg: RunConfig) -> int:
    p = cfg.params
    if p.get("dry_run"):
        return 0
    device = _load_device(cfg)
    gate = p["gate"]
    risetime = None if p["risetime"] is None else p["risetime"] * 1e-9
    w = RunWriter(cfg)
    try:
        recipe = calibrate_gate(device, _noise(cfg, device, gate), gate, p["amp"],
                                harmonic_n=p["harmonic"], risetime=risetime)
    except CalibrationError as exc:
        w.text("diagnostics.json", _dump({"error": str(exc), "diagnostics": exc.diagnostics}))
        w.register("diagnostics.json")
        w.finish()
        print(f"calibration failed: {exc}", file=sys.stderr)
        return 2
    recipe.save(w.path("recipe.json"))
    w.register("recipe.json")
    w.text("summary.txt", recipe_summary(recipe))
    w.register("summary.txt")
    w.finish()
    return 0


def _load_recipe(p: dict) -> GateRecipe:
    path = Path(p["recipe"])
    if not path.is_file():
        raise ConfigError(f"recipe file {path} does not exist")
    return GateRecipe.load(path)


def _confusion(p: dict) -> ConfusionMatrix:
    f = p.get("readout")
    return ConfusionMatrix.perfect() if f is None else ConfusionMatrix.from_fidelities(*f)


def _check_rb(p: dict):
    lengths = p["lengths"]
    if not lengths or any(m <= 0 for m in lengths) or list(lengths) != sorted(set(lengths)):
        raise ConfigError("lengths must be positive and strictly increasing")
    if p["sequences"] <= 0:
        raise ConfigError("sequences per length must be positive")


def cmd_characterize(cfg: RunConfig) -> int:
    p = cfg.params
    if p["shots"] <= 0:
        raise ConfigError("shots must be positive")
    if p["irb"]:
        _check_rb(p)
    recipe = _load_recipe(p)
    if p.get("dry_run"):
        return 0
    device = _load_device(cfg)
    noise = _noise(cfg, device, recipe.gate_kind)
    E = gate_superoperator(device, noise, recipe)
    target = ideal_gate(recipe.gate_kind)
    w = RunWriter(cfg)
    report = FidelityReport()
    extra = {"gate": recipe.gate_kind, "simulated_fidelity": average_gate_fidelity(E, target)}
    if p["qpt"]:
        conf = _confusion(p)
        records = synthesize_tomography_data(E, shots=p["shots"], confusion=conf, seed=cfg.seed)
        write_counts(w.path("tomography_counts.csv"), records)
        w.register("tomography_counts.csv")
        result = mle_process_tomography(records, conf if p["compensate"] else None)
        bounds = unitarity_bounds(result.channel)
        report.qpt_fidelity = average_gate_fidelity(result.channel, target)
        report.unitarity_bound = bounds.procrustean
        report.interferometric_bound = bounds.interferometric
        extra["mle"] = {"log_likelihood": result.log_likelihood, "iterations": result.iterations,
                        "converged": result.converged}
        if bounds.kraus_tie:
            report.notes.append("leading Kraus weight degenerate; lexicographic tie-break used")
    if p["irb"]:
        exp, rb = run_irb(device, noise, recipe, p["lengths"], p["sequences"],
                          p["rb_shots"] or None, cfg.seed, cfg.workers, gate=E)
        exp.write_csv(w.path("rb_survivals.csv"))
        w.register("rb_survivals.csv")
        report.irb_fidelity, report.clifford_fidelity = rb.irb_fidelity, rb.clifford_fidelity
        report.notes.extend(rb.notes)
        extra["rb_fit"] = {"reference": exp.fit_ref, "interleaved": exp.fit_int}
    report.to_json(w.path("report.json"), extra)
    w.register("report.json")
    w.finish()
    return 0


def cmd_rb(cfg: RunConfig) -> int:
    p = cfg.params
    _check_rb(p)
    recipe = _load_recipe(p)
    if p.get("dry_run"):
        return 0
    device = _load_device(cfg)
    noise = _noise(cfg, device, recipe.gate_kind)
    exp, report = run_irb(device, noise, recipe, p["lengths"], p["sequences"],
                          p["rb_shots"] or None, cfg.seed, cfg.workers,
                          inject_depolarizing=p["inject_depolarizing"])
    w = RunWriter(cfg)
    exp.write_csv(w.path("rb_survivals.csv"))
    w.register("rb_survivals.csv")
    report.to_json(w.path("report.json"),
                   {"gate": recipe.gate_kind, "p_ref": exp.p_ref, "p_int": exp.p_int,
                    "rb_fit": {"reference": exp.fit_ref, "interleaved": exp.fit_int}})
    w.register("report.json")
    w.finish()
    return 0


COMMANDS = {
    "resonance-map": cmd_resonance_map,
    "chevron": cmd_chevron,
    "calibrate": cmd_calibrate,
    "characterize": cmd_characterize,
    "rb": cmd_rb,
}


# ---------------------------------------------------------------------------
# argument parsing

def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned value")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--device", help="device JSON (default: packaged reference device)")
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--workers", type=_positive_int, default=1)
    common.add_argument("--out", default="run", help="run directory")
    common.add_argument("--dry-run", action="store_true",
                        help="print the resolved parameters and exit")

    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--noise", choices=("none", "table"), default="none",
                       help="'table' uses the reference T1/T2 values of the gate")
    for flag in ("t1-fixed", "t1-tunable", "t2-fixed", "t2-tunable", "t2-tunable-driven"):
        noise.add_argument(f"--{flag}", type=float, metavar="US", help="override in microseconds")

    table = reference_gate_table()
    parser = argparse.ArgumentParser(prog="paramgate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("resonance-map", parents=[common], help="resonance frequency vs amplitude")
    s.add_argument("--amp-min", type=float, default=0.0)
    s.add_argument("--amp-max", type=float, default=0.35)
    s.add_argument("--amp-points", type=int, default=36)
    s.add_argument("--harmonics", type=int, nargs="+", default=[1, 2])

    s = sub.add_parser("chevron", parents=[common, noise], help="population-transfer chevron")
    s.add_argument("--gate", choices=GATES, required=True)
    s.add_argument("--amp", type=float)
    s.add_argument("--f-min", type=float, required=True, help="MHz")
    s.add_argument("--f-max", type=float, required=True, help="MHz")
    s.add_argument("--f-points", type=int, default=41)
    s.add_argument("--t-min", type=float, default=0.0, help="ns")
    s.add_argument("--t-max", type=float, default=400.0, help="ns")
    s.add_argument("--t-points", type=int, default=81)
    s.add_argument("--risetime", type=float, default=0.0, help="ns")

    s = sub.add_parser("calibrate", parents=[common], help="calibrate one gate")
    s.add_argument("--gate", choices=GATES, required=True)
    s.add_argument("--amp", type=float)
    s.add_argument("--harmonic", type=int, default=1)
    s.add_argument("--risetime", type=float, default=None,
                   help="edge length in ns (default: 60 for iswap, 40 for cz)")

    rb_args = argparse.ArgumentParser(add_help=False)
    rb_args.add_argument("--lengths", type=int, nargs="+", default=list(DEFAULT_LENGTHS))
    rb_args.add_argument("--sequences", type=int, default=30)
    rb_args.add_argument("--rb-shots", type=int, default=1000, help="0 for exact survival")

    s = sub.add_parser("characterize", parents=[common, noise, rb_args],
                       help="tomography and interleaved RB of a recipe")
    s.add_argument("--recipe", required=True)
    s.add_argument("--shots", type=int, default=10_000)
    s.add_argument("--readout", type=float, nargs=2, metavar=("F_FIXED", "F_TUNABLE"),
                   help="assignment fidelities (default: perfect readout)")
    s.add_argument("--no-compensation", dest="compensate", action="store_false")
    s.add_argument("--no-qpt", dest="qpt", action="store_false")
    s.add_argument("--no-irb", dest="irb", action="store_false")

    s = sub.add_parser("rb", parents=[common, noise, rb_args], help="interleaved RB of a recipe")
    s.add_argument("--recipe", required=True)
    s.add_argument("--inject-depolarizing", type=float, default=0.0,
                   help="average infidelity of a depolarizing error after each interleaved gate")
    parser.set_defaults(_table=table)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    skip = {"command", "device", "seed", "workers", "out", "_table"}
    params = {k: v for k, v in vars(args).items() if k not in skip and not k.startswith(("t1_", "t2_"))}
    if "gate" in params and params.get("amp") is None:
        params["amp"] = args._table[params["gate"]]["amp_phi0"]
    overrides = {}
    names = {"t1_fixed": "T1_F", "t1_tunable": "T1_T", "t2_fixed": "T2_F", "t2_tunable": "T2_T",
             "t2_tunable_driven": "T2_T_driven"}
    for k, v in vars(args).items():
        if k in names and v is not None:
            overrides[names[k]] = v
    return RunConfig(args.command, args.device, args.seed, args.out, params, overrides, args.workers)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = config_from_args(args)
    if args.dry_run:
        print(_dump({**cfg.snapshot(), "workers": cfg.workers, "out": cfg.out}), end="")
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"paramgate {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
