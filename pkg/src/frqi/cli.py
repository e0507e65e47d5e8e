"""Command-line experiments: round trips, size and shot sweeps, counts, calibration.

Exit codes: 0 ok, 1 usage, 2 resource cap, 3 data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import image_codec as ic
from . import simulator as sim
from .builder import TooLarge, build_circuit
from .circuit import CircuitError, TooManyQubits as CircuitTooManyQubits, depth, gate_counts
from .transpiler import (
    ResourceLimit, RoutingError, load_coupling_map, lower, lowered_stats, route, unpermute,
)

CSV_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_RESOURCE, EXIT_DATA = 0, 1, 2, 3
RESOURCE_ERRORS = (TooLarge, ResourceLimit, sim.TooManyQubits, CircuitTooManyQubits, MemoryError)


class UsageError(Exception):
    pass


@dataclass
class Config:
    builder: str = "MARY"
    mode: str = "linear"
    decode: str = "ratio"
    shots: int | None = None  # None means exact probabilities
    p_meas: float = 0.0
    p_gate: float = 0.0
    mitigation: str = "none"  # none, own, or a calibration JSON file
    cal_shots: int = 8192
    coupling_map: str | None = None
    seed: int = 0
    timing: bool = True

    @property
    def noise(self):
        if self.p_meas == 0 and self.p_gate == 0:
            return None
        return sim.NoiseModel(self.p_meas, self.p_gate)

    def check(self) -> None:
        if self.shots is None and self.noise is not None:
            raise UsageError("exact probabilities cannot be combined with noise; pass --shots")
        if self.shots is None and self.mitigation != "none":
            raise UsageError("mitigation needs sampled shots")
        if self.shots is not None and self.shots < 1:
            raise UsageError("--shots must be positive")


# pipeline --------------------------------------------------------------------

@dataclass
class Outcome:
    image: ic.Image
    distribution: np.ndarray      # data distribution actually decoded
    raw: sim.Counts | None
    metrics: dict


def _calibration(cfg: Config, q: int) -> np.ndarray:
    if cfg.mitigation == "own":
        return sim.build_calibration(q, cfg.noise or sim.NoiseModel(0.0, 0.0), cfg.cal_shots,
                                     seed=cfg.seed + 1)
    cal = sim.calibration_from_json(Path(cfg.mitigation).read_text())
    if cal.shape[0] != 1 << q:
        raise sim.DimMismatch(f"calibration is {cal.shape[0]}x{cal.shape[0]}, need {1 << q}")
    return cal


def run_pipeline(image: ic.Image, cfg: Config) -> Outcome:
    """Encode, lower, optionally route, simulate, mitigate and decode."""
    cfg.check()
    t0 = time.perf_counter()
    thetas = ic.gray_to_angles(image, cfg.mode)
    circ = build_circuit(cfg.builder, thetas)
    low = lower(circ)
    executed = low
    layout = None
    if cfg.coupling_map:
        routed = route(low, load_coupling_map(cfg.coupling_map))
        executed, layout = routed.circuit, routed.final_layout
    # without gate noise the high-level circuit has the same distribution and is cheaper
    noisy_gates = cfg.noise is not None and cfg.noise.p_gate > 0
    target = executed if (noisy_gates or layout is not None) else circ
    raw = None
    if cfg.shots is None:
        full = sim.exact_probabilities(target)
    else:
        raw = sim.sample(target, cfg.shots, cfg.noise, seed=cfg.seed)
        full = raw.distribution()
    if layout is not None:
        full = unpermute(full, executed.num_qubits, layout)
    if cfg.mitigation != "none":
        full = sim.mitigate(full, _calibration(cfg, circ.num_qubits))
    dist = sim.data_distribution(circ, full)
    out = ic.probs_to_image(dist, image.n, cfg.mode, cfg.decode)
    metrics = {
        "relative_difference": ic.relative_difference(image, out),
        "depth": depth(executed.gates),
        "gate_counts": gate_counts(executed.gates),
        "qubits": executed.num_qubits,
        "wall_time": time.perf_counter() - t0 if cfg.timing else None,
    }
    return Outcome(out, dist, raw, metrics)


# helpers ---------------------------------------------------------------------

def synthetic_image(n: int, seed: int) -> ic.Image:
    """Smooth gradient with seeded noise, standing in for a photograph."""
    side = 1 << n
    yy, xx = np.mgrid[0:side, 0:side] / max(side - 1, 1)
    base = 40 + 170 * (0.6 * xx + 0.4 * yy)
    rng = np.random.default_rng(seed)
    px = np.clip(np.floor(base + rng.normal(0, 20, base.shape) + 0.5), 0, 255)
    return ic.Image(side, px.astype(np.uint8))


def source_image(path, n: int, seed: int) -> ic.Image:
    if path is None:
        return synthetic_image(n, seed)
    img = ic.load_pgm(path)
    return img if img.side == 1 << n else ic.downscale(img, 1 << n)


def _write(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# frqi-csv v{CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _elapsed(cfg, t0):
    return _fmt(time.perf_counter() - t0) if cfg.timing else ""


def _fmt(v):
    return "" if v is None else (f"{v:.6f}" if isinstance(v, float) else v)


# subcommands -----------------------------------------------------------------

def cmd_roundtrip(args, cfg: Config) -> int:
    image = ic.load_pgm(args.input)
    res = run_pipeline(image, cfg)
    out = Path(args.out or Path(args.input).with_suffix(".out.pgm"))
    ic.save_pgm(res.image, out)
    metrics_path = Path(args.metrics) if args.metrics else out.with_suffix(".metrics.json")
    metrics = dict(res.metrics, builder=cfg.builder, shots=cfg.shots or "exact", seed=cfg.seed)
    metrics_path.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    print(f"relative_difference {res.metrics['relative_difference']:.4f}%")
    return EXIT_OK


def _variants(args, cfg):
    return ["MARY", "MCRY"] if args.variants == "both" else [args.variants.upper()]


def cmd_sweep_size(args, cfg: Config) -> int:
    rows = []
    for n in range(args.n_min, args.n_max + 1):
        image = source_image(args.input, n, cfg.seed)
        for variant in _variants(args, cfg):
            rows.append(_size_row(n, variant, image, cfg, args.construct_only))
    header = ["n", "variant", "status", "qubits", "depth", "cx_count", "gate_count", "diff_rel", "time"]
    _write(_csv(header, rows), args.out)
    return EXIT_OK


def _size_row(n, variant, image, cfg, construct_only):
    t0 = time.perf_counter()
    try:
        circ = build_circuit(variant, ic.gray_to_angles(image, cfg.mode))
        diff = None
        if construct_only:
            counts, dep, total = lowered_stats(circ)
        else:
            row_cfg = Config(**{**cfg.__dict__, "builder": variant})
            res = run_pipeline(image, row_cfg)
            counts, dep = res.metrics["gate_counts"], res.metrics["depth"]
            total, diff = sum(counts.values()), res.metrics["relative_difference"]
        return [n, variant, "ok", circ.num_qubits, dep, counts.get("CX", 0), total,
                _fmt(diff), _elapsed(cfg, t0)]
    except RESOURCE_ERRORS as exc:
        return [n, variant, "resource-cap: " + str(exc), "", "", "", "", "",
                _elapsed(cfg, t0)]


def cmd_sweep_shots(args, cfg: Config) -> int:
    shots_list = [int(s) for s in args.shots_list.split(",")]
    rows = []
    for n in range(args.n_min, args.n_max + 1):
        for variant in _variants(args, cfg):
            for shots in shots_list:
                diffs = []
                for k in range(args.seeds):
                    image = source_image(args.input, n, cfg.seed)
                    row_cfg = Config(**{**cfg.__dict__, "builder": variant, "shots": shots,
                                        "seed": cfg.seed + k})
                    diffs.append(run_pipeline(image, row_cfg).metrics["relative_difference"])
                rows.append([n, variant, shots, args.seeds, _fmt(float(np.median(diffs))),
                             ";".join(f"{d:.6f}" for d in diffs)])
    header = ["n", "variant", "shots", "seeds", "median_diff_rel", "diff_rel_per_seed"]
    _write(_csv(header, rows), args.out)
    return EXIT_OK


def cmd_counts(args, cfg: Config) -> int:
    image = ic.load_pgm(args.input)
    res = run_pipeline(image, cfg)
    doc = {}
    if res.raw is None:
        doc["distribution"] = [float(v) for v in res.distribution]
    else:
        doc["counts"] = json.loads(res.raw.to_json())
        if cfg.mitigation != "none":
            doc["mitigated"] = [float(v) for v in res.distribution]
    _write(json.dumps(doc, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_calibrate(args, cfg: Config) -> int:
    noise = sim.NoiseModel(cfg.p_meas, cfg.p_gate)
    if cfg.shots is None:
        cal = sim.exact_calibration(args.qubits, noise)
    else:
        cal = sim.build_calibration(args.qubits, noise, cfg.shots, seed=cfg.seed)
    _write(sim.calibration_to_json(cal) + "\n", args.out)
    return EXIT_OK


# argument parsing ------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _shots(text: str):
    if text.lower() == "exact":
        return None
    try:
        v = int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid shot count {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("shots must be positive")
    return v


def _prob(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("probability must lie in [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--builder", choices=["MARY", "MCRY", "mary", "mcry"], default="MARY")
    common.add_argument("--mode", choices=["linear", "arcsin"], default="linear")
    common.add_argument("--decode", choices=["ratio", "scaled"], default="ratio")
    common.add_argument("--shots", type=_shots, default=None, help="shot count or 'exact' (default)")
    common.add_argument("--p-meas", type=_prob, default=0.0)
    common.add_argument("--p-gate", type=_prob, default=0.0)
    common.add_argument("--mitigation", default="none", help="none, own, or a calibration JSON file")
    common.add_argument("--cal-shots", type=int, default=8192)
    common.add_argument("--coupling-map", default=None, help="backend name or coupling-map file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None)
    common.add_argument("--no-timing", action="store_true",
                        help="omit wall-clock fields so output is byte-reproducible")

    p = _Parser(prog="frqi", description="FRQI image encoding experiments")
    p.add_argument("--version", action="version", version=f"frqi {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("roundtrip", parents=[common], help="encode, run and decode one image")
    r.add_argument("input")
    r.add_argument("--metrics", default=None)

    s = sub.add_parser("sweep-size", parents=[common], help="depth, counts and error against size")
    s.add_argument("--n-min", type=int, default=1)
    s.add_argument("--n-max", type=int, default=4)
    s.add_argument("--variants", choices=["both", "MARY", "MCRY", "mary", "mcry"], default="both")
    s.add_argument("--input", default=None, help="PGM to downscale; synthetic image otherwise")
    s.add_argument("--construct-only", action="store_true")

    w = sub.add_parser("sweep-shots", parents=[common], help="error against shot count")
    w.add_argument("--n-min", type=int, default=1)
    w.add_argument("--n-max", type=int, default=4)
    w.add_argument("--variants", choices=["both", "MARY", "MCRY", "mary", "mcry"], default="MARY")
    w.add_argument("--shots-list", default="8192,1000000")
    w.add_argument("--seeds", type=int, default=5)
    w.add_argument("--input", default=None)

    c = sub.add_parser("counts", parents=[common], help="raw and mitigated measurement data")
    c.add_argument("input")

    k = sub.add_parser("calibrate", parents=[common], help="readout calibration matrix")
    k.add_argument("--qubits", type=int, default=1)
    return p


COMMANDS = {
    "roundtrip": cmd_roundtrip, "sweep-size": cmd_sweep_size, "sweep-shots": cmd_sweep_shots,
    "counts": cmd_counts, "calibrate": cmd_calibrate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = Config(
        builder=args.builder.upper(), mode=args.mode, decode=args.decode, shots=args.shots,
        p_meas=args.p_meas, p_gate=args.p_gate, mitigation=args.mitigation,
        cal_shots=args.cal_shots, coupling_map=args.coupling_map, seed=args.seed,
        timing=not args.no_timing,
    )
    try:
        if args.command not in ("calibrate", "sweep-shots"):
            cfg.check()
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"frqi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RESOURCE_ERRORS as exc:
        print(f"frqi: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ic.ImageError, CircuitError, RoutingError, sim.SimulationError, OSError,
            ValueError) as exc:
        print(f"frqi: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
