"""Command-line driver: ``simulate``, ``invert``, ``verify`` and ``plotdata``.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import checks
from .bie import SingularSystemError
from .cq import make_grid
from .forward import ElasticMedium, IncidentWave, TraceSet, add_noise, forward_solve
from .geometry import (GeometryError, ObservationCircle, curve_from_dict, curve_to_dict, hausdorff_distance,
                       write_polyline_csv)
from .inverse import InverseConfig, initial_curve, reconstruct
from .specfun import BesselOverflowError

log = logging.getLogger("elastic_cq")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


class DataFormatError(OSError):
    """Malformed trace file or report."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------
@dataclass
class MediumConfig:
    lam: float = 3.88
    mu: float = 2.56


@dataclass
class WaveConfig:
    kind: str = "compressional"
    theta_inc: float = 15 * np.pi / 16
    R0: float = 1.2
    Tw: float = 5.0


@dataclass
class TimeConfig:
    T: float = 10.0
    N: int = 128
    lambda_tilde: float | str = "auto"


@dataclass
class ForwardConfig:
    n_tilde: int = 50


@dataclass
class InitialConfig:
    r0: float = 0.4
    center: list = field(default_factory=lambda: [-1.35, -0.35])


@dataclass
class InverseSection:
    n_tilde: int = 32
    M: int = 3
    rho: float = 0.9
    loop: int = 4
    epsilon: float | str = "auto"
    epsilon_tilde: float = 1e-6
    max_ll: int | str = "auto"
    initial: InitialConfig = field(default_factory=InitialConfig)


@dataclass
class ObsConfig:
    b: list = field(default_factory=lambda: [0.0, 0.0])
    R: float = 2.0
    n_bar: int = 30


@dataclass
class NoiseConfig:
    delta: float = 0.001
    seed: int = 0


@dataclass
class RunConfig:
    """Complete run description; every field has the reference default."""

    medium: MediumConfig = field(default_factory=MediumConfig)
    wave: WaveConfig = field(default_factory=WaveConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    forward: ForwardConfig = field(default_factory=ForwardConfig)
    inverse: InverseSection = field(default_factory=InverseSection)
    obs: ObsConfig = field(default_factory=ObsConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    truth: dict = field(default_factory=lambda: {"kind": "apple", "center": [0.0, 0.0]})

    # -- (de)serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config: expected a JSON object")
        cfg = _build(cls, data, "config")
        cfg.validate(allow_inverse_crime=True)
        return cfg

    def validate(self, allow_inverse_crime: bool = False) -> None:
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg}")

        try:
            ElasticMedium(self.medium.lam, self.medium.mu)
        except ValueError as exc:
            raise ConfigError(f"medium: {exc}") from None
        need(self.wave.kind in ("compressional", "shear"), "wave.kind", "must be 'compressional' or 'shear'")
        need(self.wave.Tw > 0, "wave.Tw", "must be positive")
        need(self.time.T > 0, "time.T", "must be positive")
        need(int(self.time.N) == self.time.N and self.time.N >= 1, "time.N", "must be an integer >= 1")
        lt = self.time.lambda_tilde
        need(lt == "auto" or (isinstance(lt, (int, float)) and 0 < lt < 1), "time.lambda_tilde",
             "must be 'auto' or lie in (0, 1)")
        need(self.forward.n_tilde >= 2, "forward.n_tilde", "must be >= 2")
        inv = self.inverse
        need(inv.n_tilde >= 2, "inverse.n_tilde", "must be >= 2")
        need(inv.M >= 0, "inverse.M", "must be >= 0")
        need(0 <= inv.rho <= 1, "inverse.rho", "must lie in [0, 1]")
        need(inv.loop >= 1, "inverse.loop", "must be >= 1")
        need(inv.epsilon == "auto" or (isinstance(inv.epsilon, (int, float)) and inv.epsilon > 0),
             "inverse.epsilon", "must be 'auto' or positive")
        need(inv.epsilon_tilde >= 0, "inverse.epsilon_tilde", "must be >= 0")
        need(inv.max_ll == "auto" or (isinstance(inv.max_ll, int) and inv.max_ll >= 0), "inverse.max_ll",
             "must be 'auto' or a non-negative integer")
        need(inv.initial.r0 > 0, "inverse.initial.r0", "must be positive")
        need(len(inv.initial.center) == 2, "inverse.initial.center", "must have two entries")
        need(len(self.obs.b) == 2, "obs.b", "must have two entries")
        need(self.obs.R > 0, "obs.R", "must be positive")
        need(self.obs.n_bar >= 1, "obs.n_bar", "must be >= 1")
        need(self.noise.delta >= 0, "noise.delta", "must be >= 0")
        try:
            curve_from_dict(self.truth)
        except (GeometryError, TypeError, ValueError) as exc:
            raise ConfigError(f"truth: {exc}") from None
        if self.forward.n_tilde == self.inverse.n_tilde and not allow_inverse_crime:
            raise ConfigError("inverse.n_tilde: equals forward.n_tilde (inverse crime); "
                              "pass --allow-inverse-crime to permit")

    # -- library objects -----------------------------------------------------
    def medium_obj(self) -> ElasticMedium:
        return ElasticMedium(self.medium.lam, self.medium.mu)

    def wave_obj(self) -> IncidentWave:
        return IncidentWave(self.wave.kind, self.wave.theta_inc, self.wave.R0, self.wave.Tw)

    def obs_obj(self) -> ObservationCircle:
        return ObservationCircle(tuple(self.obs.b), self.obs.R, self.obs.n_bar)

    def truth_curve(self):
        return curve_from_dict(self.truth)

    def inverse_obj(self) -> InverseConfig:
        inv = self.inverse
        return InverseConfig(
            n_tilde=inv.n_tilde, degree=inv.M, rho=inv.rho, loop=inv.loop,
            epsilon=None if inv.epsilon == "auto" else float(inv.epsilon),
            epsilon_tilde=inv.epsilon_tilde,
            max_ll=None if inv.max_ll == "auto" else int(inv.max_ll),
            r0=inv.initial.r0, center=tuple(inv.initial.center), delta=self.noise.delta,
        )


def _build(cls, data: dict, path: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown field")
    kwargs = {}
    default = cls()
    for name, f in known.items():
        if name not in data:
            continue
        val = data[name]
        cur = getattr(default, name)
        where = f"{path}.{name}"
        if hasattr(cur, "__dataclass_fields__"):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}: expected an object")
            kwargs[name] = _build(type(cur), val, where)
        elif isinstance(cur, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}: expected an object")
            kwargs[name] = copy.deepcopy(val)
        elif isinstance(cur, str) and cur == "auto":
            if not (val == "auto" or (isinstance(val, (int, float)) and not isinstance(val, bool))):
                raise ConfigError(f"{where}: expected a number or 'auto'")
            kwargs[name] = val
        elif isinstance(cur, bool) or isinstance(cur, str):
            if not isinstance(val, type(cur)):
                raise ConfigError(f"{where}: expected {type(cur).__name__}")
            kwargs[name] = val
        elif isinstance(cur, int):
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{where}: expected an integer")
            kwargs[name] = val
        elif isinstance(cur, float):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{where}: expected a number")
            kwargs[name] = float(val)
        elif isinstance(cur, list):
            if not isinstance(val, list) or not all(isinstance(v, (int, float)) for v in val):
                raise ConfigError(f"{where}: expected a list of numbers")
            kwargs[name] = [float(v) for v in val]
        else:
            kwargs[name] = val
    return cls(**kwargs)


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------------------
# trace files
# ---------------------------------------------------------------------------
def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_traces(path, traces: TraceSet, cfg: RunConfig, seed: int, delta: float, n_tilde: int) -> None:
    """CSV ``n, t, point_index, varsigma, v1, v2`` plus a JSON metadata sidecar."""
    path = Path(path)
    t = traces.times
    ang = traces.angles
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "t", "point_index", "varsigma", "v1", "v2"])
        for n in range(traces.values.shape[0]):
            for i in range(traces.values.shape[1]):
                v1, v2 = traces.values[n, i]
                w.writerow([n, f"{t[n]:.17g}", i, f"{ang[i]:.17g}", f"{v1:.17g}", f"{v2:.17g}"])
    obs = traces.obs
    meta = {
        "T": traces.cqgrid.T,
        "N": traces.cqgrid.N,
        "lambda_tilde": traces.cqgrid.lam,
        "lame": {"lambda": cfg.medium.lam, "mu": cfg.medium.mu},
        "obs": {"b1": obs.center[0], "b2": obs.center[1], "R": obs.radius, "n_bar": obs.n_bar},
        "wave": {"kind": cfg.wave.kind, "theta_inc": cfg.wave.theta_inc, "R0": cfg.wave.R0, "Tw": cfg.wave.Tw},
        "seed": int(seed),
        "delta": float(delta),
        "n_tilde": int(n_tilde),
    }
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_traces(path) -> tuple[TraceSet, dict]:
    path = Path(path)
    try:
        with open(sidecar_path(path)) as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{sidecar_path(path)}: invalid JSON ({exc})") from None
    try:
        N = int(meta["N"])
        n_bar = int(meta["obs"]["n_bar"])
        grid = make_grid(float(meta["T"]), N, float(meta["lambda_tilde"]))
        obs = ObservationCircle((meta["obs"]["b1"], meta["obs"]["b2"]), float(meta["obs"]["R"]), n_bar)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{sidecar_path(path)}: bad metadata ({exc})") from None
    values = np.full((N + 1, 2 * n_bar, 2), np.nan)
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header != ["n", "t", "point_index", "varsigma", "v1", "v2"]:
            raise DataFormatError(f"{path}:1: unexpected header {header}")
        for row in rd:
            line = rd.line_num
            try:
                if len(row) != 6:
                    raise ValueError(f"expected 6 columns, got {len(row)}")
                n, i = int(row[0]), int(row[2])
                values[n, i] = float(row[4]), float(row[5])
            except (ValueError, IndexError) as exc:
                raise DataFormatError(f"{path}:{line}: cannot parse row ({exc})") from None
    if np.isnan(values).any():
        raise DataFormatError(f"{path}: missing samples for the declared (N, n_bar)")
    return TraceSet(grid, obs, values, meta={"delta": meta.get("delta"), "seed": meta.get("seed")}), meta


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------
def cmd_simulate(cfg: RunConfig, out_path, seed: int | None = None, threads: int = 1) -> TraceSet:
    """Synthesize noisy traces for ``cfg.truth`` and write them to ``out_path``."""
    seed = cfg.noise.seed if seed is None else seed
    lam = cfg.time.lambda_tilde
    traces = forward_solve(cfg.truth_curve(), cfg.obs_obj(), cfg.wave_obj(), cfg.medium_obj(), cfg.time.T,
                           cfg.time.N, cfg.forward.n_tilde, lam, workers=threads)
    noisy = add_noise(traces, cfg.noise.delta, seed)
    write_traces(out_path, noisy, cfg, seed, cfg.noise.delta, cfg.forward.n_tilde)
    return noisy


def _check_metadata(meta: dict, cfg: RunConfig) -> None:
    try:
        _compare_metadata(meta, cfg)
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"trace metadata: missing or malformed entry {exc}") from None


def _compare_metadata(meta: dict, cfg: RunConfig) -> None:
    grid = make_grid(cfg.time.T, cfg.time.N, cfg.time.lambda_tilde)
    pairs = [
        ("T", meta["T"], cfg.time.T),
        ("N", meta["N"], cfg.time.N),
        ("lambda_tilde", meta["lambda_tilde"], grid.lam),
        ("obs.b1", meta["obs"]["b1"], cfg.obs.b[0]),
        ("obs.b2", meta["obs"]["b2"], cfg.obs.b[1]),
        ("obs.R", meta["obs"]["R"], cfg.obs.R),
        ("obs.n_bar", meta["obs"]["n_bar"], cfg.obs.n_bar),
        ("lame.lambda", meta["lame"]["lambda"], cfg.medium.lam),
        ("lame.mu", meta["lame"]["mu"], cfg.medium.mu),
        ("wave.theta_inc", meta["wave"]["theta_inc"], cfg.wave.theta_inc),
        ("wave.R0", meta["wave"]["R0"], cfg.wave.R0),
    ]
    for name, a, b in pairs:
        if not np.isclose(float(a), float(b), rtol=1e-12, atol=1e-14):
            raise ConfigError(f"{name}: data has {a}, config has {b}")
    if meta["wave"]["kind"] != cfg.wave.kind:
        raise ConfigError(f"wave.kind: data has {meta['wave']['kind']}, config has {cfg.wave.kind}")


def cmd_invert(data_path, cfg: RunConfig, out_path, allow_inverse_crime: bool = False) -> dict:
    """Reconstruct from a trace file; writes a JSON-lines report and returns the summary record."""
    traces, meta = read_traces(data_path)
    _check_metadata(meta, cfg)
    if int(meta.get("n_tilde", -1)) == cfg.inverse.n_tilde:
        if not allow_inverse_crime:
            raise ConfigError("inverse.n_tilde: matches the data's forward n_tilde (inverse crime); "
                              "pass --allow-inverse-crime to permit")
        log.warning("inverse crime: data and inversion share n_tilde=%d", cfg.inverse.n_tilde)
    inv = cfg.inverse_obj()
    inv.delta = float(meta.get("delta", cfg.noise.delta))
    truth = cfg.truth_curve()
    init = initial_curve(inv.r0, inv.center, inv.degree)
    out_path = Path(out_path)
    with open(out_path, "w") as fh:
        header = {"record": "header", "config": cfg.to_dict(), "epsilon": inv.resolved_epsilon(),
                  "initial": curve_to_dict(init), "truth": curve_to_dict(truth)}
        fh.write(json.dumps(header) + "\n")

        def emit(rec):
            fh.write(json.dumps({"record": "iteration", **rec.to_dict()}) + "\n")

        state = reconstruct(traces, cfg.wave_obj(), cfg.medium_obj(), inv, emit)
        final_E = next((r.E for r in reversed(state.history) if r.E is not None), None)
        summary = {"record": "final", "status": state.status, "ll": state.ll, "E": final_E,
                   "rejections": state.rejections, "curve": curve_to_dict(state.curve),
                   "hausdorff": hausdorff_distance(state.curve, truth)}
        fh.write(json.dumps(summary) + "\n")
    return summary


def cmd_verify(out=None) -> list[dict]:
    """Run the built-in numerical checks; one JSON record per check."""
    results = []

    def record(name, value, tol, passed):
        rec = {"check": name, "value": float(value), "tolerance": tol, "passed": bool(passed)}
        results.append(rec)
        if out is not None:
            out.write(json.dumps(rec) + "\n")
            out.flush()

    for n in (16, 32, 50):
        err, total = checks.quadrature_identity_error(n)
        record(f"kress_cos_identity_n{n}", err, 1e-10, err <= 1e-10)
        record(f"kress_row_sum_n{n}", total, 1e-12, total <= 1e-12)
    from .geometry import peanut

    worst = max(checks.manufactured_error(peanut(), s, 50) for s in checks.manufactured_frequencies())
    record("manufactured_solution_n50", worst, 1e-6, worst <= 1e-6)
    order = float(np.min(checks.observed_orders(checks.cq_model_errors(), (16, 32, 64, 128))))
    record("cq_model_order", order, 1.9, order >= 1.9)
    fo = checks.frechet_fd_order()
    record("frechet_fd_order", fo, 0.9, fo >= 0.9)
    # diagnostic only: re-solved densities add the density derivative B leaves out
    resolved = float(checks.frechet_resolved_errors()[-1])
    record("frechet_resolved_density_error", resolved, None, True)
    return results


def cmd_plotdata(report_path, out_dir) -> list[Path]:
    """Polyline CSVs per snapshot, ``errors.csv`` and PNG figures from a reconstruction report."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    records = []
    with open(report_path) as fh:
        for k, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{report_path}:{k}: invalid JSON ({exc})") from None
    out_dir.mkdir(parents=True, exist_ok=True)
    snap_dir = out_dir / "polylines"
    snap_dir.mkdir(exist_ok=True)
    written = []
    header = next((r for r in records if r.get("record") == "header"), None)
    final = next((r for r in records if r.get("record") == "final"), None)
    iters = [r for r in records if r.get("record", "iteration") == "iteration"]

    for r in iters:
        p = snap_dir / f"snapshot_{int(r['ll']):05d}.csv"
        write_polyline_csv(p, curve_from_dict(r["curve"]))
        written.append(p)
    named = {}
    if header is not None:
        named["exact"] = header.get("truth")
        named["initial"] = header.get("initial")
    if final is not None:
        named["reconstructed"] = final.get("curve")
    curves = {}
    for name, d in named.items():
        if d is None:
            continue
        curves[name] = curve_from_dict(d)
        p = out_dir / f"{name}.csv"
        write_polyline_csv(p, curves[name])
        written.append(p)

    err_path = out_dir / "errors.csv"
    with open(err_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ll", "E"])
        for r in iters:
            if r.get("E") is not None:
                w.writerow([int(r["ll"]), f"{float(r['E']):.17g}"])
    written.append(err_path)

    if curves:
        fig, ax = plt.subplots(figsize=(5, 5))
        styles = {"exact": "-", "reconstructed": "--", "initial": "-."}
        for name, c in curves.items():
            pts = c.polyline(256)
            ax.plot(pts[:, 0], pts[:, 1], styles.get(name, ":"), label=name)
        ax.set_aspect("equal")
        ax.legend()
        p = out_dir / "reconstruction.png"
        fig.savefig(p, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(p)
    pts = [(int(r["ll"]), float(r["E"])) for r in iters if r.get("E") is not None]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if pts:
        ll, E = zip(*pts)
        ax.semilogy(ll, E, ".-")
    ax.set_xlabel("ll")
    ax.set_ylabel("E")
    p = out_dir / "errors.png"
    fig.savefig(p, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(p)
    return written


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="elastic-cq", description="Time-domain elastic obstacle scattering.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="run configuration (JSON)")
        p.add_argument("--seed", type=int, help="override noise.seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for frequency solves")
        p.add_argument("--allow-inverse-crime", action="store_true",
                       help="permit identical forward and inverse node counts")

    p = sub.add_parser("simulate", help="synthesize noisy trace data")
    common(p)
    p.add_argument("--out", required=True)
    p = sub.add_parser("invert", help="reconstruct the obstacle from trace data")
    common(p)
    p.add_argument("data")
    p.add_argument("--out", required=True)
    p = sub.add_parser("verify", help="run numerical self-checks")
    common(p)
    p.add_argument("--out", help="also write the JSON-lines report here")
    p = sub.add_parser("plotdata", help="export polylines, errors and figures from a report")
    common(p)
    p.add_argument("report")
    p.add_argument("--out", required=True, help="output directory")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("simulate", "invert"):
            cfg = load_config(args.config)
            cfg.validate(args.allow_inverse_crime)
            if args.allow_inverse_crime and cfg.forward.n_tilde == cfg.inverse.n_tilde:
                log.warning("inverse crime: forward and inverse n_tilde are both %d", cfg.forward.n_tilde)
            if args.command == "simulate":
                cmd_simulate(cfg, args.out, args.seed, max(1, args.threads))
            else:
                if args.seed is not None:
                    cfg.noise.seed = args.seed
                summary = cmd_invert(args.data, cfg, args.out, args.allow_inverse_crime)
                print(json.dumps({k: summary[k] for k in ("status", "ll", "E", "hausdorff")}))
        elif args.command == "verify":
            fh = open(args.out, "w") if args.out else None
            try:
                results = cmd_verify(fh)
            finally:
                if fh:
                    fh.close()
            for r in results:
                print(json.dumps(r))
            if not all(r["passed"] for r in results):
                return EXIT_NUMERICAL
        elif args.command == "plotdata":
            cmd_plotdata(args.report, args.out)
    except (DataFormatError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (SingularSystemError, BesselOverflowError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL
    except (ConfigError, GeometryError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
