"""Pipeline orchestration: simulate -> sense -> recover -> reconstruct -> report.

Every stage reads its inputs from and writes its artifacts to the run's
output directory, with a provenance sidecar echoing the exact configuration,
so reruns with the same config are bitwise identical.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, dump_config, load_config
from .curvelet import fdct, ifdct, k_term, make_plan
from .errors import (
    InvalidConfigError,
    InvalidInputError,
    NumericalFailureError,
    WavecsError,
)
from .hadamard import make_sensing_operator, sensing_adjoint, sensing_apply
from .phantom_io import (
    WcsIOError,
    clock_phantom,
    emit_image,
    make_ball_phantom,
    mse,
    read_series,
    read_volume,
    write_metrics_csv,
    write_patterns,
    write_series,
    write_volume,
)
from .solver import recover_series
from .wave import blackman_degradation, blackman_smooth, degrade, spectral_forward, time_reversal

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

SERIES_FULL = "series_full.wcss"
SERIES_RECOVERED = "series_recovered.wcss"
SERIES_LINEAR = "series_linear.wcss"
SERIES_COMPRESSED = "series_compressed.wcss"
MEASUREMENTS = "measurements.wcss"
PATTERNS = "patterns.wcsh"
PHANTOM = "phantom.wcsv"
RECOVER_CSV = "recover_metrics.csv"
METRICS_CSV = "metrics.csv"
SUMMARY = "summary.txt"


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def _require(cfg: RunConfig, name: str, producer: str) -> str:
    path = _out(cfg, name)
    if not os.path.exists(path):
        raise WcsIOError(f"missing {path}; run the '{producer}' stage first")
    return path


def _write_provenance(cfg: RunConfig, stage: str) -> None:
    body = (
        f"stage={stage}\nwavecs={__version__}\nnumpy={np.__version__}\n"
        + dump_config(cfg)
    )
    with open(_out(cfg, f"{stage}.provenance.txt"), "w") as fh:
        fh.write(body)


def _effective_workers(cfg: RunConfig) -> int:
    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


def _load_phantom(cfg: RunConfig) -> np.ndarray:
    if cfg.phantom_kind == "clock":
        return make_ball_phantom(clock_phantom(cfg.phantom_grid[0], seed=cfg.sensing_seed))
    volume, _ = read_volume(cfg.phantom_file)
    if volume.shape != cfg.phantom_grid:
        raise InvalidConfigError(
            f"phantom.file: volume shape {volume.shape} does not match phantom.grid {cfg.phantom_grid}"
        )
    return volume


def _build_plan(cfg: RunConfig, n1: int, n2: int):
    lf = cfg.lf_cutoffs()
    if lf is None:
        return make_plan(n1, n2, cfg.frame_scales, cfg.frame_angles)
    return make_plan(n1, n2, cfg.frame_scales, cfg.frame_angles, lf[0], lf[1])


def cmd_simulate(cfg: RunConfig) -> None:
    """Phantom -> Blackman smoothing -> spectral forward -> degradation."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    med = cfg.medium
    p0 = blackman_smooth(_load_phantom(cfg))
    write_volume(_out(cfg, PHANTOM), p0, med.dx, med.dt, med.c0)
    g = spectral_forward(p0, med)
    if cfg.degradation_enabled:
        spec = blackman_degradation(med.nt, g.shape[1], g.shape[2], cfg.temporal_cut, cfg.spatial_cut)
        g = degrade(g, spec)
    write_series(_out(cfg, SERIES_FULL), g, med.dx, med.dt, med.c0)
    _write_provenance(cfg, "simulate")
    log.info("simulate: wrote %s with shape %s", SERIES_FULL, g.shape)


def cmd_sense(cfg: RunConfig) -> None:
    """Per-time-step compressed measurements, plus the displayed patterns."""
    path = _require(cfg, SERIES_FULL, "simulate")
    g, meta = read_series(path)
    nt, n1, n2 = g.shape
    if n1 * n2 != 1 << cfg.sensor_log2n():
        raise InvalidConfigError(
            f"sensing: series plane {n1}x{n2} does not match phantom.grid sensing geometry"
        )
    op = make_sensing_operator(cfg.sensor_log2n(), cfg.measurement_count(), cfg.sensing_seed)
    measurements = np.stack([sensing_apply(op, g[t].ravel()) for t in range(nt)], axis=1)
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(cfg.sensing_seed + 1)
        measurements = measurements + cfg.noise_sigma * np.abs(measurements).max() * rng.standard_normal(
            measurements.shape
        )
    write_series(
        _out(cfg, MEASUREMENTS),
        measurements.T[:, :, None],
        meta["dx"],
        meta["dt"],
        meta["c0"],
    )
    write_patterns(_out(cfg, PATTERNS), op, cfg.sensing_seed)
    _write_provenance(cfg, "sense")
    log.info("sense: %d measurements per step over %d steps", op.m, nt)


def cmd_recover(cfg: RunConfig) -> None:
    """Independent SALSA recovery of every time step."""
    _require(cfg, SERIES_FULL, "simulate")
    meas_path = _require(cfg, MEASUREMENTS, "sense")
    stored, meta = read_series(meas_path)
    measurements = stored[:, :, 0].T  # (m, nt)
    g_full, _ = read_series(_out(cfg, SERIES_FULL))
    _, n1, n2 = g_full.shape
    op = make_sensing_operator(cfg.sensor_log2n(), measurements.shape[0], cfg.sensing_seed)
    plan = _build_plan(cfg, n1, n2)
    series, reports = recover_series(op, plan, measurements, cfg.solver, workers=_effective_workers(cfg))
    write_series(_out(cfg, SERIES_RECOVERED), series, meta["dx"], meta["dt"], meta["c0"])
    rows = [
        {
            "t_index": t,
            "iterations": r.iterations,
            "stop_reason": r.stop_reason,
            "residual": f"{r.final_residual:.9e}",
            "objective": f"{r.objective_trace[-1]:.9e}" if r.objective_trace else "nan",
        }
        for t, r in enumerate(reports)
    ]
    write_metrics_csv(_out(cfg, RECOVER_CSV), rows, ["t_index", "iterations", "stop_reason", "residual", "objective"])
    _write_provenance(cfg, "recover")
    failed = sum(1 for r in reports if r.stop_reason == "failed")
    log.info("recover: %d steps, %d failed", len(reports), failed)


def cmd_linear(cfg: RunConfig) -> None:
    """Zero-padded linear inversion baseline: adjoint applied to raw measurements."""
    meas_path = _require(cfg, MEASUREMENTS, "sense")
    stored, meta = read_series(meas_path)
    measurements = stored[:, :, 0].T
    g_full, _ = read_series(_require(cfg, SERIES_FULL, "simulate"))
    _, n1, n2 = g_full.shape
    op = make_sensing_operator(cfg.sensor_log2n(), measurements.shape[0], cfg.sensing_seed)
    series = np.stack(
        [sensing_adjoint(op, measurements[:, t]).reshape(n1, n2) for t in range(measurements.shape[1])]
    )
    write_series(_out(cfg, SERIES_LINEAR), series, meta["dx"], meta["dt"], meta["c0"])
    log.info("linear: wrote %s", SERIES_LINEAR)


_SOURCES = {
    "recovered": SERIES_RECOVERED,
    "full": SERIES_FULL,
    "linear": SERIES_LINEAR,
    "compressed": SERIES_COMPRESSED,
}


def cmd_reconstruct(cfg: RunConfig, source: str = "recovered") -> None:
    """Time reversal of a recorded/recovered series into a volume estimate."""
    if source not in _SOURCES:
        raise InvalidConfigError(f"reconstruct: unknown source {source!r}; one of {sorted(_SOURCES)}")
    producer = "recover" if source == "recovered" else source
    path = _require(cfg, _SOURCES[source], producer)
    g, meta = read_series(path)
    med = cfg.medium
    volume = time_reversal(g, med, cfg.phantom_grid)
    write_volume(_out(cfg, f"volume_{source}.wcsv"), volume, meta["dx"], meta["dt"], meta["c0"])
    emit_image(volume[:, volume.shape[1] // 2, :], _out(cfg, f"slice_{source}.pgm"))
    emit_image(volume.max(axis=2), _out(cfg, f"mip_{source}.pgm"))
    log.info("reconstruct(%s): volume and images written", source)


def cmd_report(cfg: RunConfig) -> None:
    """Per-step MSE curves (k-term compression vs recovery) and image MSEs."""
    g_full, meta = read_series(_require(cfg, SERIES_FULL, "simulate"))
    g_rec, _ = read_series(_require(cfg, SERIES_RECOVERED, "recover"))
    nt, n1, n2 = g_full.shape
    plan = _build_plan(cfg, n1, n2)
    k = int(round(cfg.kterm_fraction * plan.total_coeffs))
    rows = []
    compressed = np.empty_like(g_full)
    for t in range(nt):
        coeffs = fdct(plan, g_full[t])
        compressed[t] = ifdct(plan, k_term(coeffs, k))
        rows.append(
            {
                "t_index": t,
                "mse_compressed": f"{mse(compressed[t], g_full[t]):.9e}",
                "mse_recovered": f"{mse(g_rec[t], g_full[t]):.9e}",
            }
        )
    write_series(_out(cfg, SERIES_COMPRESSED), compressed, meta["dx"], meta["dt"], meta["c0"])
    write_metrics_csv(_out(cfg, METRICS_CSV), rows, ["t_index", "mse_compressed", "mse_recovered"])

    lines = [
        f"time steps: {nt}",
        f"k-term k: {k} of {plan.total_coeffs} coefficients",
        f"mean mse_compressed: {np.mean([float(r['mse_compressed']) for r in rows]):.9e}",
        f"mean mse_recovered: {np.mean([float(r['mse_recovered']) for r in rows]):.9e}",
    ]
    baseline_path = _out(cfg, "volume_full.wcsv")
    if os.path.exists(baseline_path):
        baseline, _ = read_volume(baseline_path)
        for source in ("recovered", "linear", "compressed"):
            path = _out(cfg, f"volume_{source}.wcsv")
            if os.path.exists(path):
                volume, _ = read_volume(path)
                lines.append(f"image mse {source} vs full: {mse(volume, baseline):.9e}")
    with open(_out(cfg, SUMMARY), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    _write_provenance(cfg, "report")
    log.info("report: wrote %s and %s", METRICS_CSV, SUMMARY)


def cmd_selftest() -> None:
    """Small invariant suite on tiny sizes; prints one line per check."""
    from .hadamard import fwht
    from .solver import OperatorPair, smw_apply, soft_threshold

    rng = np.random.default_rng(0)
    checks = []

    v = rng.standard_normal(256)
    checks.append(("fwht involution", np.abs(fwht(fwht(v)) - v).max() < 1e-12))
    checks.append(
        ("fwht isometry", abs(np.linalg.norm(fwht(v)) / np.linalg.norm(v) - 1) < 1e-12)
    )

    op = make_sensing_operator(8, 64, seed=1)
    g, b = rng.standard_normal(256), rng.standard_normal(64)
    dot_gap = abs(sensing_apply(op, g) @ b - g @ sensing_adjoint(op, b))
    checks.append(("sensing adjoint", dot_gap < 1e-12 * max(1.0, abs(sensing_apply(op, g) @ b))))
    rt = sensing_apply(op, sensing_adjoint(op, b))
    checks.append(("sensing rows orthonormal", np.abs(rt - b).max() < 1e-12))

    plan = make_plan(32, 32, 2, 8)
    img = rng.standard_normal((32, 32))
    coeffs = fdct(plan, img)
    checks.append(("curvelet isometry", abs(plan.pack(coeffs) @ plan.pack(coeffs) / (img * img).sum() - 1) < 1e-10))
    checks.append(("curvelet roundtrip", np.abs(ifdct(plan, coeffs) - img).max() < 1e-10))

    q, _ = np.linalg.qr(rng.standard_normal((32, 8)))
    A = OperatorPair(apply=lambda f: q.T @ f, adjoint=lambda r: q @ r)
    r = rng.standard_normal(32)
    x = smw_apply(A, 0.7, r)
    checks.append(("smw inverse", np.abs(q @ (q.T @ x) + 0.7 * x - r).max() < 1e-10))
    checks.append(
        ("soft threshold", np.array_equal(soft_threshold(np.array([3.0, -1.0, 0.5]), 1.0), [2.0, 0.0, 0.0]))
    )

    failed = False
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        failed |= not ok
    if failed:
        raise NumericalFailureError("selftest failed")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavecs",
        description="Compressed sensing of acoustic fields on a planar sensor",
    )
    parser.add_argument("--config", help="path to the run configuration file")
    parser.add_argument("--out", help="override output.dir")
    parser.add_argument("--workers", type=int, help="override worker count")
    parser.add_argument("--seed", type=int, help="override sensing.seed")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "sense", "recover", "linear", "report", "selftest"):
        sub.add_parser(name)
    rec = sub.add_parser("reconstruct")
    rec.add_argument("--source", default="recovered", choices=sorted(_SOURCES))
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            cmd_selftest()
            return EXIT_OK
        if not args.config:
            raise InvalidConfigError("config: --config is required for this command")
        cfg = load_config(args.config)
        if args.out:
            cfg.out_dir = args.out
        if args.workers is not None:
            cfg.workers = args.workers
        if args.seed is not None:
            cfg.sensing_seed = args.seed
        os.makedirs(cfg.out_dir, exist_ok=True)
        if args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "sense":
            cmd_sense(cfg)
        elif args.command == "recover":
            cmd_recover(cfg)
        elif args.command == "linear":
            cmd_linear(cfg)
        elif args.command == "reconstruct":
            cmd_reconstruct(cfg, source=args.source)
        elif args.command == "report":
            cmd_report(cfg)
        return EXIT_OK
    except (InvalidConfigError,) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except NumericalFailureError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (WcsIOError, OSError) as exc:
        log.error("i/o failure: %s", exc)
        return EXIT_IO
    except (InvalidInputError, WavecsError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
