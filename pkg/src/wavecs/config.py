"""Run configuration: flat ``section.key=value`` files with strict validation."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import InvalidConfigError
from .solver import RecoveryConfig
from .wave import MediumSpec

__all__ = ["RunConfig", "parse_config_text", "load_config"]


@dataclass
class RunConfig:
    """Everything a pipeline run needs; see README for the key reference."""

    phantom_kind: str = "clock"
    phantom_grid: tuple[int, int, int] = (64, 64, 64)
    phantom_file: str | None = None
    medium: MediumSpec = field(default_factory=MediumSpec)
    degradation_enabled: bool = True
    temporal_cut: float = 1.0
    spatial_cut: float = 1.0
    sensing_fraction: float | None = 0.18
    sensing_m: int | None = None
    sensing_seed: int = 1234
    noise_sigma: float = 0.0
    frame_kind: str = "lowfreq"
    frame_scales: int = 3
    frame_angles: int = 16
    frame_lf1: int | None = None
    frame_lf2: int | None = None
    solver: RecoveryConfig = field(default_factory=RecoveryConfig)
    kterm_fraction: float = 0.03
    out_dir: str = "out"
    workers: int = 0  # 0: use the available CPU count

    def measurement_count(self) -> int:
        n = self.phantom_grid[0] * self.phantom_grid[1]
        if self.sensing_m is not None:
            return self.sensing_m
        return int(self.sensing_fraction * n)

    def sensor_log2n(self) -> int:
        n = self.phantom_grid[0] * self.phantom_grid[1]
        if n & (n - 1):
            raise InvalidConfigError(
                f"phantom.grid: sensor pixel count {n} must be a power of two for Hadamard sensing"
            )
        return n.bit_length() - 1

    def lf_cutoffs(self) -> tuple[int, int] | None:
        if self.frame_kind == "standard":
            return None
        n1, n2 = self.phantom_grid[0], self.phantom_grid[1]
        lf1 = self.frame_lf1 if self.frame_lf1 is not None else (3 * n1) // 4
        lf2 = self.frame_lf2 if self.frame_lf2 is not None else (3 * n2) // 4
        return (lf1, lf2)


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _fail(key: str, message: str):
    raise InvalidConfigError(f"{key}: {message}")


def _as_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        _fail(key, f"expected an integer, got {raw!r}")


def _as_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError:
        _fail(key, f"expected a number, got {raw!r}")


def _as_bool(raw: str, key: str) -> bool:
    try:
        return _BOOL[raw.strip().lower()]
    except KeyError:
        _fail(key, f"expected true/false, got {raw!r}")


def parse_config_text(text: str) -> RunConfig:
    """Parse and validate a config; errors carry the offending field path."""
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise InvalidConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in entries:
            raise InvalidConfigError(f"{key}: duplicate entry (line {lineno})")
        entries[key] = value.strip()

    cfg = RunConfig()
    med = {"c0": 1500.0, "rho0": 1000.0, "dx": 5e-5, "dt": 1e-8, "nt": 128}
    sol = {"tau_factor": 0.01, "mu_factor": 5.0, "tol": 5e-4, "max_iters": 100}

    handlers = {
        "phantom.kind": lambda v, k: setattr(cfg, "phantom_kind", v),
        "phantom.grid": lambda v, k: setattr(
            cfg, "phantom_grid", tuple(_as_int(p.strip(), k) for p in v.split(","))
        ),
        "phantom.file": lambda v, k: setattr(cfg, "phantom_file", v),
        "medium.c0": lambda v, k: med.__setitem__("c0", _as_float(v, k)),
        "medium.rho0": lambda v, k: med.__setitem__("rho0", _as_float(v, k)),
        "medium.dx": lambda v, k: med.__setitem__("dx", _as_float(v, k)),
        "medium.dt": lambda v, k: med.__setitem__("dt", _as_float(v, k)),
        "medium.nt": lambda v, k: med.__setitem__("nt", _as_int(v, k)),
        "degradation.enabled": lambda v, k: setattr(cfg, "degradation_enabled", _as_bool(v, k)),
        "degradation.temporal_cut": lambda v, k: setattr(cfg, "temporal_cut", _as_float(v, k)),
        "degradation.spatial_cut": lambda v, k: setattr(cfg, "spatial_cut", _as_float(v, k)),
        "sensing.fraction": lambda v, k: setattr(cfg, "sensing_fraction", _as_float(v, k)),
        "sensing.m": lambda v, k: setattr(cfg, "sensing_m", _as_int(v, k)),
        "sensing.seed": lambda v, k: setattr(cfg, "sensing_seed", _as_int(v, k)),
        "sensing.noise_sigma": lambda v, k: setattr(cfg, "noise_sigma", _as_float(v, k)),
        "frame.kind": lambda v, k: setattr(cfg, "frame_kind", v),
        "frame.scales": lambda v, k: setattr(cfg, "frame_scales", _as_int(v, k)),
        "frame.angles": lambda v, k: setattr(cfg, "frame_angles", _as_int(v, k)),
        "frame.lf1": lambda v, k: setattr(cfg, "frame_lf1", _as_int(v, k)),
        "frame.lf2": lambda v, k: setattr(cfg, "frame_lf2", _as_int(v, k)),
        "solver.tau_factor": lambda v, k: sol.__setitem__("tau_factor", _as_float(v, k)),
        "solver.mu_factor": lambda v, k: sol.__setitem__("mu_factor", _as_float(v, k)),
        "solver.tol": lambda v, k: sol.__setitem__("tol", _as_float(v, k)),
        "solver.max_iters": lambda v, k: sol.__setitem__("max_iters", _as_int(v, k)),
        "report.kterm_fraction": lambda v, k: setattr(cfg, "kterm_fraction", _as_float(v, k)),
        "output.dir": lambda v, k: setattr(cfg, "out_dir", v),
        "workers": lambda v, k: setattr(cfg, "workers", _as_int(v, k)),
    }
    for key, value in entries.items():
        handler = handlers.get(key)
        if handler is None:
            raise InvalidConfigError(f"{key}: unknown configuration key")
        handler(value, key)

    try:
        cfg.medium = MediumSpec(**med)
    except Exception as exc:
        raise InvalidConfigError(f"medium: {exc}") from exc
    try:
        cfg.solver = RecoveryConfig(**sol)
    except Exception as exc:
        raise InvalidConfigError(f"solver: {exc}") from exc
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.phantom_kind not in ("clock", "file"):
        _fail("phantom.kind", f"must be 'clock' or 'file', got {cfg.phantom_kind!r}")
    if len(cfg.phantom_grid) != 3 or min(cfg.phantom_grid) < 2:
        _fail("phantom.grid", "expected three dimensions of at least 2")
    if cfg.phantom_kind == "file":
        if not cfg.phantom_file:
            _fail("phantom.file", "required when phantom.kind=file")
        if not os.path.exists(cfg.phantom_file):
            _fail("phantom.file", f"path does not exist: {cfg.phantom_file}")
    if cfg.sensing_fraction is not None and not 0.0 < cfg.sensing_fraction <= 1.0:
        _fail("sensing.fraction", f"must lie in (0, 1], got {cfg.sensing_fraction}")
    cfg.sensor_log2n()
    n = cfg.phantom_grid[0] * cfg.phantom_grid[1]
    m = cfg.measurement_count()
    if not 1 <= m <= n:
        _fail("sensing.m", f"measurement count {m} must lie in 1..{n}")
    if cfg.noise_sigma < 0:
        _fail("sensing.noise_sigma", "must be nonnegative")
    if cfg.frame_kind not in ("standard", "lowfreq"):
        _fail("frame.kind", f"must be 'standard' or 'lowfreq', got {cfg.frame_kind!r}")
    if (cfg.frame_lf1 is None) != (cfg.frame_lf2 is None):
        _fail("frame.lf1", "give both frame.lf1 and frame.lf2 or neither")
    if not 0.0 < cfg.kterm_fraction <= 1.0:
        _fail("report.kterm_fraction", "must lie in (0, 1]")
    if not 0.0 < cfg.temporal_cut <= 1.0:
        _fail("degradation.temporal_cut", "must lie in (0, 1]")
    if not 0.0 < cfg.spatial_cut <= 1.0:
        _fail("degradation.spatial_cut", "must lie in (0, 1]")
    if cfg.workers < 0:
        _fail("workers", "must be nonnegative (0 = autodetect)")


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidConfigError(f"config: cannot read {path}: {exc}") from exc
    return parse_config_text(text)


def dump_config(cfg: RunConfig) -> str:
    """Canonical key=value echo used in provenance sidecars."""
    lines = [
        f"phantom.kind={cfg.phantom_kind}",
        f"phantom.grid={cfg.phantom_grid[0]},{cfg.phantom_grid[1]},{cfg.phantom_grid[2]}",
    ]
    if cfg.phantom_file:
        lines.append(f"phantom.file={cfg.phantom_file}")
    lines += [
        f"medium.c0={cfg.medium.c0!r}",
        f"medium.rho0={cfg.medium.rho0!r}",
        f"medium.dx={cfg.medium.dx!r}",
        f"medium.dt={cfg.medium.dt!r}",
        f"medium.nt={cfg.medium.nt}",
        f"degradation.enabled={str(cfg.degradation_enabled).lower()}",
        f"degradation.temporal_cut={cfg.temporal_cut!r}",
        f"degradation.spatial_cut={cfg.spatial_cut!r}",
        f"sensing.m={cfg.measurement_count()}",
        f"sensing.seed={cfg.sensing_seed}",
        f"sensing.noise_sigma={cfg.noise_sigma!r}",
        f"frame.kind={cfg.frame_kind}",
        f"frame.scales={cfg.frame_scales}",
        f"frame.angles={cfg.frame_angles}",
    ]
    lf = cfg.lf_cutoffs()
    if lf is not None:
        lines += [f"frame.lf1={lf[0]}", f"frame.lf2={lf[1]}"]
    lines += [
        f"solver.tau_factor={cfg.solver.tau_factor!r}",
        f"solver.mu_factor={cfg.solver.mu_factor!r}",
        f"solver.tol={cfg.solver.tol!r}",
        f"solver.max_iters={cfg.solver.max_iters}",
        f"report.kterm_fraction={cfg.kterm_fraction!r}",
        f"output.dir={cfg.out_dir}",
        f"workers={cfg.workers}",
    ]
    return "\n".join(lines) + "\n"
