"""Run configuration: plain-text key=value grammar with validation.

One ``key = value`` assignment per line, ``#`` comments, dotted keys for
nesting, vectors as comma triples.  Parsing collects every error (line, key,
reason) instead of stopping at the first, and ``serialize``/``parse_config``
round-trip exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

TAU_MODES = ("fixed", "power")


@dataclass(frozen=True)
class BumpSpec:
    center: tuple
    amplitude: float
    width: float


@dataclass(frozen=True)
class RunConfig:
    m_core: float = 0.0
    s_reg: float = 0.5
    bumps: tuple = ()
    sigma: float = 1.0
    h: float = 0.25
    L_box: float = 12.0
    r0: float = 4.0
    tau_mode: str = "fixed"
    tau0: float = 0.05
    epsilon: float = 0.005
    cylinder_direction: tuple = (0.0, 0.0, 1.0)
    cylinder_L: float = 4.0
    coverage_D: float = 6.0
    coverage_voxel: float = 0.25
    bg_Lambda: float = 0.0
    bg_radii: tuple = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    run_geodesic: bool = True
    run_cylinder: bool = True
    run_coverage: bool = True
    run_injectivity: bool = True
    solver_tol: float = 1e-10
    seed: int = 0
    output_dir: str = "out"
    name: str = "member"


@dataclass
class ConfigError:
    line: int
    key: str
    reason: str

    def __str__(self):
        return f"line {self.line}: {self.key}: {self.reason}"


_SCALARS = {
    # key -> (attr, converter)
    "factor.m_core": ("m_core", float),
    "factor.s_reg": ("s_reg", float),
    "factor.sigma": ("sigma", float),
    "grid.h": ("h", float),
    "grid.L_box": ("L_box", float),
    "region.r0": ("r0", float),
    "region.tau_mode": ("tau_mode", str),
    "region.tau0": ("tau0", float),
    "region.epsilon": ("epsilon", float),
    "cylinder.direction": ("cylinder_direction", "triple"),
    "cylinder.L": ("cylinder_L", float),
    "coverage.D": ("coverage_D", float),
    "coverage.voxel": ("coverage_voxel", float),
    "geodesic.Lambda": ("bg_Lambda", float),
    "geodesic.radii": ("bg_radii", "floats"),
    "diagnostics.geodesic": ("run_geodesic", "bool"),
    "diagnostics.cylinder": ("run_cylinder", "bool"),
    "diagnostics.coverage": ("run_coverage", "bool"),
    "diagnostics.injectivity": ("run_injectivity", "bool"),
    "solver.tol": ("solver_tol", float),
    "seed": ("seed", int),
    "output.dir": ("output_dir", str),
    "name": ("name", str),
}

_BUMP_RE = re.compile(r"factor\.bump(\d+)\.(center|amplitude|width)$")


def _convert(kind, raw):
    if kind is float:
        return float(raw)
    if kind is int:
        return int(raw)
    if kind is str:
        return raw
    if kind == "bool":
        if raw.lower() in ("true", "false"):
            return raw.lower() == "true"
        raise ValueError("expected true or false")
    if kind == "triple":
        parts = [float(p) for p in raw.split(",")]
        if len(parts) != 3:
            raise ValueError("expected a comma triple")
        return tuple(parts)
    if kind == "floats":
        return tuple(float(p) for p in raw.split(","))
    raise AssertionError(kind)


def _range_errors(cfg: RunConfig):
    checks = [
        (cfg.m_core >= 0.0, "factor.m_core", "must be >= 0"),
        (cfg.s_reg > 0.0, "factor.s_reg", "must be > 0"),
        (cfg.sigma > 0.5, "factor.sigma", "must be > 1/2"),
        (cfg.h > 0.0, "grid.h", "must be > 0"),
        (cfg.L_box > 0.0, "grid.L_box", "must be > 0"),
        (cfg.r0 > 0.0, "region.r0", "must be > 0"),
        (cfg.tau_mode in TAU_MODES, "region.tau_mode",
         f"must be one of {TAU_MODES}"),
        (0.0 < cfg.tau0 < 0.25, "region.tau0", "must lie in (0, 1/4)"),
        (0.0 < cfg.epsilon < 1.0 / 192.0, "region.epsilon",
         "must lie in (0, 1/192)"),
        (cfg.cylinder_L > 0.0, "cylinder.L", "must be > 0"),
        (cfg.coverage_D > 0.0, "coverage.D", "must be > 0"),
        (cfg.coverage_voxel > 0.0, "coverage.voxel", "must be > 0"),
        (cfg.bg_Lambda >= 0.0, "geodesic.Lambda", "must be >= 0"),
        (all(r > 0 for r in cfg.bg_radii)
         and all(b > a for a, b in zip(cfg.bg_radii, cfg.bg_radii[1:])),
         "geodesic.radii", "must be positive and strictly increasing"),
        (cfg.solver_tol > 0.0, "solver.tol", "must be > 0"),
        (abs(cfg.cylinder_direction[0]) + abs(cfg.cylinder_direction[1])
         + abs(cfg.cylinder_direction[2]) > 0.0,
         "cylinder.direction", "must be nonzero"),
    ]
    errs = [ConfigError(0, key, reason) for ok, key, reason in checks if not ok]
    if cfg.h > 0 and cfg.L_box > 0:
        n = 2.0 * cfg.L_box / cfg.h
        if abs(n - round(n)) > 1e-9:
            errs.append(ConfigError(0, "grid.h",
                                    "2*L_box/h must be an integer node count"))
    for i, b in enumerate(cfg.bumps, start=1):
        if b.amplitude < 0:
            errs.append(ConfigError(0, f"factor.bump{i}.amplitude", "must be >= 0"))
        if b.width <= 0:
            errs.append(ConfigError(0, f"factor.bump{i}.width", "must be > 0"))
    return errs


def parse_config(text: str):
    """Parse config text.  Returns ``(config, errors)``; config is None when
    any error was recorded."""
    assignments = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(ConfigError(lineno, line, "expected key = value"))
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key in assignments:
            errors.append(ConfigError(lineno, key, "duplicate key"))
            continue
        assignments[key] = (val, lineno)

    cfg = RunConfig()
    bump_parts = {}
    for key, (val, lineno) in assignments.items():
        if key in _SCALARS:
            attr, kind = _SCALARS[key]
            try:
                cfg = replace(cfg, **{attr: _convert(kind, val)})
            except ValueError as exc:
                errors.append(ConfigError(lineno, key, str(exc) or "malformed value"))
            continue
        m = _BUMP_RE.match(key)
        if m:
            idx, part = int(m.group(1)), m.group(2)
            kind = "triple" if part == "center" else float
            try:
                bump_parts.setdefault(idx, {})[part] = _convert(kind, val)
            except ValueError as exc:
                errors.append(ConfigError(lineno, key, str(exc) or "malformed value"))
            continue
        errors.append(ConfigError(lineno, key, "unknown key"))

    bumps = []
    for idx in sorted(bump_parts):
        parts = bump_parts[idx]
        missing = {"center", "amplitude", "width"} - set(parts)
        if missing:
            errors.append(ConfigError(0, f"factor.bump{idx}",
                                      f"missing {', '.join(sorted(missing))}"))
            continue
        bumps.append(BumpSpec(parts["center"], parts["amplitude"], parts["width"]))
    cfg = replace(cfg, bumps=tuple(bumps))
    errors.extend(_range_errors(cfg))
    return (None, errors) if errors else (cfg, [])


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(cfg: RunConfig) -> str:
    """Canonical text form; parse_config(serialize(c)) reproduces c."""
    lines = []
    for key, (attr, _) in _SCALARS.items():
        lines.append(f"{key} = {_fmt(getattr(cfg, attr))}")
    for i, b in enumerate(cfg.bumps, start=1):
        lines.append(f"factor.bump{i}.center = {_fmt(tuple(b.center))}")
        lines.append(f"factor.bump{i}.amplitude = {_fmt(b.amplitude)}")
        lines.append(f"factor.bump{i}.width = {_fmt(b.width)}")
    return "\n".join(lines) + "\n"
