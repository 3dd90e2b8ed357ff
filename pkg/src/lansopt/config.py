"""Config ingestion and code-defined scenario presets.

Configs are flat ``key = value`` files with typed sections (INI syntax).
The physical parameters (alpha, nu, gamma1..3) are required explicitly;
everything else has documented defaults.  Presets are generated as the
same section dictionaries, so a preset run and a config-file run share
one code path and a run's config echo is always sufficient to reproduce
it.

Field specifiers (for u0, u_T, u_d and control bounds):

    zero
    taylor_green:<amplitude>
    random:seed=<int>,amplitude=<float>[,band=<int>]
    single_mode:<kx,ky,kz>:<dx,dy,dz>:<amplitude>
    file:<path>                      snapshot file
    traj:<directory>                 trajectory checkpoint (u_d only)
    reference_trajectory             u_d from the [reference] run
    reference_final                  u_T from the [reference] run
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .control import Bounds, ControlField, ProblemConfig
from .errors import ConfigurationError
from .fields import random_solenoidal, single_mode, taylor_green
from .forward import StateTrajectory, solve_forward
from .optimize import OptimizerOptions
from .snapshots import read_snapshot, read_trajectory_snapshots
from .spectral import GridSpec, PhysicalField, SpectralField, to_physical, to_spectral, zero_spectral

Sections = Dict[str, Dict[str, str]]

KNOWN_SECTIONS = {"grid", "physics", "cost", "fields", "reference", "control", "optimizer", "run"}


@dataclass
class RunSetup:
    cfg: ProblemConfig
    opts: OptimizerOptions
    initial_control: ControlField
    sections: Sections
    seed: int = 0


def read_config(path: str) -> Sections:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    sections = {name: dict(parser.items(name)) for name in parser.sections()}
    unknown = set(sections) - KNOWN_SECTIONS
    if unknown:
        raise ConfigurationError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    return sections


def sections_to_text(sections: Sections) -> str:
    chunks = []
    for name, entries in sections.items():
        chunks.append(f"[{name}]")
        for key, value in entries.items():
            chunks.append(f"{key} = {value}")
        chunks.append("")
    return "\n".join(chunks)


def _require(sections: Sections, section: str, key: str) -> str:
    try:
        return sections[section][key]
    except KeyError:
        raise ConfigurationError(f"config is missing required [{section}] {key}") from None


def _get(sections: Sections, section: str, key: str, default: Optional[str] = None) -> Optional[str]:
    return sections.get(section, {}).get(key, default)


def _parse_float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"{what}: expected a number, got {text!r}") from None


def _parse_int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigurationError(f"{what}: expected an integer, got {text!r}") from None


def build_grid(sections: Sections) -> GridSpec:
    return GridSpec(
        n=_parse_int(_require(sections, "grid", "n"), "[grid] n"),
        dt=_parse_float(_require(sections, "grid", "dt"), "[grid] dt"),
        n_steps=_parse_int(_require(sections, "grid", "n_steps"), "[grid] n_steps"),
        length=_parse_float(_get(sections, "grid", "length", repr(2.0 * np.pi)), "[grid] length"),
        dealias=_get(sections, "grid", "dealias", "three_halves"),
    )


def build_field(spec: str, grid: GridSpec, reference: Optional[StateTrajectory]) -> SpectralField:
    spec = spec.strip()
    if spec == "zero":
        return zero_spectral(grid)
    if spec == "reference_final":
        if reference is None:
            raise ConfigurationError("reference_final used without a [reference] section")
        return reference.final()
    if spec.startswith("taylor_green:"):
        return taylor_green(grid, _parse_float(spec.split(":", 1)[1], spec))
    if spec.startswith("random:"):
        opts = dict(item.split("=", 1) for item in spec.split(":", 1)[1].split(","))
        return random_solenoidal(
            grid,
            seed=_parse_int(opts.get("seed", "0"), spec),
            amplitude=_parse_float(opts.get("amplitude", "1.0"), spec),
            band=_parse_int(opts["band"], spec) if "band" in opts else None,
        )
    if spec.startswith("single_mode:"):
        try:
            _, mode_txt, dir_txt, amp_txt = spec.split(":")
            mode = [float(v) for v in mode_txt.split(",")]
            direction = [float(v) for v in dir_txt.split(",")]
        except ValueError:
            raise ConfigurationError(f"malformed single_mode specifier {spec!r}") from None
        return single_mode(grid, mode, direction, _parse_float(amp_txt, spec))
    if spec.startswith("file:"):
        field = read_snapshot(spec[5:], grid)
        if isinstance(field, PhysicalField):
            field = to_spectral(field)
        return field
    raise ConfigurationError(f"unknown field specifier {spec!r}")


def _build_reference(sections: Sections, grid: GridSpec, alpha: float, nu: float,
                     u0: SpectralField) -> Optional[StateTrajectory]:
    ref = sections.get("reference")
    if ref is None:
        return None
    kind = ref.get("kind", "taylor_green_constant")
    if kind != "taylor_green_constant":
        raise ConfigurationError(f"unknown reference kind {kind!r}")
    amplitude = _parse_float(ref.get("amplitude", "0.15"), "[reference] amplitude")
    pattern = to_physical(taylor_green(grid, amplitude)).values
    stacked = np.broadcast_to(pattern, (grid.n_steps,) + grid.shape).copy()
    gen_cfg = ProblemConfig(
        grid, alpha=alpha, nu=nu, gamma1=1.0, gamma2=1.0, gamma3=1.0,
        u0=u0, u_T=zero_spectral(grid), u_d=zero_spectral(grid),
    )
    return solve_forward(u0, ControlField(grid, stacked), gen_cfg)


def _build_bound(spec: str, grid: GridSpec):
    spec = spec.strip()
    if spec == "none":
        return None
    if spec.startswith("file:"):
        field = read_snapshot(spec[5:], grid)
        if isinstance(field, SpectralField):
            field = to_physical(field)
        return field.values
    if "," in spec:
        return np.array([_parse_float(v, spec) for v in spec.split(",")])
    return _parse_float(spec, spec)


def build_setup(sections: Sections) -> RunSetup:
    grid = build_grid(sections)
    alpha = _parse_float(_require(sections, "physics", "alpha"), "[physics] alpha")
    nu = _parse_float(_require(sections, "physics", "nu"), "[physics] nu")
    gamma1 = _parse_float(_require(sections, "cost", "gamma1"), "[cost] gamma1")
    gamma2 = _parse_float(_require(sections, "cost", "gamma2"), "[cost] gamma2")
    gamma3 = _parse_float(_require(sections, "cost", "gamma3"), "[cost] gamma3")

    u0 = build_field(_get(sections, "fields", "u0", "zero"), grid, None)
    reference = _build_reference(sections, grid, alpha, nu, u0)

    u_d_spec = _get(sections, "fields", "u_d", "zero")
    if u_d_spec == "reference_trajectory":
        if reference is None:
            raise ConfigurationError("reference_trajectory used without a [reference] section")
        u_d = reference.snapshots
    elif u_d_spec.startswith("traj:"):
        u_d = read_trajectory_snapshots(u_d_spec[5:], grid)
    else:
        u_d = build_field(u_d_spec, grid, reference)
    u_T = build_field(_get(sections, "fields", "u_T", "zero"), grid, reference)

    lower_spec = _get(sections, "control", "lower", "none")
    upper_spec = _get(sections, "control", "upper", "none")
    if (lower_spec == "none") != (upper_spec == "none"):
        raise ConfigurationError("control bounds must set both lower and upper (or neither)")
    bounds = None
    if lower_spec != "none":
        bounds = Bounds.build(grid, grid.n_steps, _build_bound(lower_spec, grid), _build_bound(upper_spec, grid))

    cfg = ProblemConfig(
        grid, alpha=alpha, nu=nu,
        gamma1=gamma1, gamma2=gamma2, gamma3=gamma3,
        u0=u0, u_T=u_T, u_d=u_d, bounds=bounds,
    )

    initial_spec = _get(sections, "control", "initial", "zero")
    if initial_spec != "zero":
        raise ConfigurationError(f"unknown initial control specifier {initial_spec!r}")
    initial = ControlField.zeros(grid, bounds)

    step0_txt = _get(sections, "optimizer", "step0", "auto")
    rel_txt = _get(sections, "optimizer", "residual_tol_rel", "none")
    opts = OptimizerOptions(
        max_iter=_parse_int(_get(sections, "optimizer", "max_iter", "200"), "[optimizer] max_iter"),
        step0=None if step0_txt == "auto" else _parse_float(step0_txt, "[optimizer] step0"),
        armijo_c=_parse_float(_get(sections, "optimizer", "armijo_c", "1e-4"), "[optimizer] armijo_c"),
        shrink=_parse_float(_get(sections, "optimizer", "shrink", "0.5"), "[optimizer] shrink"),
        residual_tol=_parse_float(_get(sections, "optimizer", "residual_tol", "1e-8"), "[optimizer] residual_tol"),
        residual_tol_rel=None if rel_txt == "none" else _parse_float(rel_txt, "[optimizer] residual_tol_rel"),
    )
    seed = _parse_int(_get(sections, "run", "seed", "0"), "[run] seed")
    return RunSetup(cfg=cfg, opts=opts, initial_control=initial, sections=sections, seed=seed)


# ---------------------------------------------------------------------------
# presets

_BASE_GRID = {"n": "8", "dt": "0.03125", "n_steps": "16"}
_BASE_PHYSICS = {"alpha": "0.1", "nu": "0.5"}


def preset_sections(name: str, amplitude: Optional[float] = None, seed: int = 0) -> Sections:
    """Code-defined scenarios; returns plain config sections."""
    if name == "zero":
        return {
            "grid": dict(_BASE_GRID),
            "physics": dict(_BASE_PHYSICS),
            "cost": {"gamma1": "1.0", "gamma2": "1.0", "gamma3": "1.0"},
            "fields": {"u0": "zero", "u_d": "zero", "u_T": "zero"},
            "run": {"seed": str(seed)},
        }
    if name == "taylor_green":
        amp = 0.3 if amplitude is None else amplitude
        return {
            "grid": dict(_BASE_GRID),
            "physics": dict(_BASE_PHYSICS),
            "cost": {"gamma1": "1.0", "gamma2": "1.0", "gamma3": "1.0"},
            "fields": {"u0": f"taylor_green:{amp}", "u_d": "zero", "u_T": "zero"},
            "run": {"seed": str(seed)},
        }
    if name == "manufactured":
        amp = 0.15 if amplitude is None else amplitude
        return {
            "grid": dict(_BASE_GRID),
            "physics": dict(_BASE_PHYSICS),
            "cost": {"gamma1": "10.0", "gamma2": "10.0", "gamma3": "0.002"},
            "fields": {"u0": "zero", "u_d": "reference_trajectory", "u_T": "reference_final"},
            "reference": {"kind": "taylor_green_constant", "amplitude": str(amp)},
            "control": {"lower": "-1.0", "upper": "1.0", "initial": "zero"},
            "optimizer": {
                "max_iter": "2000",
                "residual_tol": "0.0",
                "residual_tol_rel": "1e-4",
            },
            "run": {"seed": str(seed)},
        }
    if name == "constrained_demo":
        amp = 0.15 if amplitude is None else amplitude
        return {
            "grid": dict(_BASE_GRID),
            "physics": dict(_BASE_PHYSICS),
            "cost": {"gamma1": "10.0", "gamma2": "10.0", "gamma3": "0.05"},
            "fields": {"u0": "zero", "u_d": "reference_trajectory", "u_T": "reference_final"},
            "reference": {"kind": "taylor_green_constant", "amplitude": str(amp)},
            "control": {"lower": "-0.3", "upper": "-0.02", "initial": "zero"},
            "optimizer": {"max_iter": "2000", "residual_tol": "1e-4"},
            "run": {"seed": str(seed)},
        }
    raise ConfigurationError(f"unknown preset {name!r}")
