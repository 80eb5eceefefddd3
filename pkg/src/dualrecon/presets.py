"""Built-in experiment presets.

Each preset is a plain config dict (the same schema accepted from YAML
files) so it can be dumped, edited, and re-run.  Regularization weights
follow the published benchmark values; grids, time steps, and iteration
budgets are our discretization choices, calibrated so every preset runs
in minutes on a single core.
"""

from __future__ import annotations

import copy

from .config import ExperimentConfig
from .errors import ConfigError

_PIECEWISE_D = (
    "where(x < 0.5,"
    " 1.3125 - 5*(x - 0.5)^4,"
    " 1.1875 + 1/(8 + exp(-50*(x - 0.65))))"
)

_EXAMPLE2_BASE = {
    "model": {"kind": "diffusion1d", "d": _PIECEWISE_D},
    "grid": {"n": 199, "n_t": 200, "t_f": 1.0},
    "sensors": {"intervals": [[0.23, 0.31], [0.46, 0.53]]},
    "truth": {"x0": "exp(-200*(x - 0.5)^4)"},
    "noise": {"level": 0.05, "seed": 0},
    "method": "dual_initial",
}

PRESETS: dict[str, dict] = {
    "example1": {
        "model": {"kind": "diffusion1d", "d": "1.0625 - (x - 0.5)^4"},
        "grid": {"n": 199, "n_t": 200, "t_f": 1.0},
        "sensors": {"intervals": [[0.23, 0.31], [0.46, 0.53]]},
        "truth": {"x0": "exp(-200*(x - 0.5)^4)"},
        "noise": {"level": 0.10, "seed": 0},
        "basis": {"kind": "sine", "m": 8},
        "regularization": {"eta_l1": 5e-8, "eta_h1": 1e-10, "max_outer": 100},
        "method": "dual_initial",
    },
    "example2-daub": {
        **copy.deepcopy(_EXAMPLE2_BASE),
        "basis": {"kind": "daubechies", "m": 8},
        "regularization": {"eta_l1": 5e-7, "eta_h1": 1e-11, "max_outer": 50},
    },
    "example2-sine": {
        **copy.deepcopy(_EXAMPLE2_BASE),
        "basis": {"kind": "sine", "m": 8},
        "regularization": {"eta_l1": 5e-6, "eta_h1": 1e-10, "max_outer": 50},
    },
    # drift written as u_t + c.grad(u) = div(d grad u); the negative c
    # moves the plume across the sensor grid instead of out of the corner
    "example3-convdiff": {
        "model": {"kind": "convdiff2d", "d": 0.1, "c": [-0.5, -0.5]},
        "grid": {"nx": 63, "ny": 63, "n_t": 100, "t_f": 1.0},
        "sensors": {
            "boxes": [
                [i / 4 - 0.05, i / 4 + 0.05, j / 4 - 0.05, j / 4 + 0.05]
                for i in (1, 2, 3)
                for j in (1, 2, 3)
            ]
        },
        "truth": {"x0": "exp(-100*((x - 0.55)^2 + (y - 0.5)^2))"},
        "noise": {"level": 0.10, "seed": 0},
        "basis": {"kind": "sine2d", "m": 8},
        "regularization": {
            "eta_l1": 0.03,
            "eta_h1": 1e-8,
            "eta_l2": 0.003,
            "cg_warm_iters": 25,
            "max_outer": 6,
        },
        "method": "dual_initial",
    },
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def preset_config(
    name: str,
    seed: int | None = None,
    noise: float | None = None,
    m: int | None = None,
) -> ExperimentConfig:
    """Return a preset as a validated config, with optional overrides."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    raw = copy.deepcopy(PRESETS[name])
    if seed is not None:
        raw["noise"]["seed"] = int(seed)
    if noise is not None:
        raw["noise"]["level"] = float(noise)
    if m is not None:
        raw["basis"]["m"] = int(m)
    return ExperimentConfig.from_dict(raw)
