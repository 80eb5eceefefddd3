"""Experiment configuration: parsing, validation, and object wiring."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import yaml

from .bases import daubechies_basis_1d, sine_basis_1d, sine_basis_2d
from .control import RegConfig
from .errors import ConfigError
from .exprs import evaluate
from .observation import ObservationOp
from .propagators import ConvDiffModel2D, DiffusionModel1D, DiffusionModel2D
from .spaces import Field, Grid1D, Grid2D, TimeGrid

_METHODS = ("dual_initial", "dual_final", "variation")
_MODEL_KINDS = ("diffusion1d", "diffusion2d", "convdiff2d")
_BASIS_KINDS = ("sine", "daubechies", "sine2d")


def _require(block: dict, key: str, path: str):
    if key not in block:
        raise ConfigError(f"missing config key {path}.{key}")
    return block[key]


@dataclass
class ExperimentConfig:
    """Validated experiment description; builders wire the library objects."""

    raw: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        cfg = cls(raw=raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                raw = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        return cls.from_dict(raw)

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        raw = self.raw
        model = _require(raw, "model", "")
        kind = _require(model, "kind", "model")
        if kind not in _MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {_MODEL_KINDS}, got {kind!r}")
        grid = _require(raw, "grid", "")
        if kind == "diffusion1d":
            _require(grid, "n", "grid")
        else:
            _require(grid, "nx", "grid")
            _require(grid, "ny", "grid")
        _require(grid, "n_t", "grid")
        _require(grid, "t_f", "grid")
        sensors = _require(raw, "sensors", "")
        if kind == "diffusion1d":
            _require(sensors, "intervals", "sensors")
        else:
            _require(sensors, "boxes", "sensors")
        _require(raw, "truth", "")
        _require(raw["truth"], "x0", "truth")
        basis = _require(raw, "basis", "")
        bkind = _require(basis, "kind", "basis")
        if bkind not in _BASIS_KINDS:
            raise ConfigError(f"basis.kind must be one of {_BASIS_KINDS}, got {bkind!r}")
        m = _require(basis, "m", "basis")
        if int(m) < 1:
            raise ConfigError("basis.m must be >= 1")
        method = raw.get("method", "dual_initial")
        if method not in _METHODS:
            raise ConfigError(f"method must be one of {_METHODS}, got {method!r}")
        noise = raw.get("noise", {})
        if float(noise.get("level", 0.0)) < 0:
            raise ConfigError("noise.level must be >= 0")
        if noise.get("definition", "rms") not in ("rms", "max"):
            raise ConfigError("noise.definition must be 'rms' or 'max'")
        # fail early on bad expressions or unknown regularization keys
        self.build_grid()
        self.truth_field()
        self.build_model()
        self.reg_config()

    # -- builders -----------------------------------------------------------

    @property
    def model_kind(self) -> str:
        return self.raw["model"]["kind"]

    @property
    def method(self) -> str:
        return self.raw.get("method", "dual_initial")

    def build_grid(self):
        g = self.raw["grid"]
        if self.model_kind == "diffusion1d":
            return Grid1D(int(g["n"]))
        return Grid2D(int(g["nx"]), int(g["ny"]))

    def build_time_grid(self) -> TimeGrid:
        g = self.raw["grid"]
        return TimeGrid(float(g["t_f"]), int(g["n_t"]))

    def _eval_on_grid(self, expr, grid) -> np.ndarray:
        if isinstance(expr, (int, float)):
            return np.full(grid.size, float(expr))
        if isinstance(grid, Grid1D):
            return np.asarray(evaluate(expr, x=grid.nodes), dtype=float) * np.ones(grid.size)
        X, Y = grid.meshgrid()
        return (np.asarray(evaluate(expr, x=X, y=Y), dtype=float) * np.ones(X.shape)).ravel()

    def build_model(self):
        grid = self.build_grid()
        block = self.raw["model"]
        kind = self.model_kind
        if kind == "diffusion1d":
            d = block.get("d", 1.0)
            if isinstance(d, (int, float)):
                return DiffusionModel1D(grid, float(d))
            return DiffusionModel1D(grid, lambda x: np.asarray(evaluate(d, x=x), dtype=float) * np.ones_like(x))
        if kind == "diffusion2d":
            return DiffusionModel2D(grid, float(block.get("d", 1.0)))
        c = block.get("c", [0.0, 0.0])
        return ConvDiffModel2D(grid, float(block.get("d", 1.0)), c)

    def build_sensors(self) -> ObservationOp:
        grid = self.build_grid()
        block = self.raw["sensors"]
        if isinstance(grid, Grid1D):
            return ObservationOp.from_intervals(grid, block["intervals"])
        return ObservationOp.from_boxes(grid, block["boxes"])

    def build_basis(self):
        grid = self.build_grid()
        block = self.raw["basis"]
        kind, m = block["kind"], int(block["m"])
        if kind == "sine":
            if not isinstance(grid, Grid1D):
                raise ConfigError("basis.kind 'sine' needs a 1-D model")
            return sine_basis_1d(grid, m)
        if kind == "daubechies":
            if not isinstance(grid, Grid1D):
                raise ConfigError("basis.kind 'daubechies' needs a 1-D model")
            return daubechies_basis_1d(grid, m)
        if not isinstance(grid, Grid2D):
            raise ConfigError("basis.kind 'sine2d' needs a 2-D model")
        return sine_basis_2d(grid, m)

    def truth_field(self) -> Field:
        grid = self.build_grid()
        return Field(grid, self._eval_on_grid(self.raw["truth"]["x0"], grid))

    def source_field(self) -> Field | None:
        f = self.raw["model"].get("f")
        if f is None or f == 0 or f == "0":
            return None
        grid = self.build_grid()
        return Field(grid, self._eval_on_grid(f, grid))

    def noise_params(self) -> tuple[float, int, str]:
        block = self.raw.get("noise", {})
        return (
            float(block.get("level", 0.0)),
            int(block.get("seed", 0)),
            block.get("definition", "rms"),
        )

    def reg_config(self) -> RegConfig:
        block = dict(self.raw.get("regularization", {}))
        balance = block.pop("balance", None)
        kwargs = {}
        for name in (
            "eta_l1", "eta_h1", "eta_l2", "eta_tv", "eta_variance", "sigma",
            "tv_eps", "cg_tol", "rel_tol",
        ):
            if name in block:
                kwargs[name] = float(block.pop(name))
        for name in ("max_outer", "cg_warm_iters"):
            if name in block:
                kwargs[name] = int(block.pop(name))
        if "accelerated" in block:
            kwargs["accelerated"] = bool(block.pop("accelerated"))
        if block:
            raise ConfigError(f"unknown regularization keys: {sorted(block)}")
        if balance:
            if not isinstance(balance, dict) or "penalty" not in balance:
                raise ConfigError("regularization.balance must set 'penalty'")
            kwargs["balance_penalty"] = balance["penalty"]
            for src, dst in (
                ("alpha", "balance_alpha"), ("d", "balance_d"),
                ("eta0", "balance_eta0"), ("rel_tol", "balance_rel_tol"),
                ("max_iters", "balance_max_iters"),
            ):
                if src in balance:
                    kwargs[dst] = type(RegConfig.__dataclass_fields__[dst].default)(balance[src])
        try:
            return RegConfig(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"regularization: {exc}") from exc

    def variation_params(self) -> tuple[int, float | None]:
        block = self.raw.get("variation", {})
        ridge = block.get("ridge")
        return int(block.get("n_modes", 6)), None if ridge is None else float(ridge)

    # -- fingerprint for banked controls ------------------------------------

    def fingerprint(self) -> str:
        """Hash of every block that determines the solved controls."""
        payload = {
            "model": self.raw["model"],
            "grid": self.raw["grid"],
            "sensors": self.raw["sensors"],
            "basis": self.raw["basis"],
            "regularization": self.raw.get("regularization", {}),
            "method": self.method,
        }
        blob = json.dumps(payload, sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()
