"""Config-driven experiment runner and control banking.

Artifacts written by run_experiment (all CSV/JSON, no pickles):

    config.yaml           resolved configuration
    truth.csv             exact initial (or final) state on the grid
    clean.csv             noiseless measurement series
    noisy.csv             measurement series with injected noise
    xi.csv                source response (zero series when f = 0)
    sensors.json          sensor geometry (intervals / boxes)
    conductivity.csv      d(x) profile on the grid (1-D models only)
    controls/             solved control signals + manifest.json
    reconstruction.json   coefficients, residuals, budget, rel. error
    reconstruction.csv    reconstructed field on the grid
    metrics.json          scalar metrics, wall times, status

Exit status convention: 0 ok, 1 hard failure, 2 converged with
warnings (some solve hit its iteration cap or a residual is flagged
unreliable).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .config import ExperimentConfig
from .control import ControlMap, ControlSolution, solve_control
from .errors import FingerprintError
from .observation import add_noise, compute_xi, simulate_measurements
from .reconstruction import (
    ReconstructionResult,
    final_state_targets,
    reconstruct_final,
    reconstruct_initial,
    sine_time_control_basis,
    variation_reconstruct,
)
from .spaces import (
    Field,
    load_field_csv,
    load_series_csv,
    load_signal_csv,
    norm_x,
    save_field_csv,
    save_series_csv,
    save_signal_csv,
)

STATUS_OK = 0
STATUS_FAILED = 1
STATUS_WARNINGS = 2

_MANIFEST = "manifest.json"


@dataclass
class ExperimentOutcome:
    status: int
    metrics: dict
    result: ReconstructionResult | None
    out_dir: Path


def _dump_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _save_trace_csv(path: Path, trace: list[dict]) -> None:
    if not trace:
        return
    keys = list(trace[0])
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for row in trace:
            fh.write(",".join(f"{row[k]:.17g}" if isinstance(row[k], float)
                              else str(row[k]) for k in keys) + "\n")


# ---------------------------------------------------------------------------
# Control banking


def save_controls(directory, cfg: ExperimentConfig,
                  controls: list[ControlSolution]) -> None:
    """Store solved controls as CSVs plus a fingerprint manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, sol in enumerate(controls):
        name = f"control_{k:03d}.csv"
        save_signal_csv(directory / name, sol.u)
        entries.append({
            "file": name,
            "epsilon": float(sol.epsilon),
            "control_norm_z": float(sol.control_norm_z),
            "objective": float(sol.objective),
            "converged": bool(sol.converged),
            "method": sol.method,
        })
    _dump_json(directory / _MANIFEST, {
        "fingerprint": cfg.fingerprint(),
        "n_controls": len(controls),
        "controls": entries,
    })


def load_controls(directory, cfg: ExperimentConfig) -> list[ControlSolution]:
    """Load banked controls, refusing on a setup fingerprint mismatch."""
    directory = Path(directory)
    manifest_path = directory / _MANIFEST
    if not manifest_path.exists():
        raise FingerprintError(f"no control manifest at {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    expected = cfg.fingerprint()
    found = manifest.get("fingerprint")
    if found != expected:
        raise FingerprintError(
            "banked controls were solved for a different setup "
            f"(stored fingerprint {found}, current {expected}); "
            "model, grid, time, sensors, basis, regularization, and method "
            "must all match"
        )
    time_grid = cfg.build_time_grid()
    controls = []
    for entry in manifest["controls"]:
        u = load_signal_csv(directory / entry["file"], time_grid)
        controls.append(ControlSolution(
            u=u,
            epsilon=float(entry["epsilon"]),
            penalties={},
            objective=float(entry["objective"]),
            trace=[],
            converged=bool(entry["converged"]),
            method=entry["method"],
        ))
    return controls


def bank_controls(cfg: ExperimentConfig, out_dir) -> Path:
    """Solve the preset's controls and store them for reuse."""
    out_dir = Path(out_dir)
    cmap = _control_map(cfg)
    controls, _ = _solve_all(cfg, cmap)
    save_controls(out_dir, cfg, controls)
    return out_dir


# ---------------------------------------------------------------------------
# Runner


def _control_map(cfg: ExperimentConfig) -> ControlMap:
    return ControlMap(cfg.build_model(), cfg.build_sensors(), cfg.build_time_grid())


def _targets(cfg: ExperimentConfig, cmap: ControlMap) -> list[Field]:
    basis = cfg.build_basis()
    if cfg.method == "dual_final":
        return final_state_targets(cmap, basis)
    return list(basis.fields)


def _solve_all(cfg: ExperimentConfig, cmap: ControlMap):
    reg = cfg.reg_config()
    t0 = time.perf_counter()
    controls = [solve_control(cmap, phi, reg) for phi in _targets(cfg, cmap)]
    return controls, time.perf_counter() - t0


def run_experiment(cfg: ExperimentConfig, out_dir,
                   controls_dir=None) -> ExperimentOutcome:
    """Run the full pipeline and write artifacts into out_dir.

    When controls_dir points at a bank made for the same fingerprint,
    the solve phase is skipped and reconstruction reduces to the data
    integrals against the stored controls.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.yaml", "w") as fh:
        yaml.safe_dump(cfg.raw, fh, sort_keys=False)

    times: dict[str, float] = {}
    t_start = time.perf_counter()
    cmap = _control_map(cfg)
    basis = cfg.build_basis()
    truth = cfg.truth_field()
    f = cfg.source_field()

    t0 = time.perf_counter()
    clean = simulate_measurements(cmap.forward, cfg.build_sensors(), truth, f)
    xi = compute_xi(cmap.forward, cfg.build_sensors(), f)
    level, seed, definition = cfg.noise_params()
    noisy, delta = add_noise(clean, level, seed=seed, definition=definition)
    times["data"] = time.perf_counter() - t0

    save_field_csv(out_dir / "truth.csv", truth)
    save_series_csv(out_dir / "clean.csv", clean)
    save_series_csv(out_dir / "noisy.csv", noisy)
    save_series_csv(out_dir / "xi.csv", xi)

    # plotting-friendly extras: sensor geometry and, in 1-D, the
    # conductivity profile, so downstream tools never need to re-evaluate
    # config expressions
    with open(out_dir / "sensors.json", "w") as fh:
        json.dump(cfg.raw["sensors"], fh, indent=2)
    grid = cfg.build_grid()
    if cfg.model_kind == "diffusion1d":
        d_vals = cfg._eval_on_grid(cfg.raw["model"]["d"], grid)
        save_field_csv(out_dir / "conductivity.csv", Field(grid, d_vals))

    if cfg.method == "variation":
        n_modes, ridge = cfg.variation_params()
        u_basis = sine_time_control_basis(cmap, n_modes)
        t0 = time.perf_counter()
        result = variation_reconstruct(u_basis, cmap, noisy, xi,
                                       ridge=ridge, delta=delta)
        times["solve"] = 0.0
        times["reconstruct"] = time.perf_counter() - t0
        controls = []
    else:
        if controls_dir is not None:
            controls = load_controls(controls_dir, cfg)
            times["solve"] = 0.0
        else:
            controls, times["solve"] = _solve_all(cfg, cmap)
        t0 = time.perf_counter()
        if cfg.method == "dual_final":
            result = reconstruct_final(basis, cmap, cfg.reg_config(), noisy,
                                       xi, delta=delta, controls=controls)
        else:
            result = reconstruct_initial(basis, controls, noisy, xi, delta=delta)
        times["reconstruct"] = time.perf_counter() - t0

    controls_out = out_dir / "controls"
    if controls:
        save_controls(controls_out, cfg, controls)
        for k, sol in enumerate(controls):
            if sol.trace:
                _save_trace_csv(controls_out / f"trace_{k:03d}.csv", sol.trace)

    # for forecasting the comparison target is the evolved truth
    if cfg.method == "dual_final":
        from .propagators import forward_trajectory

        truth_cmp = forward_trajectory(cmap.forward, truth, f)[-1]
        save_field_csv(out_dir / "truth_final.csv", truth_cmp)
    else:
        truth_cmp = truth

    result.save_summary(out_dir / "reconstruction.json", truth=truth_cmp)
    save_field_csv(out_dir / "reconstruction.csv", result.field)

    denom = norm_x(truth_cmp)
    diff = Field(truth_cmp.grid, result.field.values - truth_cmp.values)
    rel_error = float(norm_x(diff) / denom) if denom > 0 else float(norm_x(diff))
    all_converged = all(sol.converged for sol in controls) if controls else True
    all_reliable = bool(np.all(result.reliable))
    finite = bool(np.all(np.isfinite(result.field.values)))
    times["total"] = time.perf_counter() - t_start

    if not finite:
        status = STATUS_FAILED
    elif all_converged and all_reliable:
        status = STATUS_OK
    else:
        status = STATUS_WARNINGS

    metrics = {
        "status": status,
        "method": result.method,
        "rel_l2_error": rel_error,
        "delta": float(delta),
        "noise_level": float(level),
        "seed": int(seed),
        "m": int(len(result.coefficients)),
        "epsilons": [float(e) for e in result.epsilons],
        "control_norms": [float(n) for n in result.control_norms],
        "error_budget": float(result.error_budget),
        "all_converged": all_converged,
        "all_reliable": all_reliable,
        "wall_times_s": {k: round(v, 3) for k, v in times.items()},
        "fingerprint": cfg.fingerprint(),
    }
    _dump_json(out_dir / "metrics.json", metrics)
    return ExperimentOutcome(status=status, metrics=metrics, result=result,
                             out_dir=out_dir)


# ---------------------------------------------------------------------------
# Artifact verification


def verify_artifacts(directory) -> list[str]:
    """Re-check invariants on a finished run directory.

    Returns a list of problems (empty means everything checks out).
    """
    directory = Path(directory)
    problems: list[str] = []

    def missing(name: str) -> bool:
        if not (directory / name).exists():
            problems.append(f"missing artifact {name}")
            return True
        return False

    if missing("config.yaml"):
        return problems
    try:
        cfg = ExperimentConfig.from_file(directory / "config.yaml")
    except Exception as exc:
        problems.append(f"config.yaml does not validate: {exc}")
        return problems

    grid = cfg.build_grid()
    time_grid = cfg.build_time_grid()

    fields = {}
    for name in ("truth.csv", "reconstruction.csv"):
        if missing(name):
            continue
        try:
            fields[name] = load_field_csv(directory / name, grid)
        except Exception as exc:
            problems.append(f"{name} does not parse on the config grid: {exc}")

    for name in ("clean.csv", "noisy.csv", "xi.csv"):
        if missing(name):
            continue
        try:
            load_series_csv(directory / name, time_grid)
        except Exception as exc:
            problems.append(f"{name} does not parse on the config time grid: {exc}")

    summary = metrics = None
    if not missing("reconstruction.json"):
        with open(directory / "reconstruction.json") as fh:
            summary = json.load(fh)
    if not missing("metrics.json"):
        with open(directory / "metrics.json") as fh:
            metrics = json.load(fh)

    if metrics is not None and metrics.get("fingerprint") != cfg.fingerprint():
        problems.append("metrics fingerprint does not match config.yaml")

    manifest_path = directory / "controls" / _MANIFEST
    if manifest_path.exists():
        try:
            load_controls(directory / "controls", cfg)
        except FingerprintError as exc:
            problems.append(str(exc))
        except Exception as exc:
            problems.append(f"banked controls do not load: {exc}")

    if summary is not None and "reconstruction.csv" in fields:
        recon = fields["reconstruction.csv"]
        if not np.all(np.isfinite(recon.values)):
            problems.append("reconstruction field has non-finite values")
        if summary.get("method") != "variation":
            try:
                basis = cfg.build_basis()
                coeffs = np.asarray(summary["coefficients"], dtype=float)
                rebuilt = basis.assemble(coeffs)
                drift = float(np.max(np.abs(rebuilt.values - recon.values)))
                if drift > 1e-8 * (1.0 + float(np.max(np.abs(recon.values)))):
                    problems.append(
                        f"reconstruction.csv disagrees with stored coefficients "
                        f"(max abs drift {drift:.3g})"
                    )
            except Exception as exc:
                problems.append(f"cannot rebuild field from coefficients: {exc}")

    if summary is not None and metrics is not None:
        if abs(summary.get("budget", np.nan) - metrics.get("error_budget", np.nan)) > 0:
            problems.append("error budget differs between summary and metrics")

    return problems
