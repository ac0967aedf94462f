"""Experiment pipelines behind the ``run`` command.

Each pipeline writes plain CSV/JSON artifacts into the output directory and
returns a summary dict. Nothing here is random; the same configuration
always produces the same bytes.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, models
from .config import RunConfig
from .core import ControlField, TimeGrid, area
from .io import write_csv, write_json
from .local_control import (
    build_surrogate,
    replay_objective,
    run_local,
    surrogate_initial_state,
)
from .oct import OctConfig, OctRun, optimize
from .propagation import PropagatorSpec, propagate_array

log = logging.getLogger(__name__)


def co_setup(cfg: RunConfig):
    """Rotor model, grid over one rotational period, initial and target states."""
    params = cfg.rotor
    model = models.build_rotor(params)
    grid = TimeGrid(params.rotational_period, cfg.n_steps)
    guess = models.guess_pulse(params, grid, e_peak=cfg.e_peak_au, fwhm_fs=cfg.fwhm_fs)
    return model, grid, guess, models.ground_state(params), models.target_state(params)


def run_oct(cfg: RunConfig, mu_tf: float | None = None) -> OctRun:
    model, grid, guess, psi0, target = co_setup(cfg)
    mu_tf = cfg.mu_tf if mu_tf is None else mu_tf
    oc = OctConfig(
        guess=guess,
        lam=cfg.lambda_au,
        mu=mu_tf / grid.tf,
        max_iterations=cfg.max_iterations,
        target_fidelity=cfg.target_fidelity,
    )
    return optimize(model, psi0, target, oc)


def orientation_dynamics(cfg: RunConfig, field: ControlField) -> tuple[np.ndarray, np.ndarray]:
    """<cos theta> over two periods: driven by ``field``, then field-free."""
    model, grid, _, psi0, _ = co_setup(cfg)
    spec = PropagatorSpec.for_grid(model, grid)
    driven = propagate_array(spec, psi0.coeffs, field)
    free = propagate_array(spec, driven[-1], ControlField.zeros(grid))
    traj = np.concatenate([driven, free[1:]])
    t = np.concatenate([grid.t, grid.tf + grid.t[1:]])
    return t, models.expectation_cos_theta(traj, model)


def early_deviation_ratio(guess: ControlField, opt: ControlField, frac: float = 0.1) -> float:
    """max|E_opt - E_guess| over t < frac*tf relative to the global maximum."""
    dev = np.abs(opt.samples - guess.samples)
    top = dev.max()
    if top == 0.0:
        return 0.0
    early = guess.grid.t < frac * guess.grid.tf
    return float(dev[early].max() / top)


def _convergence_rows(run: OctRun):
    for it in run.iterates:
        yield it.k, 1.0 - it.fidelity, it.cost, it.area


def write_oct_artifacts(out: Path, cfg: RunConfig, run: OctRun, meta: dict, prefix: str = "") -> None:
    guess = run.config.guess
    opt = run.final_field
    write_csv(out / f"{prefix}convergence.csv", ["iter", "one_minus_fidelity", "cost", "area"],
              _convergence_rows(run), meta)
    write_csv(out / f"{prefix}field.csv", ["t_au", "E_au", "E_guess_au"],
              zip(guess.grid.t, opt.samples, guess.samples), meta)
    (out / f"{prefix}run.json").write_text(run.to_json(config=cfg.resolved()) + "\n")


def run_co_oct(cfg: RunConfig) -> dict:
    out = Path(cfg.out_dir)
    meta = cfg.resolved()
    run = run_oct(cfg)
    guess, opt = run.config.guess, run.final_field
    write_oct_artifacts(out, cfg, run, meta)

    t, cos_opt = orientation_dynamics(cfg, opt)
    _, cos_guess = orientation_dynamics(cfg, guess)
    s = slice(None, None, cfg.dynamics_stride)
    write_csv(out / "dynamics.csv", ["t_au", "cos_theta_opt", "cos_theta_guess"],
              zip(t[s], cos_opt[s], cos_guess[s]), meta)

    m = analysis.measures(opt)
    summary = {
        "experiment": "co-oct",
        "config": meta,
        "mu_au": run.config.mu,
        "iterations": run.iterations,
        "first_iteration_at_valid_fidelity": run.first_iteration_reaching(cfg.valid_fidelity),
        "fidelity": run.final.fidelity,
        "converged": run.converged,
        "monotonic": not run.violations,
        "violations": run.violations,
        "measures": m.to_dict(),
        "guess_measures": analysis.measures(guess).to_dict(),
        "early_deviation_ratio": early_deviation_ratio(guess, opt),
        "max_cos_theta_opt": float(cos_opt[: len(opt.grid)].max()),
    }
    write_json(out / "summary.json", summary)
    return summary


def _sweep_point(args):
    cfg, mu_tf = args
    run = run_oct(cfg, mu_tf)
    out = Path(cfg.out_dir) / f"mu_tf_{mu_tf!r}"
    write_oct_artifacts(out, cfg, run, dict(cfg.resolved(), point_mu_tf=mu_tf))
    return mu_tf, run


def run_mu_sweep(cfg: RunConfig) -> dict:
    out = Path(cfg.out_dir)
    meta = cfg.resolved()
    points = list(dict.fromkeys(cfg.mu_tf_list))
    todo = points if 0.0 in points else [0.0] + points
    jobs = [(cfg, mu) for mu in todo]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = dict(ex.map(_sweep_point, jobs))
    else:
        results = dict(map(_sweep_point, jobs))

    ref = results[0.0]
    ref_valid = ref.final.fidelity >= cfg.valid_fidelity
    rows, table = [], []
    for mu in points:
        run = results[mu]
        fld = run.final_field
        valid = run.final.fidelity >= cfg.valid_fidelity and ref_valid and not run.violations
        an = analysis.a_norm(fld)
        bn = analysis.b_norm(fld, ref.final_field)
        rows.append((mu, an, bn, run.iterations, run.final.fidelity, valid))
        table.append({
            "mu_tf": mu, "a_norm": an, "b_norm": bn, "iterations": run.iterations,
            "fidelity": run.final.fidelity, "valid": valid,
            "area": area(fld), "reference_area": area(ref.final_field),
            "violations": run.violations,
        })
    write_csv(out / "sweep.csv", ["mu_tf", "a_norm", "b_norm", "iterations", "fidelity", "valid"],
              rows, meta)
    summary = {"experiment": "co-oct-sweep", "config": meta, "points": table,
               "monotonic": all(not results[m].violations for m in todo)}
    write_json(out / "summary.json", summary)
    return summary


def run_surrogate_local(cfg: RunConfig) -> dict:
    out = Path(cfg.out_dir)
    meta = cfg.resolved()
    model, base = build_surrogate(cfg.epsilon_au, 0.0, cfg.local_tf_au, cfg.local_n_steps)
    psi0 = surrogate_initial_state(model, cfg.seed_amplitude)
    tradeoff, points = [], []
    for mu in dict.fromkeys(cfg.mu_au_list):
        spec = base.with_mu(mu)
        run = run_local(spec, psi0)
        fld = run.control
        s = slice(None, None, cfg.local_stride)
        rows = zip(run.t[s], run.field[s], run.j_lc[s], run.exp_o[s], run.area[s])
        write_csv(out / f"local_mu_{mu!r}.csv", ["t_au", "E_au", "J_lc", "exp_O", "A_au"], rows,
                  dict(meta, point_mu_au=mu))
        filtered = analysis.highpass_filter(fld, analysis.bin_frequency(fld, cfg.filter_bins))
        point = {
            "mu_au": mu,
            "final_exp_O": run.final_objective,
            "abs_area_tf": abs(run.final_area),
            "a_norm": analysis.a_norm(fld),
            "replayed_exp_O": replay_objective(spec, psi0, fld),
            "filtered_exp_O": replay_objective(spec, psi0, filtered),
            "filtered_a_norm": analysis.a_norm(filtered),
            "filtered_area": area(filtered),
            "max_abs_field": float(np.max(np.abs(run.field))),
            "monotonic": run.monotonic,
            "violations": list(run.violations),
        }
        points.append(point)
        tradeoff.append((mu, point["final_exp_O"], point["abs_area_tf"], point["a_norm"],
                         point["filtered_exp_O"], point["filtered_a_norm"], run.monotonic))
    write_csv(out / "tradeoff.csv",
              ["mu_au", "final_exp_O", "abs_area_tf", "a_norm", "filtered_exp_O",
               "filtered_a_norm", "monotonic"], tradeoff, meta)
    summary = {"experiment": "surrogate-local", "config": meta, "points": points,
               "monotonic": all(p["monotonic"] for p in points)}
    write_json(out / "summary.json", summary)
    return summary


PIPELINES = {
    "co-oct": run_co_oct,
    "co-oct-sweep": run_mu_sweep,
    "surrogate-local": run_surrogate_local,
}


def run_experiment(cfg: RunConfig) -> dict:
    log.info("running %s into %s", cfg.experiment, cfg.out_dir)
    return PIPELINES[cfg.experiment](cfg)
