"""Run and sweep experiments described by an :class:`ExperimentSpec`.

Artifacts land in ``<root>/<name>/`` where ``root`` is ``spec.output``, else
``$FEDNORMEC_OUTPUT_ROOT``, else ``./runs``. Nothing time-dependent is
written, so the same spec and seed reproduce the same bytes.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import FedAvgConfig, run_fedavg
from .config import SCHEMA_VERSION, ExperimentSpec
from .core import ConfigError, RunConfig, TrainingDiverged, init_memories, run_training
from .privacy import PrivacyBudget, calibrate_sigma, experiment_sigma, schedule_from_corollary
from .problems import make_suite
from .theory import ProblemConstants, TheoryParams, compute_R, eta_max, theorem1_bound, theoremIG_bound

OUTPUT_ENV = "FEDNORMEC_OUTPUT_ROOT"
CSV_COLUMNS = ["algorithm", "k", "f_value", "grad_norm", "min_grad_norm", "R_k", "participants",
               "v_hat_norm", "step_norm", "degenerate_flag"]


@dataclass
class Resolved:
    """A spec turned into concrete objects, plus how each parameter was obtained."""

    problem: object
    cfg: RunConfig
    R0: float
    provenance: dict = field(default_factory=dict)
    schedule: dict | None = None


def output_root(spec: ExperimentSpec) -> Path:
    return Path(spec.output or os.environ.get(OUTPUT_ENV) or "runs")


def _budget(spec):
    p = spec.privacy
    return PrivacyBudget(p["epsilon"], p["delta"], p["c"]) if p else None


def resolve(spec: ExperimentSpec, seed: int | None = None) -> Resolved:
    problem = make_suite(spec.problem)
    run = dict(spec.run)
    if seed is not None:
        run["seed"] = seed
    prov = {}
    if run["gamma"] is None:
        run["gamma"] = 1 / (2 * problem.L)
        prov["gamma"] = "1/(2L)"
    budget = _budget(spec)
    if budget is not None and run["private"]:
        if spec.privacy["sigma"] == "theory":
            run["sigma_dp"] = calibrate_sigma(budget, run["p"], run["K"])
        else:
            run["sigma_dp"] = experiment_sigma(run["p"], run["beta"], run["K"], budget)
        prov["sigma_dp"] = f"privacy.{spec.privacy['sigma']}"

    sched_out = None
    if spec.schedule is not None and spec.schedule["name"] != "manual":
        s = spec.schedule
        consts = ProblemConstants.from_problem(problem)
        sched = schedule_from_corollary(
            s["name"], consts, run["K"], D1=s["D1"], D2=s["D2"], alpha=run["alpha"], budget=budget,
            p=run["p"], B_hat=s["B_hat"], R=s["R"],
            gamma=None if prov.get("gamma") else run["gamma"], T=s["T"])
        over = sched.run_overrides()
        if not (run["private"] and sched.sigma_dp > 0):
            over.pop("sigma_dp")
        run.update(over)
        if s["name"] == "corollary-ig":
            run["local_mode"] = "ig"
        sched_out = sched.to_dict()
        prov.update({k: f"schedule.{s['name']}" for k in over})

    eta = run["eta"]
    probe = RunConfig(**{**run, "eta": 1.0 if eta is None else eta})
    V0 = init_memories(probe.init, problem, problem.x0, probe.local, probe.init_offset)
    R0 = compute_R(V0, problem, problem.x0, probe.local)
    if eta is None:
        consts = ProblemConstants.from_problem(problem)
        params = TheoryParams.from_run(probe, R0, problem.N)
        em = eta_max(consts, params, ig=probe.local_mode == "ig")
        if R0 == 0:
            raise ConfigError("run.eta", "cannot derive eta_max with R0 = 0; set eta or an init offset")
        run["eta"] = em.value
        prov["eta"] = f"eta_max ({em.branch} branch)"
    return Resolved(problem, RunConfig(**run), R0, prov, sched_out)


def bound_report(res: Resolved) -> dict:
    cfg, problem = res.cfg, res.problem
    consts = ProblemConstants.from_problem(problem)
    params = TheoryParams.from_run(cfg, res.R0, problem.N)
    fn = theoremIG_bound if cfg.local_mode == "ig" else theorem1_bound
    rep = fn(consts, params).to_dict()
    rep["eta_max"] = eta_max(consts, params, ig=cfg.local_mode == "ig").value
    rep["R0"] = res.R0
    return rep


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def metrics_csv(rows, algorithm: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([algorithm, _fmt(r.k), _fmt(r.f_value), _fmt(r.grad_norm), _fmt(r.min_grad_norm),
                    _fmt(r.R_k), _fmt(r.participants), _fmt(r.v_hat_norm), _fmt(r.step_norm),
                    _fmt(bool(r.degenerate))])
    return buf.getvalue()


def read_metrics(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _dump_json(obj) -> str:
    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, (np.floating, float)):
            o = float(o)
            return o if math.isfinite(o) else None
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.bool_):
            return bool(o)
        return o
    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _run_once(res: Resolved, algorithm: str, seed: int, explicit_eta: bool):
    cfg = res.cfg.replace(seed=seed)
    if algorithm == "dp-fedavg":
        fcfg = FedAvgConfig.matching(cfg, **({"eta": cfg.eta} if explicit_eta else {}))
        return run_fedavg(res.problem, fcfg)
    return run_training(res.problem, cfg)


def run_replicates(spec: ExperimentSpec, res: Resolved, out_dir: Path) -> dict:
    """Write ``metrics_rep<r>.csv`` for every replicate; return per-replicate stats."""
    mins, finals, trajs = [], [], []
    explicit_eta = spec.run["eta"] is not None
    for r in range(spec.replicates):
        seed = res.cfg.seed + r
        path = out_dir / f"metrics_rep{r}.csv"
        try:
            traj = _run_once(res, spec.algorithm, seed, explicit_eta)
        except TrainingDiverged as exc:
            _write(path, metrics_csv(exc.records, spec.algorithm))
            raise
        _write(path, metrics_csv(traj.records, spec.algorithm))
        mins.append(traj.min_grad_norm)
        finals.append(traj.records[-1].grad_norm)
        trajs.append(traj)
    return {"min_grad_norm": mins, "final_grad_norm": finals, "trajectories": trajs}


def _stats(values):
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std()), "values": [float(v) for v in arr]}


def run_experiment(spec: ExperimentSpec, seed: int | None = None) -> Path:
    """Run all replicates; write metrics CSVs, ``bound.json`` and ``summary.json``."""
    res = resolve(spec, seed)
    out_dir = output_root(spec) / spec.name
    stats = run_replicates(spec, res, out_dir)
    bound = bound_report(res) if spec.algorithm == "fed-alpha-normec" else None
    _write(out_dir / "bound.json", _dump_json({"algorithm": spec.algorithm, "bound": bound}))
    summary = {
        "schema_version": SCHEMA_VERSION,
        "spec_hash": spec.spec_hash(),
        "algorithm": spec.algorithm,
        "replicates": spec.replicates,
        "resolved": {k: getattr(res.cfg, k) for k in res.cfg.__dataclass_fields__},
        "provenance": res.provenance,
        "schedule": res.schedule,
        "min_grad_norm": _stats(stats["min_grad_norm"]),
        "final_grad_norm": _stats(stats["final_grad_norm"]),
    }
    if bound is not None:
        summary["bound_total"] = bound["total"]
        summary["bound_satisfied"] = bound["satisfied"]
        summary["within_bound"] = summary["min_grad_norm"]["mean"] <= bound["total"]
    _write(out_dir / "summary.json", _dump_json(summary))
    return out_dir


def _cell_name(cell: dict) -> str:
    return "_".join(f"{k}-{v}" for k, v in cell.items())


def sweep_cells(spec: ExperimentSpec) -> list:
    keys = list(spec.sweep)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(spec.sweep[k] for k in keys))]


def run_sweep(spec: ExperimentSpec, seed: int | None = None) -> Path:
    """One directory per grid cell plus ``communication.csv`` and ``sweep_summary.json``.

    ``transmissions`` is the expected client-to-server message count ``k p M``
    before round ``k``; ``realized_transmissions`` is the replicate mean of
    the observed count.
    """
    root = output_root(spec) / spec.name
    cells = sweep_cells(spec) or [{}]
    comm = io.StringIO()
    w = csv.writer(comm, lineterminator="\n")
    keys = list(spec.sweep)
    w.writerow(["cell", *keys, "k", "transmissions", "realized_transmissions",
                "grad_norm_mean", "min_grad_norm_mean"])
    summary = {"schema_version": SCHEMA_VERSION, "spec_hash": spec.spec_hash(), "cells": []}
    for cell in cells:
        sub = spec.with_run(**cell)
        res = resolve(sub, seed)
        name = _cell_name(cell) or "base"
        stats = run_replicates(sub, res, root / name)
        trajs = stats["trajectories"]
        M = res.problem.M
        grads = np.array([[r.grad_norm for r in t.records] for t in trajs])
        mins = np.array([[r.min_grad_norm for r in t.records] for t in trajs])
        parts = np.array([[r.participants for r in t.records] for t in trajs], dtype=np.float64)
        realized = np.concatenate([np.zeros((len(trajs), 1)), np.cumsum(parts, axis=1)[:, :-1]], axis=1)
        for k in range(grads.shape[1]):
            w.writerow([name, *[_fmt(cell[c]) for c in keys], k, _fmt(k * res.cfg.p * M),
                        _fmt(realized[:, k].mean()), _fmt(grads[:, k].mean()), _fmt(mins[:, k].mean())])
        summary["cells"].append({"cell": name, "params": cell,
                                 "min_grad_norm": _stats(stats["min_grad_norm"])})
    _write(root / "communication.csv", comm.getvalue())
    _write(root / "sweep_summary.json", _dump_json(summary))
    return root
