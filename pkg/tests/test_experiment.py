import json

import pytest

from fednormec.cli import main
from fednormec.config import parse_config
from fednormec.experiment import CSV_COLUMNS, read_metrics, resolve, run_experiment, run_sweep

SMALL = """
name: small
replicates: {reps}
problem: {{family: quadratic-hetero, clients: 4, samples: 2, dim: 3}}
run: {{K: {K}, beta: 0.2, alpha: 0.5, init: residual-plus-offset, init_offset: 0.5, eta: null}}
"""


def test_k0_single_replicate(out_root):
    out = run_experiment(parse_config(SMALL.format(reps=1, K=0)))
    rows = read_metrics(out / "metrics_rep0.csv")
    assert len(rows) == 1 and list(rows[0]) == CSV_COLUMNS
    assert (out / "metrics_rep0.csv").read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_summary_recomputable_from_csv(out_root):
    out = run_experiment(parse_config(SMALL.format(reps=3, K=30)))
    summary = json.loads((out / "summary.json").read_text())
    mins = [min(float(r["grad_norm"]) for r in read_metrics(out / f"metrics_rep{i}.csv")) for i in range(3)]
    assert summary["min_grad_norm"]["values"] == pytest.approx(mins, rel=1e-15)
    bound = json.loads((out / "bound.json").read_text())["bound"]
    assert bound["satisfied"] and summary["within_bound"]
    assert summary["provenance"]["eta"].startswith("eta_max")


def test_byte_identical_reruns(tmp_path, monkeypatch):
    spec = parse_config(SMALL.format(reps=2, K=25))
    blobs = []
    for sub in ("a", "b"):
        monkeypatch.setenv("FEDNORMEC_OUTPUT_ROOT", str(tmp_path / sub))
        out = run_experiment(spec)
        blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert blobs[0] == blobs[1]


def test_sweep_outputs(out_root):
    text = SMALL.format(reps=2, K=10) + "sweep: {p: [0.25, 0.5, 1.0]}\n"
    root = run_sweep(parse_config(text))
    cells = sorted(p.name for p in root.iterdir() if p.is_dir())
    assert cells == ["p-0.25", "p-0.5", "p-1.0"]
    rows = read_metrics(root / "communication.csv")
    assert len(rows) == 3 * 11
    r = [x for x in rows if x["cell"] == "p-0.5" and x["k"] == "4"][0]
    assert float(r["transmissions"]) == 4 * 0.5 * 4
    full = [x for x in rows if x["cell"] == "p-1.0"]
    assert all(float(x["realized_transmissions"]) == float(x["transmissions"]) for x in full)


def test_fedavg_experiment(out_root):
    text = SMALL.format(reps=1, K=5).replace("name: small", "name: base\nalgorithm: dp-fedavg")
    out = run_experiment(parse_config(text))
    rows = read_metrics(out / "metrics_rep0.csv")
    assert rows[0]["algorithm"] == "dp-fedavg" and rows[0]["R_k"] == "nan"


def test_resolve_privacy_and_schedule():
    spec = parse_config("""
problem: {family: quadratic-hetero, clients: 20, samples: 4, dim: 5, heterogeneity: 2.0}
run: {p: 0.5, K: 500, private: true}
privacy: {epsilon: 8.0, delta: 1.0e-5}
schedule: {name: corollary-one-step-dp}
""")
    res = resolve(spec)
    assert res.cfg.sigma_dp > 0 and res.schedule["name"] == "corollary-one-step-dp"
    assert res.R0 == pytest.approx(1.0, abs=1e-12)


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("FEDNORMEC_OUTPUT_ROOT", str(tmp_path))
    good = tmp_path / "good.yaml"
    good.write_text(SMALL.format(reps=1, K=3))
    assert main(["run", str(good)]) == 0
    assert main(["--seed", "5", "run", str(good)]) == 0
    assert main(["bound", str(good)]) == 0
    assert json.loads(capsys.readouterr().out.split("\n", 2)[-1])["total"] > 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("run: {p: 1.5}\n")
    assert main(["run", str(bad)]) == 3
    assert "run.p" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == 3
    assert main(["verify", "nonsense"]) == 2
    assert main(["frobnicate"]) == 2
    boom = tmp_path / "boom.yaml"
    boom.write_text("problem: {family: quadratic-hetero, clients: 2, dim: 2}\n"
                    "run: {K: 50, eta: 1.0e+307, beta: 1.0, server_normalize: false}\n")
    with pytest.warns(RuntimeWarning):
        assert main(["run", str(boom)]) == 5
    assert (tmp_path / "experiment" / "metrics_rep0.csv").exists()


def test_seed_override_changes_stochastic_runs(out_root):
    text = SMALL.format(reps=1, K=10).replace("K: 10,", "K: 10, p: 0.5,")
    a = run_experiment(parse_config(text), seed=1)
    first = (a / "metrics_rep0.csv").read_bytes()
    b = run_experiment(parse_config(text), seed=2)
    assert (b / "metrics_rep0.csv").read_bytes() != first
