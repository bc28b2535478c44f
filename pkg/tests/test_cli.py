"""Command-line interface: outputs, exit codes and reproducibility."""

import csv
import io
import math
import shutil

import numpy as np
import pytest

from rcpotts import oracle
from rcpotts import phasecalc as pc
from rcpotts.cli import EXIT_BUDGET, EXIT_FAIL, EXIT_INVALID, EXIT_OK, main, step_budget, CLIError
from rcpotts.gibbs import potts_via_rc


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


# -- thresholds -------------------------------------------------------------------

def test_thresholds_row(capsys):
    code, out, _ = run(["thresholds", "--q", "3", "--d", "3"], capsys)
    assert code == EXIT_OK
    assert out.startswith("# rcpotts ")
    rows = list(csv.DictReader(io.StringIO("\n".join(ln for ln in out.splitlines() if not ln.startswith("#")))))
    assert abs(float(rows[0]["beta_c"]) - pc.beta_c(3, 3)) < 1e-15
    assert rows[0]["beta_u_prime"] and rows[0]["beta_u_prime_alt"]
    assert rows[0]["lemma54"] == "0"


def test_thresholds_grid(capsys):
    code, out, _ = run(["thresholds", "--grid", "3:5", "3:4"], capsys)
    body = [ln for ln in out.splitlines() if not ln.startswith("#")]
    assert code == EXIT_OK and len(body) == 1 + 3 * 2


def test_thresholds_invalid_q(capsys):
    code, _, err = run(["thresholds", "--q", "2", "--d", "3"], capsys)
    assert code == EXIT_INVALID and "q" in err


# -- sample ---------------------------------------------------------------------------

def test_step_budget_formula():
    n, c = 1000, 2.0
    a, b = step_budget(n, 0.1, c), step_budget(n, 0.05, c)
    assert abs((b - a) - c * n * math.log(n) * math.log(2)) <= 1
    for eps, cc in ((0, 1), (1.5, 1), (0.1, 0), (0.1, -2)):
        with pytest.raises(CLIError) as exc:
            step_budget(n, eps, cc)
        assert exc.value.code == EXIT_BUDGET


def test_sample_budget_misconfiguration(tmp_path, capsys):
    code, _, err = run(["sample", "rc", "--q", "3", "--d", "3", "--n", "50", "--eps", "0",
                        "--out", str(tmp_path)], capsys)
    assert code == EXIT_BUDGET and "eps" in err


def test_sample_at_beta_c_emits_both_inits(tmp_path, capsys):
    code, _, _ = run(["sample", "rc", "--q", "20", "--d", "5", "--n", "200", "--steps", "5000",
                      "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    names = {p.name for p in tmp_path.iterdir()}
    assert {"rc_allin.csv", "rc_allout.csv", "trace_allin.csv", "trace_allout.csv", "graph.txt"} <= names


def test_sample_planted_writes_consistent_files(tmp_path, capsys):
    from rcpotts.gibbs import colour_stats, spins_from_text
    from rcpotts.graphgen import Multigraph
    from rcpotts.planted import PlantedSpec
    code, _, _ = run(["sample", "planted", "--q", "3", "--d", "3", "--n", "300", "--beta-ratio", "1.0",
                      "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    G = Multigraph.from_text((tmp_path / "graph.txt").read_text())
    sigma = spins_from_text((tmp_path / "spins.txt").read_text(), G)
    spec = PlantedSpec.from_json((tmp_path / "spec.json").read_text())
    assert np.array_equal(colour_stats(G, sigma).pair_counts, spec.buckets)


def test_potts_samples_match_exact_law():
    G = oracle.fixture("triangle")
    q, beta = 3, 0.8
    p = pc.p_of_beta(beta)
    ex = oracle.exact_potts(G, q, beta)
    index = {tuple(row): k for k, row in enumerate(ex.support.tolist())}
    counts = np.zeros(len(index))
    rng = np.random.default_rng(3)
    runs = 10**5
    for _ in range(runs):
        colours, _, _ = potts_via_rc(G, "all-out", q, p, 60, rng, observe=False)
        counts[index[tuple(colours.tolist())]] += 1
    assert oracle.exact_tv(ex, counts / runs) < 0.02


def test_two_inits_same_plateau(tmp_path, capsys):
    n = 500
    dens = {}
    for init in ("all-in", "all-out"):
        out = tmp_path / init
        code, _, _ = run(["sample", "rc", "--q", "3", "--d", "3", "--n", str(n), "--beta-ratio", "0.5",
                          "--init", init, "--budget-c", "20", "--eps", "0.1", "--stride", "100",
                          "--seed", "4", "--out", str(out)], capsys)
        assert code == EXIT_OK
        rows = read_csv(out / f"trace_{init.replace('-', '')}.csv")
        sizes = np.array([int(r["size"]) for r in rows[len(rows) // 2:]]) / n
        batches = np.array([b.mean() for b in np.array_split(sizes, 20)])
        dens[init] = (sizes.mean(), batches.std(ddof=1) / math.sqrt(20))
    (a, sa), (b, sb) = dens.values()
    assert abs(a - b) < 3 * math.hypot(sa, sb) + 1e-3


def test_fixture_needs_explicit_beta(tmp_path, capsys):
    code, _, _ = run(["sample", "potts", "--q", "2", "--d", "3", "--fixture", "k4", "--out", str(tmp_path)], capsys)
    assert code == EXIT_INVALID


# -- diagnose --------------------------------------------------------------------------

def test_shatter_on_empty_configuration(tmp_path, capsys):
    path = tmp_path / "s.csv"
    code, _, _ = run(["diagnose", "shatter", "--q", "3", "--d", "3", "--fixture", "petersen8",
                      "--config", "all-out", "--radius", "1", "--out", str(path)], capsys)
    rows = read_csv(path)
    assert code == EXIT_OK and rows and all(r["K_min"] == "0" for r in rows)


def test_wired_on_all_in_fixture(tmp_path, capsys):
    path = tmp_path / "w.csv"
    code, _, _ = run(["diagnose", "wired", "--q", "3", "--d", "3", "--fixture", "k4",
                      "--config", "all-in", "--out", str(path)], capsys)
    rows = read_csv(path)
    assert code == EXIT_OK and len(rows) == 4 and all(r["exists"] == "1" for r in rows)


def test_occupancy_at_beta_c_is_bimodal(tmp_path, capsys):
    path = tmp_path / "o.csv"
    code, _, _ = run(["diagnose", "occupancy", "--q", "20", "--d", "5", "--n", "2000", "--stride", "200",
                      "--seed", "1", "--out", str(path)], capsys)
    rows = {r["init"]: r for r in read_csv(path)}
    assert code == EXIT_OK
    assert float(rows["all-out"]["disordered"]) >= 0.99
    assert float(rows["all-in"]["ordered"]) >= 0.99


def test_coupling_row(tmp_path, capsys):
    path = tmp_path / "c.csv"
    code, _, _ = run(["diagnose", "coupling", "--q", "3", "--d", "3", "--n", "100", "--beta-ratio", "0.5",
                      "--out", str(path)], capsys)
    rows = read_csv(path)
    assert code == EXIT_OK and rows[0]["timed_out"] == "0"


# -- validate ------------------------------------------------------------------------------

def test_validate_quick_passes(tmp_path, capsys):
    path = tmp_path / "v.txt"
    assert main(["validate", "--quick", "--out", str(path)]) == EXIT_OK
    assert "FAIL" not in path.read_text()


def test_validate_names_corrupted_fixture(tmp_path, capsys):
    gold = tmp_path / "golden"
    shutil.copytree(oracle._golden_dir(), gold)
    target = gold / oracle.golden_name("potts", "cycle6", 2, 0.3)
    text = target.read_text().splitlines()
    idx, val = text[3].split(",")
    text[3] = f"{idx},{float(val) + 0.5}"
    target.write_text("\n".join(text) + "\n")
    path = tmp_path / "v.txt"
    assert main(["validate", "--quick", "--golden-dir", str(gold), "--out", str(path)]) == EXIT_FAIL
    fails = [ln for ln in path.read_text().splitlines() if ln.startswith("FAIL")]
    assert fails and all("fixture=cycle6" in ln for ln in fails)


# -- reproducibility -----------------------------------------------------------------------

def test_same_seed_same_bytes(tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        main(["sample", "potts", "--q", "3", "--d", "3", "--n", "120", "--beta-ratio", "0.9", "--steps", "20000",
              "--seed", "9", "--out", str(out)])
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]


def test_header_records_config(tmp_path, capsys):
    path = tmp_path / "t.csv"
    main(["thresholds", "--q", "4", "--d", "3", "--seed", "5", "--out", str(path)])
    head = path.read_text().splitlines()[:2]
    assert head[0].startswith("# rcpotts ") and '"seed": 5' in head[1] and '"q": 4' in head[1]
