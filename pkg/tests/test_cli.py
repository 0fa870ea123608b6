import json

import numpy as np
import pytest

from eigrefine.cli import main
from eigrefine.mmio import mm_read, sample_path


@pytest.fixture
def generated(tmp_path):
    out = tmp_path / "gen"
    assert main(["generate", "randsvd", "--n", "40", "--kappa", "1e3", "--mode", "3", "--seed", "2", "--out", str(out)]) == 0
    return out


def test_generate_is_reproducible(generated, tmp_path):
    again = tmp_path / "again"
    main(["generate", "randsvd", "--n", "40", "--kappa", "1e3", "--mode", "3", "--seed", "2", "--out", str(again)])
    for name in ("A.mtx", "eigvecs.mtx", "spectrum.csv"):
        assert (generated / name).read_bytes() == (again / name).read_bytes()
    assert (generated / "spectrum.csv").read_text().startswith("index,lambda\n")


def test_generate_spectrum(tmp_path):
    assert main(["generate", "spectrum", "--lambdas", "0.5,2,-1", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "spectrum.csv").read_text().splitlines()[1:]
    assert [float(r.split(",")[1]) for r in rows] == [2.0, -1.0, 0.5]


def test_refine_artifacts_and_manifest(generated, tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["refine", str(generated / "A.mtx"), "--k", "2", "--K", "3", "--init", "round32",
                 "--corr-tol", "1e-13", "--out", str(out)])
    assert code == 0
    assert "converged" in capsys.readouterr().out
    for name in ("X.mtx", "history.csv", "outcome.json", "manifest.json"):
        assert (out / name).exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["outcome"]["status"] == "converged" and len(man["inputs"]) == 1
    X = mm_read(out / "X.mtx")
    assert X.shape == (40, 3)
    again = tmp_path / "again"
    assert main(["refine", "--from-manifest", str(out / "manifest.json"), "--out", str(again)]) == 0
    assert (again / "X.mtx").read_bytes() == (out / "X.mtx").read_bytes()


def test_refine_init_from_file(generated, tmp_path):
    V = mm_read(generated / "eigvecs.mtx")[:, :2]
    from eigrefine.mmio import mm_write

    mm_write(tmp_path / "x0.mtx", V + 1e-6)
    assert main(["refine", str(generated / "A.mtx"), "--k", "2", "--init", str(tmp_path / "x0.mtx"),
                 "--out", str(tmp_path / "r")]) == 0
    assert main(["refine", str(generated / "A.mtx"), "--k", "3", "--init", str(tmp_path / "x0.mtx"),
                 "--out", str(tmp_path / "r")]) == 2


def test_refine_max_iter_exit_code(generated, tmp_path):
    code = main(["refine", str(generated / "A.mtx"), "--k", "1", "--init", "perturb", "--perturb-sigma", "1e-2",
                 "--corr-tol", "1e-300", "--max-iter", "2", "--out", str(tmp_path / "r")])
    assert code == 3


def test_refine_smallest_target(tmp_path):
    gen = tmp_path / "gen"
    main(["generate", "spectrum", "--lambdas", "0.001,0.05,0.5,0.6,0.7,0.8,0.9,1", "--out", str(gen)])
    code = main(["refine", str(gen / "A.mtx"), "--k", "1", "--K", "2", "--init", "round32",
                 "--target", "smallest", "--corr-tol", "1e-300", "--resid-tol", "1e-14",
                 "--max-iter", "20000", "--out", str(tmp_path / "r")])
    assert code == 0
    doc = json.loads((tmp_path / "r" / "outcome.json").read_text())
    assert doc["eigenvalues"][0] == pytest.approx(1e-3, rel=1e-9)
    assert doc["shift_margin_estimate"] > 0


def test_refine_sparse_sample(tmp_path):
    code = main(["refine", sample_path(), "--k", "5", "--corr-tol", "1e-13", "--out", str(tmp_path / "r")])
    assert code == 0


def test_refine_sparse_rejects_oracle_init(tmp_path, capsys):
    assert main(["refine", sample_path(), "--init", "round32", "--out", str(tmp_path)]) == 2
    assert "subspace" in capsys.readouterr().err


def test_seed_env_override(generated, tmp_path, monkeypatch):
    monkeypatch.setenv("EIGREFINE_SEED", "17")
    main(["refine", str(generated / "A.mtx"), "--init", "perturb", "--seed", "1", "--out", str(tmp_path / "r")])
    assert json.loads((tmp_path / "r" / "manifest.json").read_text())["seed"] == 17


def test_analyze(generated, capsys):
    assert main(["analyze", "--spectrum", str(generated / "spectrum.csv"), "--k", "2", "--eps", "1e-6"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["flags"] == [] and doc["sufficient"]["holds"] in (True, False)
    assert len(doc["alpha_grid"]["computed"]) == 4


def test_analyze_flags_and_errors(tmp_path, capsys):
    p = tmp_path / "s.csv"
    p.write_text("index,lambda\n0,1\n1,1\n2,0.5\n")
    main(["analyze", "--spectrum", str(p), "--k", "1"])
    assert "necessary condition violated" in capsys.readouterr().out
    p.write_text("index,lambda\n0,1\n1,0\n2,0\n")
    assert main(["analyze", "--spectrum", str(p), "--k", "2"]) == 2


def test_oracle_command(generated, tmp_path):
    assert main(["oracle", str(generated / "A.mtx"), "--out", str(tmp_path / "o")]) == 0
    vals = np.loadtxt(tmp_path / "o" / "eigenvalues.csv", delimiter=",", skiprows=1)[:, 1]
    ref = np.loadtxt(generated / "spectrum.csv", delimiter=",", skiprows=1)[:, 1]
    assert np.allclose(vals, ref, atol=1e-14)


def test_usage_errors(capsys):
    with pytest.raises(SystemExit):
        main(["refine", "--beta", "half"])
    assert main(["refine", "/nonexistent.mtx"]) == 2


def test_clustered_exit_codes(tmp_path):
    lam = [1.0, 1.0, 0.9, 0.8, 0.7] + list(np.linspace(0.5, 0.01, 195))
    gen = tmp_path / "gen"
    main(["generate", "spectrum", "--lambdas", ",".join(repr(float(v)) for v in lam), "--seed", "3", "--out", str(gen)])
    base = ["refine", str(gen / "A.mtx"), "--k", "5", "--init", "perturb", "--perturb-sigma", "1e-4"]
    assert main(base + ["--preprocess", "off", "--out", str(tmp_path / "off")]) in (3, 4)
    assert main(base + ["--preprocess", "auto", "--out", str(tmp_path / "auto")]) == 0
    doc = json.loads((tmp_path / "auto" / "outcome.json").read_text())
    assert doc["preprocessed"] and doc["restarts"] == 1
