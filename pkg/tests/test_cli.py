import json

from selberg_lab import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def write_config(path, cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


def test_coeffs_write_hit_corrupt(tmp_path, capsys):
    target = tmp_path / "delta.coef"
    code, out, _ = run(["coeffs", "delta", "1000", str(target)], capsys)
    assert code == 0
    body = target.read_text().split("---\n", 1)[1].splitlines()
    assert len(body) == 1000
    assert body[0].split()[0] == "1" and float(body[0].split()[1]) == 1.0
    code, out, _ = run(["coeffs", "delta", "1000", str(target)], capsys)
    assert code == 0 and "cache hit, verified" in out
    target.write_text(target.read_text().replace("\n2 ", "\n2 1", 1))
    code, _, err = run(["coeffs", "delta", "1000", str(target)], capsys)
    assert code == 3 and "checksum" in err


def test_coeffs_unknown_form(tmp_path, capsys):
    code, _, err = run(["coeffs", "nope", "10", str(tmp_path / "x")], capsys)
    assert code == 2


def test_eval_matches_series(capsys):
    code, out, _ = run(["eval", "delta", "--sigma", "2", "--t", "0"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["dirichlet_rel_diff"] <= 1e-6
    assert json.loads(json.dumps(data)) == data


def test_eval_malformed_sigma(capsys):
    code, _, err = run(["eval", "delta", "--sigma", "abc", "--t", "10"], capsys)
    assert code == 2


def test_clt_count_zero_named(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {"form": "delta", "plan": {"T": 1000, "count": 0, "sigma": 3}})
    code, _, err = run(["clt", "--config", cfg, "--out", str(tmp_path / "r")], capsys)
    assert code == 2
    assert "plan.count" in err and "plan.sigma" in err


def test_independence_needs_two_forms(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {"forms": ["delta"], "plan": {"T": 1000, "count": 10}})
    code, _, err = run(["independence", "--config", cfg, "--out", str(tmp_path / "r")], capsys)
    assert code == 2 and "forms" in err


def test_clt_deterministic_across_workers(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {"form": "delta", "plan": {"T": 1000, "count": 120, "seed": 3}})
    outs = []
    for w in ("1", "2"):
        d = tmp_path / f"r{w}"
        code, _, _ = run(["clt", "--config", cfg, "--out", str(d), "--workers", w], capsys)
        assert code in (0, 1)
        outs.append(((d / "clt.json").read_bytes(), (d / "clt.csv").read_bytes()))
    assert outs[0] == outs[1]
    report = json.loads(outs[0][0])
    assert report["report"]["count"] == 120


def test_moments_small(tmp_path, capsys):
    cfg = write_config(tmp_path / "m.json", {
        "forms": "delta", "T": 1e4, "X": 20, "pairs": [[1, 1], [1, 0]],
        "methods": ["analytic_expansion", "quadrature"], "real_part_moments": False,
    })
    code, _, err = run(["moments", "--config", cfg, "--out", str(tmp_path / "r")], capsys)
    data = json.loads((tmp_path / "r" / "moments.json").read_text())
    assert code in (0, 1), err
    assert "verdict" in data


def test_consistency_residual_check(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {
        "form": "delta", "plan": {"T": 1e5, "count": 20, "seed": 1},
        "schedule": {"X": 100, "Y": 10, "sigma0": 0.6, "K1": 5, "K2": 3}, "checks": ["prop3", "mollifier"],
    })
    code, _, err = run(["consistency", "--config", cfg, "--out", str(tmp_path / "r")], capsys)
    assert code in (0, 1), err
    files = sorted(p.name for p in (tmp_path / "r").iterdir())
    assert any(f.endswith(".json") for f in files) and any(f.endswith(".csv") for f in files)


def test_bad_override_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {"form": "delta", "plan": {"T": 1e5, "count": 20}})
    code, _, err = run(["clt", "--config", cfg, "--override", "Q=3", "--out", str(tmp_path / "r")], capsys)
    assert code == 2
