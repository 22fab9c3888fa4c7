import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from sdc_converse.channels import BUNDLED, SpecError, bundled, load_spec, parse_spec
from sdc_converse.cli import main, parse_grid
from sdc_converse.exponent import omega_q

FAST = ["--grid-points", "5", "--grid-refine", "1", "--starts", "4"]


def write_spec(tmp_path, data, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def good_spec():
    return {"s_size": 2, "x_size": 2, "y_size": 2, "state_dist": [0.5, 0.5],
            "w": [[[0.9, 0.1], [0.1, 0.9]], [[0.9, 0.1], [0.1, 0.9]]]}


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


# channel specs

def test_bundled_fixtures_load():
    for name in BUNDLED:
        spec = bundled(name)
        assert spec.name == name
        assert spec.channel.w.shape == (spec.s_size, spec.x_size, spec.y_size)
        assert parse_spec(spec.to_dict()).to_dict() == spec.to_dict()


def test_stuck_at_fixture():
    spec = bundled("stuck_at_memory_beta05")
    np.testing.assert_allclose(spec.state_dist, [0.25, 0.25, 0.5])
    assert spec.channel.w[0, :, 0].tolist() == [1.0, 1.0]
    assert spec.channel.w[1, :, 1].tolist() == [1.0, 1.0]
    assert spec.channel.w[2].tolist() == [[1.0, 0.0], [0.0, 1.0]]


@pytest.mark.parametrize("mutate,needle", [
    (lambda d: d["w"][1].__setitem__(0, [0.6, 0.3]), "w[1][0]"),
    (lambda d: d.__setitem__("state_dist", [0.5, 0.6]), "state_dist"),
    (lambda d: d.__delitem__("w"), "'w'"),
    (lambda d: d.__setitem__("x_size", 0), "x_size"),
    (lambda d: d["w"][0].__setitem__(1, [1.2, -0.2]), "w[0][1]"),
])
def test_spec_validation_names_field(mutate, needle):
    d = good_spec()
    mutate(d)
    with pytest.raises(SpecError) as e:
        parse_spec(d)
    assert needle in str(e.value)


def test_malformed_spec_exit_code(tmp_path, capsys):
    d = good_spec()
    d["w"][0][1] = [0.5, 0.4]
    path = write_spec(tmp_path, d)
    assert main(["region", path, "--out", str(tmp_path / "r.csv")]) == 2
    err = capsys.readouterr().err
    assert "w[0][1]" in err and "0.9" in err


def test_unreadable_spec(tmp_path, capsys):
    assert main(["region", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["region", str(tmp_path / "bad.json")]) == 2
    with pytest.raises(SpecError):
        load_spec(str(tmp_path / "missing.json"))


def test_parse_grid():
    assert parse_grid("1").tolist() == [1.0]
    np.testing.assert_allclose(parse_grid("0.1:10:3"), [0.1, 1, 10])
    for bad in ("", "a,b", "1,0.5", "-1", "1:2"):
        with pytest.raises(ValueError):
            parse_grid(bad)


# region

def test_region_useless(tmp_path):
    out = tmp_path / "region.csv"
    assert main(["region", "useless_binary", "--mu-grid", "0.1,1,10", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["mu", "c_mu"]
    assert all(abs(float(r[1])) <= 1e-3 for r in rows[1:])
    b = read_csv(tmp_path / "region_boundary.csv")
    assert b[0] == ["r_d", "c_of_r_d"] and len(b) == 42


def test_region_single_mu(tmp_path):
    out = tmp_path / "one.csv"
    assert main(["region", "bsc01_stateless", "--mu-grid", "1", "--out", str(out)]) == 0
    assert len(read_csv(out)) == 2
    assert out.read_bytes().endswith(b"\n") and b"\r" not in out.read_bytes()


def test_region_free_state_dominates(tmp_path):
    fixed, free = tmp_path / "fixed.csv", tmp_path / "free.csv"
    assert main(["region", "stuck_at_memory_beta05", "--mu-grid", "0.5", "--out", str(fixed)]) == 0
    assert main(["region", "stuck_at_memory_beta05", "--mu-grid", "0.5", "--free-state", "--out", str(free)]) == 0
    assert float(read_csv(free)[1][1]) >= float(read_csv(fixed)[1][1]) - 1e-9


# exponent

def test_exponent_outside_and_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["exponent", "bsc01_stateless", "--rd", "0", "--r", "1", "--out", str(a), "--seed", "7"] + FAST) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("F=") and " at alpha=" in line and " mu=" in line and " lambda=" in line
    assert float(line.split()[0][2:]) > 0
    assert main(["exponent", "bsc01_stateless", "--rd", "0", "--r", "1", "--out", str(b), "--seed", "7"] + FAST) == 0
    assert a.read_bytes() == b.read_bytes()
    assert read_csv(a)[0] == ["alpha", "mu", "lambda", "omega_w", "f"]


def test_exponent_inside_is_zero(capsys):
    assert main(["exponent", "bsc01_stateless", "--rd", "100", "--r", "0", "--out", "-"] + FAST) == 0
    summary = capsys.readouterr().out.strip().splitlines()[-1]
    assert abs(float(summary.split()[0][2:])) <= 1e-4


def test_exponent_rejects_negative_rate(capsys):
    assert main(["exponent", "bsc01_stateless", "--rd", "-1", "--r", "0"]) == 2


# verify

def test_verify_detects_corrupted_omega(capsys):
    def flipped(q, ch, a, m, lam):
        return -omega_q(q, ch, a, m, lam)

    code = main(["verify", "bsc01_stateless", "--samples", "10", "--checks", "convexity,slope"], omega_impl=flipped)
    out = capsys.readouterr().out
    assert code == 1
    assert "FAIL convexity" in out or "FAIL slope_identity" in out


def test_verify_passes_on_binary_channel(capsys):
    code = main(["verify", "noiseless_binary", "--samples", "10", "--checks", "convexity,slope,oracle"] + FAST)
    out = capsys.readouterr().out.splitlines()
    assert code == 0
    assert [line.split()[0] for line in out] == ["PASS"] * 4


def test_verify_oversize_oracle_skipped(tmp_path, capsys):
    rng = np.random.default_rng(0)
    d = {"s_size": 6, "x_size": 6, "y_size": 6, "state_dist": [1 / 6] * 6,
         "w": (rng.dirichlet(np.ones(6), size=(6, 6))).tolist()}
    d["w"] = [[list(map(float, row / sum(row))) for row in block] for block in np.array(d["w"])]
    path = write_spec(tmp_path, d)
    code = main(["verify", path, "--samples", "2", "--n", "3", "--m", "1",
                 "--checks", "convexity,slope,oracle"] + FAST)
    out = capsys.readouterr().out.splitlines()
    assert code == 0
    assert out[0].startswith("PASS convexity") and out[1].startswith("PASS slope_identity")
    assert out[2].startswith("SKIPPED main_theorem(n=3,k=2,m=1)")
    assert "code count" in out[2]


def test_verify_unknown_check(capsys):
    assert main(["verify", "bsc01_stateless", "--checks", "bogus"]) == 2


# oracle

def test_oracle_useless(capsys):
    assert main(["oracle", "useless_binary", "--n", "1", "--k", "2", "--m", "1"] + FAST) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "G=0.693147"
    assert out[-1].startswith("slack=") and out[-1].endswith("PASS")


def test_oracle_noiseless(capsys):
    assert main(["oracle", "noiseless_binary", "--n", "1", "--k", "2", "--m", "1"] + FAST) == 0
    assert capsys.readouterr().out.splitlines()[0] == "G=0.000000"


def test_oracle_guard_exit(capsys):
    assert main(["oracle", "stuck_at_memory_beta05", "--n", "2", "--k", "2"]) == 3
    assert "exceeds" in capsys.readouterr().err


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sdc_converse.cli", "oracle", "useless_binary",
                           "--grid-points", "3", "--grid-refine", "0"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("G=0.693147\n")
