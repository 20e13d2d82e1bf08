import json
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qrwalk import serialization as ser
from qrwalk.channel import random_classical_unitary
from qrwalk.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, EXIT_PRECONDITION, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def three_point(tmp_path):
    path = tmp_path / "sys.json"
    path.write_text(json.dumps({"vectors": [[1, 0], [-1, 1], [-1, -2]]}))
    return path


def test_obtuse_validate(capsys, three_point, tmp_path):
    code, out, _ = run(capsys, "obtuse", "validate", str(three_point))
    assert code == EXIT_OK
    assert_allclose(json.loads(out)["probabilities"], [1 / 2, 1 / 3, 1 / 6], atol=1e-14)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"vectors": [[1, 0], [-1, 1], [-1, -1]]}))
    code, _, err = run(capsys, "obtuse", "validate", str(bad))
    assert code == EXIT_FAIL
    assert "v_2, v_3" in err


def test_obtuse_from_probs_and_tensor(capsys, tmp_path):
    code, out, _ = run(capsys, "obtuse", "from-probs", "1/2,1/3,1/6")
    assert code == EXIT_OK
    path = tmp_path / "s.json"
    path.write_text(out)
    code, out, _ = run(capsys, "tensor3", "from-rv", str(path))
    assert code == EXIT_OK
    tpath = tmp_path / "t.json"
    tpath.write_text(out)
    code, out, _ = run(capsys, "tensor3", "check", str(tpath))
    assert code == EXIT_OK
    assert run(capsys, "obtuse", "from-probs", "1/2,1/3")[0] == EXIT_INPUT


def test_channel_commands(capsys, tmp_path):
    u = random_classical_unitary(2, 3, np.random.default_rng(0))
    path = tmp_path / "cu.json"
    path.write_text(ser.dumps(ser.classical_unitary_to_json(u)))
    code, out, _ = run(capsys, "channel", "decompose", str(path))
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["reconstruction_residual"] <= 1e-9
    assert_allclose(doc["probabilities"], u.probabilities, atol=1e-12)
    assert run(capsys, "channel", "check-equal", str(path), str(path))[0] == EXIT_OK
    code, _, _ = run(capsys, "channel", "decompose", "--preset", "dim2-poisson", "--h", "0.01")
    assert code == EXIT_OK
    assert run(capsys, "channel", "decompose", "--random", "--dim-sys", "2", "--dim-env", "4")[0] == EXIT_OK


def test_exit_codes(capsys, tmp_path):
    assert run(capsys, "channel", "decompose", str(tmp_path / "missing.json"))[0] == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "channel", "decompose", str(bad))[0] == EXIT_INPUT
    orth = tmp_path / "orth.json"
    eye = ser.enc_matrix(np.eye(2))
    orth.write_text(json.dumps({"branches": [{"phi": [0, 1], "unitary": eye}, {"phi": [1, 0], "unitary": eye}]}))
    code, _, err = run(capsys, "channel", "decompose", str(orth))
    assert code == EXIT_PRECONDITION
    assert "choose different e_0 or reorder basis" in err
    assert run(capsys, "limit", "tensors", "no-such-family")[0] == EXIT_INPUT
    with pytest.raises(SystemExit) as exc:
        main(["walk", "simulate"])
    assert exc.value.code == 2


def test_walk_simulate_csv(capsys):
    code, out, _ = run(capsys, "walk", "simulate", "--preset", "dim2-poisson", "--h", "0.01",
                       "--steps", "300", "--trials", "2", "--seed", "1", "--no-timestamp", "--terminal-only")
    assert code == EXIT_OK
    meta, rows = ser.read_csv(out)
    assert meta["schema"] == "v1" and meta["seed"] == "1"
    assert "generated" not in meta
    assert len(rows) == 2
    v = np.array([
        [[complex(float(r[f"v{a}{b}_re"]), float(r[f"v{a}{b}_im"])) for b in (1, 2)] for a in (1, 2)]
        for r in rows
    ])
    assert_allclose(v @ v.conj().transpose(0, 2, 1), np.broadcast_to(np.eye(2), (2, 2, 2)), atol=1e-8)


def test_walk_zero_steps_and_oracle(capsys):
    code, out, _ = run(capsys, "walk", "simulate", "--preset", "dim3-brownian2", "--steps", "0", "--seed", "0",
                       "--no-timestamp")
    assert code == EXIT_OK
    _, rows = ser.read_csv(out)
    assert len(rows) == 1 and rows[0]["v11_re"] == "1"
    code, _, _ = run(capsys, "walk", "simulate", "--preset", "dim2-diffusive", "--steps", "2", "--trials", "2000",
                     "--seed", "0", "--verify-oracle", "--terminal-only", "--no-timestamp")
    assert code == EXIT_OK


def test_output_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("QRWALK_OUTPUT_DIR", str(tmp_path))
    code, out, _ = run(capsys, "walk", "simulate", "--preset", "deterministic", "--steps", "3", "--seed", "2",
                       "--out", "sub/walk.csv")
    assert code == EXIT_OK and out == ""
    assert (tmp_path / "sub" / "walk.csv").read_text().startswith("# schema=v1\n# seed=2\n")


def test_limit_commands(capsys):
    code, out, _ = run(capsys, "limit", "tensors", "physical-1d")
    assert code == EXIT_OK
    assert_allclose(ser.dec_matrix(json.loads(out)["Mk"][0]), [[1.0]], atol=1e-10)
    code, out, _ = run(capsys, "limit", "model", "dim3-mixed")
    assert code == EXIT_OK
    assert ser.model_from_json(json.loads(out)).driver.kind == "mixed"
    code, out, _ = run(capsys, "limit", "brackets", "dim2-poisson", "--dt", "1e-3", "--trials", "300")
    assert code == EXIT_OK
    assert "PASS" in out


def test_converge_is_deterministic(capsys):
    argv = ["limit", "converge", "dim2-poisson", "--t", "0.5", "--hs", "0.05,0.0125", "--trials", "500",
            "--sde-dt", "1e-3", "--seed", "3", "--no-timestamp"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    meta, rows = ser.read_csv(first)
    assert meta["seed"] == "3"
    assert any(r["observable"] == "ks-first-jump" for r in rows)


def test_console_script_entry_point(tmp_path):
    argv = [sys.executable, "-m", "qrwalk.cli", "walk", "simulate", "--preset", "dim3-mixed", "--steps", "20",
            "--trials", "3", "--seed", "9", "--no-timestamp"]
    a = subprocess.run(argv, capture_output=True, text=True, check=True).stdout
    b = subprocess.run(argv, capture_output=True, text=True, check=True).stdout
    assert a == b and a.startswith("# schema=v1")
