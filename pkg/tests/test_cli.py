import subprocess
import sys

import numpy as np
import pytest

from qscale.cli import RunConfig, UsageError, build_model, load_config, main

STABLE = """\
[model]
drift = 0
convention = c_double_prime
sigma2 = 0

[jumps]
family = stable
alpha = 1.5
"""

CRAMER_LUNDBERG = """\
[model]
drift = 2
convention = c_prime

[jumps]
family = compound_poisson
rate = 1
law = exponential
law_rate = 1

[run]
xmax = 10
step = 0.001953125
"""

SUBORDINATOR = """\
[model]
drift = -1
convention = c_prime

[jumps]
family = compound_poisson
rate = 1
law = atoms
atoms = 1:0.5, 2:0.5
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _read_csv(path):
    lines = open(path, encoding="utf-8").read().splitlines()
    header = [line for line in lines if line.startswith("#")]
    body = [line for line in lines if not line.startswith("#")]
    data = np.array([[float(v) for v in row.split(",")] for row in body[1:]])
    return header, body[0], data


class TestModelFiles:
    def test_stable(self, tmp_path):
        cfg, _ = load_config(_write(tmp_path, "m.ini", STABLE))
        model = build_model(cfg)
        assert model.psi(2.0) == pytest.approx(2.0**1.5)

    def test_atoms(self, tmp_path):
        cfg, _ = load_config(_write(tmp_path, "m.ini", SUBORDINATOR))
        model = build_model(cfg)
        assert model.jumps.rate == 1.0

    def test_unknown_family(self, tmp_path):
        cfg, _ = load_config(_write(tmp_path, "m.ini", STABLE.replace("stable", "gamma", 1)))
        with pytest.raises(UsageError):
            build_model(cfg)

    def test_missing_model_section(self, tmp_path):
        cfg, _ = load_config(_write(tmp_path, "m.ini", "[jumps]\nfamily = none\n"))
        with pytest.raises(UsageError):
            build_model(cfg)

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError):
            load_config(str(tmp_path / "absent.ini"))

    @pytest.mark.parametrize(
        "kwargs", [dict(step=0.0), dict(step=0.1, x_max=0.5), dict(q=-1.0), dict(max_terms=0), dict(command="plot")]
    )
    def test_run_config_validation(self, kwargs):
        base = dict(command="scale", model_path="m.ini")
        with pytest.raises(UsageError):
            RunConfig(**{**base, **kwargs}).validate()


class TestCommands:
    def test_stable_scale(self, tmp_path, capsys):
        model = _write(tmp_path, "stable.ini", STABLE)
        out = str(tmp_path / "W.csv")
        code = main(["scale", "--model", model, "--q", "0", "--step", str(1 / 1024), "--xmax", "4", "--out", out])
        assert code == 0
        summary = capsys.readouterr().out
        assert "residual<0.01 PASS" in summary
        header, columns, data = _read_csv(out)
        assert columns == "x,W"
        assert np.interp(1.0, data[:, 0], data[:, 1]) == pytest.approx(1.1284, abs=1e-3)

    def test_ruin(self, tmp_path, capsys):
        model = _write(tmp_path, "cl.ini", CRAMER_LUNDBERG)
        out = str(tmp_path / "r.csv")
        assert main(["ruin", "--model", model, "--out", out]) == 0
        _, columns, data = _read_csv(out)
        assert columns == "x,ruin"
        assert data[-1, 0] == pytest.approx(10.0, abs=1e-2)
        assert np.interp(2.0, data[:, 0], data[:, 1]) == pytest.approx(0.18394, abs=1e-4)

    def test_verify_prints_summary_only(self, tmp_path, capsys):
        model = _write(tmp_path, "cl.ini", CRAMER_LUNDBERG)
        assert main(["verify", "--model", model, "--xmax", "20"]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 1 and out[0].startswith("verify:") and out[0].endswith("s")

    def test_resolvent(self, tmp_path, capsys):
        model = _write(tmp_path, "stable.ini", STABLE)
        out = str(tmp_path / "rho.csv")
        assert main(["resolvent", "--model", model, "--xmax", "2", "--step", str(1 / 256), "--out", out]) == 0
        _, columns, data = _read_csv(out)
        assert columns == "x,rho"
        np.testing.assert_allclose(data[:, 1], data[:, 0] ** -0.5 / np.sqrt(np.pi), rtol=1e-8)

    def test_renewal_power_kernel(self, tmp_path, capsys):
        text = STABLE + "\n[renewal]\nkernel = power\nexponent = -0.5\ncoefficient = 1.7724538509055159\n"
        model = _write(tmp_path, "ren.ini", text)
        out = str(tmp_path / "f.csv")
        assert main(["renewal", "--model", model, "--xmax", "2", "--step", str(1 / 256), "--out", out]) == 0
        _, columns, _ = _read_csv(out)
        assert columns == "x,f"

    def test_stdout_csv_and_stderr_summary(self, tmp_path, capsys):
        model = _write(tmp_path, "cl.ini", CRAMER_LUNDBERG)
        assert main(["ruin", "--model", model, "--xmax", "2", "--step", "0.0078125"]) == 0
        captured = capsys.readouterr()
        assert captured.out.startswith("# command=ruin")
        assert captured.err.startswith("ruin:")


class TestExitCodes:
    def test_subordinator(self, tmp_path, capsys):
        model = _write(tmp_path, "sub.ini", SUBORDINATOR)
        assert main(["scale", "--model", model, "--xmax", "2", "--step", "0.0078125"]) == 1
        assert "SubordinatorExcluded" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["scale", "--model", str(tmp_path / "absent.ini")]) == 1

    def test_bad_flag(self, capsys):
        assert main(["scale"]) == 1

    def test_bad_grid(self, tmp_path, capsys):
        model = _write(tmp_path, "stable.ini", STABLE)
        assert main(["scale", "--model", model, "--xmax", "0.01", "--step", "0.01"]) == 1

    def test_not_converged(self, tmp_path, capsys):
        model = _write(tmp_path, "cl.ini", CRAMER_LUNDBERG)
        code = main(["scale", "--model", model, "--max-terms", "2", "--xmax", "4", "--step", "0.0078125"])
        assert code == 2
        assert "NotConverged" in capsys.readouterr().err

    def test_verification_failure(self, tmp_path, capsys):
        # a step of 1/4 leaves a Laplace residual of a few percent
        model = _write(tmp_path, "cl.ini", CRAMER_LUNDBERG)
        code = main(["scale", "--model", model, "--xmax", "30", "--step", "0.25", "--verify-tol", "1e-3"])
        assert code == 3
        assert "FAIL" in capsys.readouterr().err


class TestDeterminism:
    def test_bitwise_identical(self, tmp_path, capsys):
        model = _write(tmp_path, "cl.ini", CRAMER_LUNDBERG)
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        for out in (a, b):
            assert main(["ruin", "--model", model, "--xmax", "4", "--step", "0.0078125", "--out", out]) == 0
        assert open(a, "rb").read() == open(b, "rb").read()
        assert b"\r\n" not in open(a, "rb").read()

    def test_header_reproduces_run(self, tmp_path, capsys):
        model = _write(tmp_path, "cl.ini", CRAMER_LUNDBERG)
        out = str(tmp_path / "a.csv")
        main(["ruin", "--model", model, "--xmax", "4", "--step", "0.0078125", "--out", out])
        header, _, _ = _read_csv(out)
        keys = {line[2:].split("=", 1)[0] for line in header if "=" in line and not line.startswith("# config")}
        assert {"command", "fingerprint", "q", "h", "x_max", "method", "terms", "residual"} <= keys
        config = "\n".join(line[len("# config: "):] for line in header if line.startswith("# config: "))
        rebuilt = _write(tmp_path, "rebuilt.ini", config)
        out2 = str(tmp_path / "b.csv")
        main(["ruin", "--model", rebuilt, "--xmax", "4", "--step", "0.0078125", "--out", out2])
        assert _read_csv(out)[2].tolist() == _read_csv(out2)[2].tolist()

    def test_module_entry_point(self, tmp_path):
        model = _write(tmp_path, "cl.ini", CRAMER_LUNDBERG)
        proc = subprocess.run(
            [sys.executable, "-m", "qscale", "verify", "--model", model, "--xmax", "20", "--step", "0.0078125"],
            capture_output=True,
            text=True,
            check=False,
        )
        assert proc.returncode == 0, proc.stderr
        assert "PASS" in proc.stdout
