import json

import numpy as np
import pytest

from hetbeliefs.cli import main
from hetbeliefs.verify import config_decoupled, config_standard_j1, config_standard_j2

SQRT2M1 = np.sqrt(2.0) - 1.0


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "economy.json"
    path.write_text(json.dumps(config_standard_j1()))
    return str(path)


def _stderr_error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


class TestDispatch:
    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_no_subcommand(self, capsys):
        assert main([]) == 1

    def test_missing_config_flag(self, capsys):
        assert main(["stationary-cov"]) == 1

    def test_help_exit_zero(self, capsys):
        assert main(["--help"]) == 0

    def test_malformed_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        assert main(["stationary-cov", "--config", str(bad)]) == 1
        body = _stderr_error(capsys)
        assert body["error_type"] == "validation"
        assert "JSON" in body["message"]

    def test_invalid_economy_exits_one(self, tmp_path, capsys):
        doc = config_standard_j1()
        doc["agents"][0]["B"] = [[-1.0, 0.0], [0.0, -1.0]]
        path = tmp_path / "c.json"
        path.write_text(json.dumps(doc))
        assert main(["stationary-cov", "--config", str(path)]) == 1
        assert _stderr_error(capsys)["error_type"] == "validation"


class TestStationaryCov:
    def test_prints_value(self, config_path, capsys):
        assert main(["stationary-cov", "--config", config_path]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "agent,i,j,value"
        assert "0.41421356237309" in out


class TestSimulate:
    def test_writes_csv_and_manifest(self, config_path, tmp_path, capsys):
        out = tmp_path / "paths.csv"
        rc = main(["simulate", "--config", config_path, "--out", str(out),
                   "--paths", "2", "--dt", "0.01", "--seed", "3"])
        assert rc == 0
        header = out.read_text().splitlines()[0]
        assert header == "path_id,t,x,delta,xhat_1_1,N_1,loglamhat_1"
        manifest = json.loads((tmp_path / "paths.csv.manifest.json").read_text())
        assert manifest["subcommand"] == "simulate"
        assert manifest["seed"] == 3
        assert manifest["artifacts"] == [str(out)]
        assert len(manifest["config_hash"]) == 64

    def test_byte_identical_reruns(self, config_path, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert main(["simulate", "--config", config_path, "--out", str(out),
                         "--paths", "3", "--dt", "0.01", "--seed", "11"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_summary(self, config_path, tmp_path):
        out = tmp_path / "s.csv"
        rc = main(["simulate", "--config", config_path, "--out", str(out),
                   "--paths", "8", "--dt", "0.01", "--summary"])
        assert rc == 0
        assert out.read_text().splitlines()[0].startswith("t,mean_x,var_x")


class TestRatePath:
    def test_file_columns(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(config_standard_j2()))
        out = tmp_path / "rates.csv"
        rc = main(["rate-path", "--config", str(path), "--out", str(out),
                   "--paths", "2", "--dt", "0.01"])
        assert rc == 0
        assert out.read_text().splitlines()[0] == "path_id,t,r,kappa,logzeta"


class TestCovPath:
    def test_stdout(self, config_path, capsys):
        rc = main(["cov-path", "--config", config_path, "--t-end", "0.5",
                   "--dt", "0.01"])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "t,v_1_1,v_1_2,v_2_1,v_2_2"
        assert len(out.splitlines()) == 52


class TestRiccati:
    def test_writes_grid(self, config_path, tmp_path):
        out = tmp_path / "abc.csv"
        rc = main(["riccati", "--config", config_path, "--tau-max", "0.2",
                   "--dtau", "0.01", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("tau,a_1_1,")
        assert lines[0].endswith("dc_dtheta,d2c_dtheta2")
        assert len(lines) == 22


class TestPrice:
    def test_quote_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(config_decoupled()))
        out = tmp_path / "quote.json"
        rc = main(["price", "--config", str(path), "--out", str(out)])
        assert rc == 0
        quote = json.loads(out.read_text())
        assert set(quote) >= {"S", "error_estimate", "T_max", "tau_grid_size"}
        assert quote["S"] == pytest.approx(200.0 / 9.0, rel=1e-3)
        assert (tmp_path / "quote.json.manifest.json").exists()

    def test_divergent_exit_two(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(config_decoupled(rho=0.004)))
        rc = main(["price", "--config", str(path), "--dtau", "0.5"])
        assert rc == 2
        body = _stderr_error(capsys)
        assert body["error_type"] == "numerical"
        assert "non-decaying" in body["message"]

    def test_zbar_file(self, tmp_path):
        cpath = tmp_path / "c.json"
        cpath.write_text(json.dumps(config_decoupled()))
        zpath = tmp_path / "z.json"
        zpath.write_text("[0.5, 0.0]")
        rc = main(["price", "--config", str(cpath), "--zbar", str(zpath)])
        assert rc == 0


class TestVerifyVT:
    def test_quick_run(self, config_path, tmp_path, capsys):
        out = tmp_path / "vt.csv"
        rc = main(["verify-vt", "--config", config_path, "--paths", "2000",
                   "--dt", "0.005", "--seed", "7", "--out", str(out)])
        assert rc == 0
        printed = capsys.readouterr().out
        assert printed.splitlines()[0] == "tau,theta,vt_ode,vt_mc,stderr,z,passed"
        assert out.exists()
