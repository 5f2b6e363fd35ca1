import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cowu import cli, tableio

SMALL = ["--N", "4", "--M", "6", "--range", "4:6", "--q", "0.01", "--L", "2", "--p", "0.3"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestExitCodes:
    def test_success(self, capsys):
        code, out, _ = run(capsys, "zeta-sweep", *SMALL, "--zeta-max", "12", "--rounds", "50")
        assert code == 0
        cols, rows = tableio.from_csv(out)
        assert cols == list(cli.ZETA_COLUMNS)
        assert len(rows) == 12 and [r["zeta"] for r in rows] == list(range(1, 13))

    @pytest.mark.parametrize(
        "argv",
        [
            ["zeta-sweep", "--N", "0"],
            ["zeta-sweep", "--range", "5:200"],
            ["zeta-sweep", "--range", "banana"],
            ["zeta-sweep", "--p", "1.5"],
            ["zeta-sweep", "--rounds", "-1"],
            ["q-sweep", "--q-values", "0.9"],
        ],
    )
    def test_bad_config(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 2 and "invalid configuration" in err

    def test_unknown_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["zeta-sweep", "--colour", "red"])
        assert exc.value.code == 2

    def test_missing_output_directory(self, capsys, tmp_path):
        code, _, err = run(capsys, "zeta-sweep", *SMALL, "--out", str(tmp_path / "nope" / "x.csv"))
        assert code == 3 and "does not exist" in err

    def test_missing_config_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "zeta-sweep", "--config", str(tmp_path / "absent.yaml"))
        assert code == 3

    def test_validation_failure(self, capsys, monkeypatch):
        import cowu.csma as csma

        true_fn = csma.success_probability
        monkeypatch.setattr(csma, "success_probability", lambda n, p: true_fn(n, p) * (0.99 if n > 1 else 1.0))
        code, out, _ = run(capsys, "validate")
        assert code == 1
        first = out.splitlines()[0]
        assert first.startswith("[FAIL] csma-chain") and "w=2 L=1 p=0.5 zeta=3" in first
        assert "observed=" in first and "expected=" in first

    def test_validation_success(self, capsys):
        code, out, _ = run(capsys, "validate")
        assert code == 0
        assert "w=2 L=1 p=0.5 zeta=3" in out
        assert out.rstrip().endswith("checks passed") and "[FAIL]" not in out


class TestOutputs:
    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for path in paths:
            assert cli.main(["zeta-sweep", *SMALL, "--zeta-max", "20", "--rounds", "200", "--seed", "9", "--out", str(path)]) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_json_format(self, capsys):
        code, out, _ = run(capsys, "zeta-sweep", *SMALL, "--zeta-max", "5", "--rounds", "0", "--format", "json")
        doc = json.loads(out)
        assert code == 0 and doc["columns"] == list(cli.ZETA_COLUMNS)
        assert doc["meta"]["N"] == 4 and len(doc["rows"]) == 5
        assert all(r["gamma_simulated"] is None for r in doc["rows"])

    def test_analytic_columns_ordered(self, capsys):
        _, out, _ = run(capsys, "zeta-sweep", *SMALL, "--zeta-max", "30", "--rounds", "0")
        _, rows = tableio.from_csv(out)
        assert all(r["gamma_upper"] >= r["gamma_analytical"] - 1e-15 for r in rows)
        assert len({r["gamma_round_robin"] for r in rows}) == 1

    def test_q_sweep_blocks(self, capsys):
        code, out, _ = run(capsys, "q-sweep", *SMALL, "--zeta-max", "60",
                           "--q-values", "0.005,0.01,0.02", "--q-hat-values", "0.005,0.02")
        assert code == 0
        _, rows = tableio.from_csv(out)
        assert len(rows) == 9
        perfect = rows[:3]
        assert all(r["q"] == r["q_hat"] for r in perfect)
        for block in (rows[3:6], rows[6:9]):
            assert len({r["zeta_opt"] for r in block}) == 1
            for r, best in zip(block, perfect):
                assert r["gamma_cowu"] <= best["gamma_cowu"] + 1e-15

    def test_energy_and_trace(self, capsys, tmp_path):
        trace = tmp_path / "trace.csv"
        code, out, _ = run(capsys, "energy", *SMALL, "--rounds", "40", "--trace", str(trace))
        assert code == 0
        _, rows = tableio.from_csv(out)
        assert [r["scheme"] for r in rows] == ["round-robin", "cowu"]
        assert rows[0]["mean_energy_mJ"] == pytest.approx(4 * 2 * 55e-3 * 320e-6 * 1e3)
        assert len(trace.read_text().splitlines()) == 41

    def test_calibrate_marks_one_choice(self, capsys):
        code, out, _ = run(capsys, "calibrate-p", *SMALL, "--rounds", "0", "--target-mJ", "0.05")
        assert code == 0
        _, rows = tableio.from_csv(out)
        assert sum(r["selected"] for r in rows) == 1


class TestConfigFile:
    def test_flags_override_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("N: 4\nM: 6\nrange: '4:6'\nq: 0.01\nL: 2\np: 0.3\nzeta_max: 40\nrounds: 0\nseed: 5\n")
        _, out, _ = run(capsys, "zeta-sweep", "--config", str(cfg), "--zeta-max", "7", "--format", "json")
        doc = json.loads(out)
        assert doc["meta"]["zeta_max"] == 7 and doc["meta"]["N"] == 4
        assert doc["meta"]["seed"] == 5 and doc["meta"]["rounds"] == 0

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("N: 4\nspeed: 3\n")
        code, _, err = run(capsys, "zeta-sweep", "--config", str(cfg))
        assert code == 2 and "speed" in err

    def test_matrix_from_file(self, tmp_path, capsys):
        (tmp_path / "z.json").write_text(json.dumps([[0.9, 0.1], [0.3, 0.7]]))
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"N": 2, "M": 2, "range": [2, 2], "L": 1, "p": 0.5, "matrix": "z.json", "rounds": 0}))
        code, out, _ = run(capsys, "zeta-sweep", "--config", str(cfg), "--zeta-max", "3")
        assert code == 0
        _, rows = tableio.from_csv(out)
        assert len(rows) == 3

    def test_energy_block(self, tmp_path, capsys):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("N: 3\nM: 4\nrange: '1:2'\nL: 1\nenergy:\n  tx_power_W: 1.0\n  slot_duration_s: 1.0\n")
        code, out, _ = run(capsys, "energy", "--config", str(cfg), "--rounds", "3")
        assert code == 0
        _, rows = tableio.from_csv(out)
        assert rows[0]["mean_energy_mJ"] == pytest.approx(3000.0)


cells = st.one_of(
    st.none(),
    st.integers(-10**9, 10**9),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\r\x00"), min_size=1, max_size=8).filter(
        lambda s: tableio.parse_cell(s) == s
    ),
)


@given(st.lists(st.fixed_dictionaries({"a": cells, "b": cells, "c": cells}), max_size=10))
@settings(max_examples=100, deadline=None)
def test_csv_round_trip(rows):
    text = tableio.to_csv(rows, ["a", "b", "c"])
    cols, back = tableio.from_csv(text)
    assert cols == ["a", "b", "c"]
    assert back == rows
    assert tableio.to_csv(back, cols) == text


def test_numpy_scalars_serialise():
    text = tableio.to_csv([{"x": np.float64(0.1), "y": np.int64(3), "z": True}], ["x", "y", "z"])
    assert text == "x,y,z\n0.1,3,1\n"


class TestReferenceCommands:
    def test_full_sweep_tracks_analysis(self):
        rows = cli.cmd_zeta_sweep(cli.ExperimentSpec(kind="zeta-sweep", scenario=cli.ScenarioConfig()))
        assert len(rows) == 2000
        gap = max(abs(r["gamma_simulated"] - r["gamma_analytical"]) for r in rows)
        max_se = max(np.sqrt(r["gamma_analytical"] * (1 - r["gamma_analytical"]) / 10_000) for r in rows)
        assert gap <= 3 * max_se

    def test_perfect_knowledge_declines_with_q(self):
        spec = cli.ExperimentSpec(kind="q-sweep", scenario=cli.ScenarioConfig())
        rows = cli.cmd_q_sweep(spec, list(cli.DEFAULT_Q_GRID), [])
        assert [r["q"] for r in rows] == list(cli.DEFAULT_Q_GRID)
        for key in ("gamma_cowu", "gamma_round_robin"):
            values = [r[key] for r in rows]
            assert all(b <= a for a, b in zip(values, values[1:]))

    def test_everyone_awake_costs_more_than_tdma(self):
        cfg = cli.ScenarioConfig(N=20, range=cli.RangeQuery(1, 100))
        rows = cli.cmd_energy(cli.ExperimentSpec(kind="energy", scenario=cfg, rounds=30))
        rr, cowu = rows
        assert rr["ci_mJ"] == 0.0
        assert cowu["mean_energy_mJ"] > rr["mean_energy_mJ"]
