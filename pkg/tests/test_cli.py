import csv
import numpy as np
import pytest

from uplinksched.cli import EXIT_IO, EXIT_SCHEDULING, main
from uplinksched.config import ExperimentConfig, build_population, distances, load_config, parse_config
from uplinksched.errors import ParameterError
from uplinksched.experiments import ResultTable, format_value, run_figure, run_table

FAST = ExperimentConfig(num_draws=2, num_realizations=200)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_defaults_and_frame(self):
        cfg = ExperimentConfig()
        assert (cfg.num_users, cfg.antennas, cfg.energy_dB) == (100, 64, 70.0)
        assert cfg.frame.symbol_duration == pytest.approx(1e-5)

    def test_parse(self):
        cfg = parse_config("""
            # comment
            num_users = 20   # inline
            antennas_sweep = 32, 64
            energy_dB_sweep = 50,60.5
            zf_fallback = yes
            receiver = mrc
        """)
        assert cfg.num_users == 20 and cfg.antennas_sweep == (32, 64)
        assert cfg.energy_dB_sweep == (50.0, 60.5) and cfg.zf_fallback and cfg.receiver == "mrc"

    @pytest.mark.parametrize("text", ["nonsense", "colour = red", "num_users = 2.5", "zf_fallback = maybe",
                                      "calibration = fancy", "antennas_sweep = ", "solver = simplex",
                                      "num_users = 0", "receiver = mmse"])
    def test_rejects(self, text):
        with pytest.raises(ParameterError):
            parse_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParameterError):
            load_config(tmp_path / "absent.cfg")

    def test_base_is_kept(self):
        cfg = parse_config("seed = 4", base=ExperimentConfig(num_users=7))
        assert (cfg.seed, cfg.num_users) == (4, 7)


class TestPopulation:
    def test_distances(self):
        d = distances(ExperimentConfig())
        assert d[0] == pytest.approx(10.9) and d[-1] == pytest.approx(100.0)

    def test_calibration(self):
        users = build_population(ExperimentConfig())
        weakest = users.users[-1]
        assert weakest.product == pytest.approx(1.0, rel=1e-12)
        assert weakest.id == 100

    def test_gain_decreasing_in_distance(self):
        by_id = {u.id: u for u in build_population(ExperimentConfig(calibration="raw"))}
        gains = [by_id[j].gain for j in range(1, 101)]
        assert np.all(np.diff(gains) < 0)
        assert by_id[1].gain == pytest.approx(0.1 * 10.9 ** -4)

    def test_per_user_energies(self):
        cfg = ExperimentConfig(num_users=3, energies_dB=(10.0, 20.0, 30.0), calibration="raw")
        by_id = {u.id: u for u in build_population(cfg)}
        assert by_id[2].energy_budget == pytest.approx(100.0)
        with pytest.raises(ParameterError):
            ExperimentConfig(num_users=3, energies_dB=(10.0,))


class TestTables:
    def test_format(self):
        assert format_value(0.1) == "0.10000000000000001"
        assert format_value([20, 20]) == "[20 20]"
        assert format_value(None) == "" and format_value(True) == "1"
        t = ResultTable("t", ("a", "b"), [(1, "x,y")])
        assert t.to_csv() == 'a,b\n1,"x,y"\n'

    def test_table_columns_and_identities(self):
        t = run_table(FAST, 3, values=[70.0])
        assert t.columns[:2] == ("E_dB", "scheme")
        assert t.column("scheme") == ["proposed", "random_optimal", "random_equal"]
        for row in t.rows:
            r = dict(zip(t.columns, row))
            assert r["status"] == "ok"
            assert sum(r["group_sizes"]) == 100
            assert r["approx_latency_seconds"] * FAST.bandwidth * r["SE"] == pytest.approx(1e4, rel=1e-9)

    def test_table_reproduces_structure(self):
        t = run_table(FAST, 4, schemes=("proposed",), values=[64, 2048])
        r64, r2048 = (dict(zip(t.columns, r)) for r in t.rows)
        assert r64["L_star"] == 20 and r64["group_sizes"] == [20] * 5
        assert max(r2048["group_sizes"]) > r2048["L_star"]

    def test_error_rows(self):
        t = run_table(FAST.replace(receiver="zf"), 4, schemes=("proposed",), values=[1])
        assert t.column("status")[0].startswith("error:")

    def test_bad_ids(self):
        with pytest.raises(ParameterError):
            run_table(FAST, 6)
        with pytest.raises(ParameterError):
            run_figure(FAST, 9)
        with pytest.raises(ParameterError):
            run_table(FAST, 3, schemes=("magic",))

    def test_figure3_columns(self):
        t = run_figure(FAST.replace(mc_energy_dB=(10.0,)), 3, values=[32])
        assert t.columns[:6] == ("M", "E_dB", "receiver", "exact_mean", "exact_std", "approx")
        assert len(t.rows) == 2

    def test_figure6_columns(self):
        t = run_figure(FAST, 6, values=[70.0])
        assert t.columns == ("E_dB", "L_star", "group_sizes", "SE", "status")
        assert t.rows[0][1] == 20

    def test_figure8_maximum(self):
        t = run_figure(FAST, 8)
        best = {r[0]: r for r in t.rows if r[-1]}
        assert set(best) == {"a", "b", "c"}
        _, _, M, L, K, se, _ = best["c"]
        assert M == 2048 and K > L
        assert se == max(r[5] for r in t.rows if r[0] == "c")


class TestCommandLine:
    def test_optimize(self, tmp_path, capsys):
        assert main(["optimize", "--out", str(tmp_path)]) == 0
        printed = capsys.readouterr().out.split()
        assert len(printed) == 3
        summary = {r["quantity"]: r["value"] for r in _rows(tmp_path / "policy_summary.csv")}
        assert summary["L_star"] == "20" and summary["group_sizes"] == "[20 20 20 20 20]"
        alloc = _rows(tmp_path / "policy_allocations.csv")
        assert all(float(r["energy_used"]) <= float(r["energy_budget"]) * (1 + 1e-9) for r in alloc)

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["baseline", "--set", "num_draws=2", "--set", "num_users=30"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert (a / "baseline.csv").read_bytes() == (b / "baseline.csv").read_bytes()

    def test_montecarlo_rerun_identical(self, tmp_path):
        args = ["montecarlo", "--values", "16", "--set", "num_realizations=50", "--set", "mc_energy_dB=0"]
        main(args + ["--out", str(tmp_path / "a")])
        main(args + ["--out", str(tmp_path / "b")])
        assert (tmp_path / "a/figure3.csv").read_bytes() == (tmp_path / "b/figure3.csv").read_bytes()

    def test_config_file_and_flags(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("num_users = 12\nantennas = 8\n")
        assert main(["optimize", "--config", str(cfg), "--receiver", "mrc", "--solver", "lp",
                     "--seed", "3", "--out", str(tmp_path)]) == 0
        alloc = _rows(tmp_path / "policy_allocations.csv")
        assert len(alloc) == 12

    def test_asymptotic(self, tmp_path):
        assert main(["asymptotic", "--out", str(tmp_path)]) == 0
        rows = {r["quantity"]: r["value"] for r in _rows(tmp_path / "asymptotic.csv")}
        assert rows["regime"] in ("i", "ii", "iii_iv")
        assert int(rows["L_star"]) >= 1

    def test_parameter_error_exit(self, tmp_path, capsys):
        code = main(["table", "3", "--values", "abc", "--out", str(tmp_path)])
        assert code == EXIT_SCHEDULING
        assert capsys.readouterr().err.strip().splitlines()[-1].startswith("error: parameter: ")

    def test_scheduling_error_exit(self, tmp_path, capsys):
        code = main(["optimize", "--set", "antennas=1", "--out", str(tmp_path)])
        assert code == EXIT_SCHEDULING
        assert capsys.readouterr().err.startswith("error: ")

    def test_io_error_exit(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["optimize", "--out", str(blocker / "sub")]) == EXIT_IO
        assert capsys.readouterr().err.startswith("error: io: ")

    def test_unknown_figure_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            main(["figure", "9"])

    def test_plot_writes_png(self, tmp_path):
        pytest.importorskip("matplotlib")
        assert main(["figure", "6", "--values", "60,70", "--plot", "--out", str(tmp_path)]) == 0
        png = tmp_path / "figure6.png"
        assert png.exists() and png.read_bytes()[:4] == b"\x89PNG"
        assert (tmp_path / "figure6.csv").exists()
