import math
from pathlib import Path

import pytest

from aqmsim.cli import main as cli_main
from aqmsim.experiment import (
    SCHEMES,
    ExperimentSpec,
    SpecError,
    build_scheme,
    emit_outputs,
    execute,
    load_spec,
    resolved_params,
    run_experiment,
)
from aqmsim.netsim import TopologyConfig

REPO = Path(__file__).resolve().parent.parent
SMOKE = REPO / "experiments" / "smoke.conf"


def write_conf(tmp_path, body, name="exp.conf"):
    path = tmp_path / name
    path.write_text(body)
    return path


def tiny_spec(**overrides):
    """Fast in-memory spec on a scaled-down topology."""
    base = dict(
        scenario=1,
        aqm="red",
        duration=3.0,
        seeds=(1, 2),
        n_flows=3,
        out_dir="unused",
        ma_window=1.0,
    )
    base.update(overrides)
    spec = ExperimentSpec(**base)
    spec.topology_args = {
        "bottleneck_rate": 2e6,
        "bottleneck_delay": 0.005,
        "edge_rate": 10e6,
        "edge_delay": 0.001,
        "buffer_packets": 50,
    }
    spec.params = resolved_params(spec.aqm, {}, TopologyConfig(n_flows=3, **spec.topology_args))
    return spec


class TestLoadSpec:
    def test_minimal_file_fills_defaults(self, tmp_path):
        path = write_conf(tmp_path, "[experiment]\nscenario = 1\naqm = dbetared\nn_flows = 100\n")
        spec = load_spec(path)
        assert spec.duration == 250.0
        assert spec.seeds == (1, 2, 3, 4, 5)
        assert spec.params["t_target"] == 0.040
        assert spec.params["theta"] == 0.1
        assert spec.params["w"] == 0.1
        assert spec.params["t_update"] == 0.5
        assert spec.params["alpha"] == 1.0 and spec.params["beta"] == 1.0

    def test_betared_target_resolved_from_delay(self, tmp_path):
        path = write_conf(tmp_path, "[experiment]\naqm = betared\n")
        spec = load_spec(path)
        # 50 Mbps of 1000-byte packets at a 40 ms target
        assert spec.params["q_target"] == pytest.approx(250.0)
        assert spec.params["q_max"] == 1000.0

    def test_unknown_scheme_names_field(self, tmp_path):
        path = write_conf(tmp_path, "[experiment]\naqm = nosuch\n")
        with pytest.raises(SpecError, match="aqm"):
            load_spec(path)

    def test_theta_range_error(self, tmp_path):
        path = write_conf(tmp_path, "[experiment]\naqm = betared\n\n[betared]\ntheta = 1.5\n")
        with pytest.raises(SpecError, match="theta"):
            load_spec(path)

    def test_unknown_scheme_key_rejected(self, tmp_path):
        path = write_conf(tmp_path, "[experiment]\naqm = red\n\n[red]\nbogus = 1\n")
        with pytest.raises(SpecError, match="bogus"):
            load_spec(path)

    def test_unknown_experiment_key_rejected(self, tmp_path):
        path = write_conf(tmp_path, "[experiment]\nwhatever = 3\n")
        with pytest.raises(SpecError, match="whatever"):
            load_spec(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SpecError, match="config file"):
            load_spec(tmp_path / "nope.conf")

    def test_sweep_parsing(self, tmp_path):
        path = write_conf(
            tmp_path,
            "[experiment]\naqm = betared\nsweep = theta=0.1,0.2; n_flows=10,20\n",
        )
        spec = load_spec(path)
        assert spec.sweep == (("theta", (0.1, 0.2)), ("n_flows", (10, 20)))

    def test_sweep_over_schemes(self, tmp_path):
        path = write_conf(tmp_path, "[experiment]\nsweep = aqm=red,pie\n")
        spec = load_spec(path)
        assert spec.sweep == (("aqm", ("red", "pie")),)

    def test_sweep_unknown_parameter(self, tmp_path):
        path = write_conf(tmp_path, "[experiment]\naqm = droptail\nsweep = theta=0.1,0.2\n")
        with pytest.raises(SpecError, match="theta"):
            load_spec(path)

    def test_sweep_param_must_exist_for_all_swept_schemes(self, tmp_path):
        path = write_conf(tmp_path, "[experiment]\nsweep = aqm=red,codel; theta=0.1,0.2\n")
        with pytest.raises(SpecError, match="theta"):
            load_spec(path)

    def test_overrides_win_over_file(self, tmp_path):
        path = write_conf(tmp_path, "[experiment]\naqm = red\nduration = 100\n")
        spec = load_spec(path, {"duration": 5.0, "aqm": "pie"})
        assert spec.duration == 5.0
        assert spec.aqm == "pie"

    def test_all_shipped_configs_parse(self):
        for conf in sorted((REPO / "experiments").glob("*.conf")):
            spec = load_spec(conf)
            assert spec.aqm in SCHEMES


class TestBuildScheme:
    def test_red_thresholds_derived_from_target(self):
        topo = TopologyConfig(n_flows=10)
        params = resolved_params("red", {}, topo)
        assert params["q_min"] == pytest.approx(125.0)
        assert params["q_max"] == pytest.approx(375.0)

    def test_ared_weight_follows_capacity(self):
        topo = TopologyConfig(n_flows=10)
        params = resolved_params("ared", {}, topo)
        assert params["w"] == pytest.approx(1.0 - math.exp(-1.0 / 6250.0))

    def test_every_scheme_constructible(self):
        topo = TopologyConfig(n_flows=10)
        for name in SCHEMES:
            scheme = build_scheme(name, resolved_params(name, {}, topo), topo)
            assert scheme.name == name

    def test_pie_gains_above_one_allowed(self):
        topo = TopologyConfig(n_flows=10)
        params = resolved_params("pie", {"beta": 1.25}, topo)
        assert params["beta"] == 1.25

    def test_adaptive_gains_capped_at_one(self):
        topo = TopologyConfig(n_flows=10)
        with pytest.raises(SpecError, match="alpha"):
            resolved_params("dbetared", {"alpha": 1.5}, topo)


class TestRunAndEmit:
    def test_grid_shape_and_output_files(self, tmp_path):
        spec = tiny_spec()
        spec.sweep = (("p_max", (0.05, 0.2)),)
        results = run_experiment(spec)
        assert len(results) == 4  # 2 sweep values x 2 seeds
        keys = [(r.sweep_point, r.seed) for r in results]
        assert keys == [
            ((("p_max", 0.05),), 1),
            ((("p_max", 0.05),), 2),
            ((("p_max", 0.2),), 1),
            ((("p_max", 0.2),), 2),
        ]
        written = emit_outputs(results, tmp_path / "out")
        names = sorted(p.name for p in written)
        assert names.count("metrics.csv") == 1
        assert sum(n.startswith("queue_trace__") for n in names) == 4
        assert sum(n.startswith("moving_average__") for n in names) == 4
        header = (tmp_path / "out" / "metrics.csv").read_text().splitlines()[0]
        assert header.startswith("aqm,scenario,sweep,seed,sent,delivered,dropped,aql")

    def test_mean_rows_follow_seed_groups(self, tmp_path):
        spec = tiny_spec()
        results = run_experiment(spec)
        emit_outputs(results, tmp_path / "out")
        lines = (tmp_path / "out" / "metrics.csv").read_text().splitlines()
        seeds = [line.split(",")[3] for line in lines[1:]]
        assert seeds == ["1", "2", "mean"]

    def test_identical_spec_identical_bytes(self, tmp_path):
        for sub in ("a", "b"):
            spec = tiny_spec(out_dir=str(tmp_path / sub))
            execute(spec)
        a, b = tmp_path / "a", tmp_path / "b"
        files_a = sorted(p.name for p in a.iterdir())
        assert files_a == sorted(p.name for p in b.iterdir())
        for name in files_a:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_scenario2_uses_peak_flows(self, tmp_path):
        spec = tiny_spec(scenario=2, n_max=4, s2_base=1, s2_interval=0.5, duration=2.5,
                         seeds=(1,))
        results = run_experiment(spec)
        assert len(results) == 1
        assert results[0].trace.sent > 0


class TestCli:
    def test_smoke_config_runs_and_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "smoke_out"
        assert cli_main(["--config", str(SMOKE), "--out", str(out)]) == 0
        assert (out / "metrics.csv").exists()
        captured = capsys.readouterr()
        assert "metrics table" in captured.out

    def test_flag_overrides(self, tmp_path):
        out = tmp_path / "cli_out"
        rc = cli_main(
            [
                "--config", str(SMOKE),
                "--aqm", "red",
                "--duration", "5",
                "--seed", "3",
                "--out", str(out),
            ]
        )
        assert rc == 0
        metrics = (out / "metrics.csv").read_text()
        assert "\nred,1," in metrics
        assert ",3," in metrics

    def test_bad_value_exits_nonzero(self, tmp_path, capsys):
        rc = cli_main(
            ["--config", str(SMOKE), "--set", "theta=1.5", "--out", str(tmp_path / "x")]
        )
        assert rc == 2
        assert "theta" in capsys.readouterr().err

    def test_unknown_scheme_exits_nonzero(self, tmp_path, capsys):
        rc = cli_main(["--aqm", "nosuch", "--out", str(tmp_path / "x")])
        assert rc == 2
        assert "aqm" in capsys.readouterr().err
