import json

import numpy as np
import pytest

from cobo import bench, bo, cli
from cobo.errors import UnknownMethod, UnknownProblem

TINY_LOOP = bo.LoopConfig(ensemble_size=2, ensemble_burnin=5, sga_restarts=2, sga_steps=15,
                          sga_grad_samples=32, sga_ranking_samples=256, recommend_samples=256,
                          recommend_search_samples=128, classical_restarts=1, cma_generations=40)


def _tiny_config(out_dir, **overrides):
    base = dict(problems=("langermann",), methods=("random",), replications=2, budget=3,
                master_seed=1, out_dir=str(out_dir), loop=TINY_LOOP)
    base.update(overrides)
    return bench.BenchConfig(**base)


class TestRunBench:
    def test_row_count_contract(self, tmp_path):
        cfg = _tiny_config(tmp_path, problems=("rosenbrock5",), replications=2, budget=3)
        paths = bench.run_bench(cfg)
        lines = paths["runs"][("rosenbrock5", "random")].read_text().splitlines()
        assert lines[0] == "# schema: cobo-regret-v1"
        assert lines[1] == ",".join(bench.REGRET_COLUMNS)
        data = lines[2:]
        assert len(data) == 2 * (3 + 1)
        iterations = [int(row.split(",")[3]) for row in data]
        assert iterations == [0, 1, 2, 3, 0, 1, 2, 3]

    def test_single_replication_half_width_zero_and_flagged(self, tmp_path):
        cfg = _tiny_config(tmp_path, replications=1, budget=1)
        paths = bench.run_bench(cfg)
        agg = paths["aggregate"].read_text().splitlines()
        assert agg[0] == "# schema: cobo-aggregate-v1"
        for row in agg[2:]:
            fields = row.split(",")
            assert float(fields[4]) == 0.0
            assert fields[5] == "1"
        manifest = json.loads(paths["manifest"].read_text())
        assert manifest["degenerate_half_width"] is True

    def test_rerun_byte_identical(self, tmp_path):
        a = bench.run_bench(_tiny_config(tmp_path / "a"))
        b = bench.run_bench(_tiny_config(tmp_path / "b"))
        for key in a["runs"]:
            assert a["runs"][key].read_bytes() == b["runs"][key].read_bytes()
        assert a["aggregate"].read_bytes() == b["aggregate"].read_bytes()

    def test_worker_pool_matches_serial(self, tmp_path):
        serial = bench.run_bench(_tiny_config(tmp_path / "s", budget=1))
        parallel = bench.run_bench(_tiny_config(tmp_path / "p", budget=1, jobs=2))
        for key in serial["runs"]:
            assert serial["runs"][key].read_bytes() == parallel["runs"][key].read_bytes()

    def test_manifest_records_config_seeds_and_optima(self, tmp_path):
        cfg = _tiny_config(tmp_path, budget=1)
        paths = bench.run_bench(cfg)
        manifest = json.loads(paths["manifest"].read_text())
        assert manifest["config"]["budget"] == 1
        assert manifest["problems"]["langermann"]["f_max_true"] == pytest.approx(4.155809291847786)
        assert manifest["timing_suppressed"] is True
        expected_seed = bench.derive_seed(1, "langermann", "random", 0)
        assert manifest["seeds"]["langermann|random|0"] == expected_seed

    def test_unknown_names_rejected(self, tmp_path):
        with pytest.raises(UnknownProblem):
            _tiny_config(tmp_path, problems=("nosuch",))
        with pytest.raises(UnknownMethod):
            _tiny_config(tmp_path, methods=("simulated_annealing",))

    def test_log10_floor(self):
        assert bench.log10_regret(0.0) == pytest.approx(-12.0)
        assert bench.log10_regret(1e-15) == pytest.approx(-12.0)
        assert bench.log10_regret(100.0) == pytest.approx(2.0)


class TestCli:
    def test_parse_valid_bench(self):
        cfg = cli.cli_parse(["bench", "--problem", "rosenbrock5", "--method", "ei_cf,ei",
                             "--reps", "10", "--budget", "40", "--seed", "1",
                             "--out", "results/"])
        assert cfg.problems == ("rosenbrock5",)
        assert cfg.methods == ("ei_cf", "ei")
        assert cfg.replications == 10
        assert cfg.budget == 40
        assert cfg.master_seed == 1
        assert cfg.out_dir == "results/"

    def test_hyper_samples_default_is_ten(self):
        cfg = cli.cli_parse(["bench", "--problem", "langermann", "--method", "random",
                             "--out", "x"])
        assert cfg.loop.ensemble_size == 10

    def test_run_unknown_problem_exits_2(self, capsys):
        assert cli.main(["run", "--problem", "nosuch"]) == 2
        assert "unknown problem" in capsys.readouterr().err

    def test_unknown_method_exits_2(self, capsys):
        assert cli.main(["run", "--problem", "langermann", "--method", "foo"]) == 2

    def test_unknown_flag_exits_2(self, capsys):
        assert cli.main(["bench", "--problem", "x", "--method", "y", "--out", "z",
                         "--frobnicate"]) == 2

    def test_missing_subcommand_exits_2(self, capsys):
        assert cli.main([]) == 2

    def test_list_problems(self, capsys):
        assert cli.main(["list-problems"]) == 0
        out = capsys.readouterr().out
        for name in ("langermann", "rosenbrock5", "environmental", "gp1", "gp2"):
            assert name in out

    def test_run_prints_trace(self, capsys):
        rc = cli.main(["run", "--problem", "langermann", "--method", "random",
                       "--budget", "1", "--hyper-samples", "2"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "iter=  0" in out and "iter=  1" in out
        assert "regret=" in out
