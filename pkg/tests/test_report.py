import numpy as np
import pytest

from fairord.core import FairnessNotion
from fairord.pipeline import FrontierPoint, MixturePoint
from fairord.report import (
    convergence_csv, convergence_figure, frontier_csv, frontier_figure,
    mixture_csv, mixture_figure, simulation_csv, simulation_figure,
    write_json)
from fairord.simulate import (
    ConvergenceResult, ConvergenceRow, SimulationResult, SimulationRow)


def frontier_points():
    return [
        FrontierPoint(mu_lambda=0.0, model=None, train_cost=0.5,
                      train_violation=0.4, test_cost=0.6, test_violation=0.45,
                      scorer_gap=0.3, seed=0),
        FrontierPoint(mu_lambda=0.5, model=None, train_cost=0.7,
                      train_violation=0.1, test_cost=0.8, test_violation=0.15,
                      scorer_gap=0.05, seed=0),
    ]


def simulation_result():
    rows = (SimulationRow(arrangement=(0, 1), scorer_violation=1.0,
                          fair_fraction=0.5, multiplicity=2),
            SimulationRow(arrangement=(1, 0), scorer_violation=0.25,
                          fair_fraction=0.75, multiplicity=1))
    return SimulationResult(notion=FairnessNotion.PAIRWISE_DP, n=2, k=2,
                            num_placements=3, rows=rows, spearman=-1.0)


def convergence_result():
    rows = (ConvergenceRow(n=100, mean_deviation=0.12,
                           quantile_deviation=0.2),
            ConvergenceRow(n=400, mean_deviation=0.06,
                           quantile_deviation=0.1))
    return ConvergenceResult(notion=FairnessNotion.PAIRWISE_DP, delta=0.05,
                             repetitions=50, population_violation=0.3,
                             rows=rows)


class TestDelimited:
    def test_frontier_csv_layout(self, tmp_path):
        path = frontier_csv(tmp_path / "frontier.csv", frontier_points())
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "mu_lambda,split,cost,violation,scorer_gap,seed"
        assert lines[1] == "0.0,train,0.5,0.4,0.3,0"
        assert lines[2] == "0.0,test,0.6,0.45,0.3,0"
        assert len(lines) == 5

    def test_mixture_csv_layout(self, tmp_path):
        points = [MixturePoint(p=0.0, cost=0.9, violation=0.5),
                  MixturePoint(p=1.0, cost=1.2, violation=0.0)]
        path = mixture_csv(tmp_path / "mixture.csv", points)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines == ["p,cost,violation", "0.0,0.9,0.5", "1.0,1.2,0.0"]

    def test_simulation_csv_layout(self, tmp_path):
        path = simulation_csv(tmp_path / "sim.csv", simulation_result())
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "scorer_violation,fair_fraction,multiplicity"
        assert lines[1] == "1.0,0.5,2"

    def test_convergence_csv_layout(self, tmp_path):
        path = convergence_csv(tmp_path / "conv.csv", convergence_result())
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "n,mean_deviation,quantile_deviation"
        assert lines[1] == "100,0.12,0.2"

    def test_write_json_sorted_and_newline_terminated(self, tmp_path):
        path = write_json(tmp_path / "r.json", {"b": 1, "a": [1.5, 2]})
        text = path.read_text(encoding="utf-8")
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("}\n")

    def test_float_cells_round_trip(self, tmp_path):
        value = 1.0 / 3.0
        points = [MixturePoint(p=value, cost=value * 2, violation=value)]
        path = mixture_csv(tmp_path / "m.csv", points)
        cell = path.read_text(encoding="utf-8").splitlines()[1].split(",")[0]
        assert float(cell) == value


class TestFigures:
    @pytest.mark.parametrize("render,payload", [
        (frontier_figure, frontier_points()),
        (mixture_figure, [MixturePoint(p=i / 4, cost=1 - i / 8,
                                       violation=i / 5) for i in range(5)]),
        (simulation_figure, simulation_result()),
        (convergence_figure, convergence_result()),
    ])
    def test_renders_nonempty_png(self, tmp_path, render, payload):
        path = render(tmp_path / "fig.png", payload)
        blob = path.read_bytes()
        assert blob[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(blob) > 2000

    def test_png_bytes_reproducible(self, tmp_path):
        first = frontier_figure(tmp_path / "a.png", frontier_points())
        second = frontier_figure(tmp_path / "b.png", frontier_points())
        assert first.read_bytes() == second.read_bytes()

    def test_train_only_frontier_renders(self, tmp_path):
        points = [FrontierPoint(mu_lambda=0.0, model=None, train_cost=0.5,
                                train_violation=0.4, test_cost=None,
                                test_violation=None, scorer_gap=0.3, seed=0)]
        path = frontier_figure(tmp_path / "fig.png", points)
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
