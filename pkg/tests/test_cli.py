import csv
import dataclasses
import io
from pathlib import Path

import numpy as np
import pytest

from irs_secrecy.cli import (
    ExperimentSpec,
    format_config,
    main,
    parse_config,
    parse_config_text,
    realizations_path,
    run_experiment,
    run_realizations,
    summarize,
)
from irs_secrecy.errors import ConfigError
from irs_secrecy.optimizer import OptimizerConfig
from irs_secrecy.scenario import ScenarioConfig

EXPERIMENTS = Path(__file__).resolve().parent.parent / "experiments"

TINY_SWEEP = """
[scenario]
M = 3
N = 4
K = 2
J = 2
seed = 5

[optimizer]
outer_max_iter = 4
inner_max_iter_a1 = 5
inner_max_iter_a2 = 5
tuner_max_iter = 5

[experiment]
kind = PowerSweep
sweep_values = -40, -38, -36, -34, -32, -30, -28, -26, -24, -22, -20
algorithms = TwoTiers, Ref1
n_realizations = 4
"""

TINY_TRACE = """
[scenario]
M = 3
N = 6
K = 2
J = 2
p_max_db = 0
seed = 3

[optimizer]
outer_max_iter = 8

[experiment]
kind = ConvergenceTrace
algorithms = TwoTiers:MM, TwoTiers:BCD, SingleLoop
n_realizations = 2
"""


def write(tmp_path: Path, text: str, name: str = "exp.ini") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


def read_rows(path: Path) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(path.read_text())))


def without_runtime(text: str) -> list[list[str]]:
    rows = list(csv.reader(io.StringIO(text)))
    drop = [i for i, name in enumerate(rows[0]) if "runtime" in name or name.endswith("_ms")]
    return [[v for i, v in enumerate(row) if i not in drop] for row in rows]


# --------------------------------------------------------------------------- config parsing


def test_empty_config_gives_defaults():
    scenario, optimizer, spec = parse_config_text("")
    assert scenario == ScenarioConfig()
    assert optimizer == OptimizerConfig()
    assert spec == ExperimentSpec()


def test_unknown_key_names_field():
    with pytest.raises(ConfigError) as info:
        parse_config_text("[scenario]\nM = 4\nbogus = 1\n")
    assert info.value.field == "scenario.bogus" and info.value.line == 3
    assert "bogus" in str(info.value)


@pytest.mark.parametrize(
    "text, field",
    [
        ("[nowhere]\nx = 1\n", "nowhere"),
        ("[scenario]\nM = four\n", "scenario.M"),
        ("[scenario]\nD = -1\n", "scenario"),
        ("[optimizer]\ntuner = SDR\n", "optimizer"),
        ("[experiment]\nsweep_values = 3, 1\n", "experiment"),
        ("[experiment]\nalgorithms = TwoTiers, Nope\n", "experiment"),
        ("[experiment]\nkind = QuantSweep\nsweep_values = 0, 17\n", "experiment"),
    ],
)
def test_invalid_values_raise_config_error(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.field == field


def test_format_round_trip():
    spec = ExperimentSpec(
        kind="IrsSweep", sweep_values=(16.0, 32.0), algorithms=("TwoTiers:BCD", "Ref2"),
        n_realizations=3, output_path="out/x.csv", quant_retune=True,
        scenario=ScenarioConfig(M=5, D=17.5, noise_db=-140.25, seed=99),
        optimizer=OptimizerConfig(mode="SingleLoop", outer_rel_tol=3e-7, bcd_jacobi=True),
    )
    assert parse_config_text(format_config(spec))[2] == spec
    assert parse_config_text(format_config(ExperimentSpec()))[2] == ExperimentSpec()


@pytest.mark.parametrize("path", sorted(EXPERIMENTS.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_experiments_parse(path):
    _, _, spec = parse_config(path)
    assert spec.n_realizations_full >= spec.n_realizations


# --------------------------------------------------------------------------- running


def test_power_sweep_row_count(tmp_path):
    path = write(tmp_path, TINY_SWEEP)
    out = tmp_path / "sweep.csv"
    assert main(["run", str(path), "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 22
    assert list(rows[0]) == ["sweep_param", "algorithm", "mean_wssr", "stderr_wssr",
                             "mean_runtime_ms", "n_realizations"]
    assert {r["n_realizations"] for r in rows} == {"4"}
    assert len(read_rows(realizations_path(out))) == 22 * 4


def test_summary_csv_parses_back(tmp_path):
    _, _, spec = parse_config(write(tmp_path, TINY_SWEEP))
    out = tmp_path / "sweep.csv"
    rows = run_experiment(spec, n_realizations=2, output=out)
    for row, parsed in zip(rows, read_rows(out)):
        assert abs(float(parsed["mean_wssr"]) - row.mean_wssr) <= 1e-9 * max(1.0, row.mean_wssr)
        assert abs(float(parsed["stderr_wssr"]) - row.stderr_wssr) <= 1e-9 * max(1.0, row.stderr_wssr)
        assert float(parsed["sweep_param"]) == row.sweep_value


def test_identical_runs_give_identical_csv(tmp_path):
    _, _, spec = parse_config(write(tmp_path, TINY_SWEEP))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_experiment(spec, n_realizations=2, output=a)
    run_experiment(spec, n_realizations=2, output=b)
    assert without_runtime(a.read_text()) == without_runtime(b.read_text())
    assert without_runtime(realizations_path(a).read_text()) == without_runtime(
        realizations_path(b).read_text())


def test_parallel_matches_serial(tmp_path):
    _, _, spec = parse_config(write(tmp_path, TINY_SWEEP))
    spec = dataclasses.replace(spec, sweep_values=(-30.0, -20.0))
    serial = run_realizations(spec, 3, jobs=1)
    parallel = run_realizations(spec, 3, jobs=2)
    assert [(r.sweep_value, r.algorithm, r.realization, r.wssr) for r in serial] == [
        (r.sweep_value, r.algorithm, r.realization, r.wssr) for r in parallel]


def test_convergence_trace_columns_monotone(tmp_path):
    out = tmp_path / "trace.csv"
    assert main(["trace", str(write(tmp_path, TINY_TRACE)), "--out", str(out)]) == 0
    rows = read_rows(out)
    assert list(rows[0]) == ["iter", "TwoTiers:MM", "TwoTiers:MM_ms", "TwoTiers:BCD",
                             "TwoTiers:BCD_ms", "SingleLoop", "SingleLoop_ms"]
    assert [int(r["iter"]) for r in rows] == list(range(1, len(rows) + 1))
    for column in ("TwoTiers:MM", "TwoTiers:BCD", "SingleLoop"):
        values = np.array([float(r[column]) for r in rows])
        assert np.all(np.diff(values) >= -1e-9)


QUANT_SWEEP = TINY_SWEEP.replace("kind = PowerSweep", "kind = QuantSweep").replace(
    "sweep_values = -40, -38, -36, -34, -32, -30, -28, -26, -24, -22, -20", "sweep_values = 0, 1, 16"
).replace("algorithms = TwoTiers, Ref1", "algorithms = TwoTiers")


def quant_rates(tmp_path, retune: bool) -> dict[int, np.ndarray]:
    text = QUANT_SWEEP + f"quant_retune = {str(retune).lower()}\n"
    _, _, spec = parse_config(write(tmp_path, text))
    results = run_realizations(spec, 2)
    assert len(summarize(spec, results)) == 3
    return {b: np.array([r.wssr for r in results if r.sweep_value == b]) for b in (0, 1, 16)}


def test_quant_sweep_without_retune_keeps_precoder(tmp_path):
    rates = quant_rates(tmp_path, retune=False)
    np.testing.assert_allclose(rates[16], rates[0], rtol=1e-3)


def test_quant_sweep_retune_recovers_rate(tmp_path):
    fixed = quant_rates(tmp_path, retune=False)
    retuned = quant_rates(tmp_path, retune=True)
    np.testing.assert_array_equal(retuned[0], fixed[0])
    # Re-optimizing the precoder at the deployed phases cannot do worse than keeping it.
    assert np.all(retuned[1] >= fixed[1] - 1e-9)


def test_runtime_scaling_runs_fixed_iterations(tmp_path):
    text = TINY_SWEEP.replace("kind = PowerSweep", "kind = RuntimeScaling").replace(
        "sweep_values = -40, -38, -36, -34, -32, -30, -28, -26, -24, -22, -20", "sweep_values = 2, 4"
    )
    _, _, spec = parse_config(write(tmp_path, text))
    results = run_realizations(spec, 1)
    assert all(len(r.trace) == 4 for r in results if r.algorithm == "TwoTiers")


# --------------------------------------------------------------------------- entry point


def test_bad_key_exits_with_code_two(tmp_path, capsys):
    path = write(tmp_path, "[optimizer]\nouter_max_itr = 3\n")
    assert main(["run", str(path)]) == 2
    assert "outer_max_itr" in capsys.readouterr().err


def test_missing_file_exits_nonzero(tmp_path):
    assert main(["run", str(tmp_path / "absent.ini")]) != 0


def test_validate_prints_resolved_config(tmp_path, capsys):
    assert main(["validate", str(write(tmp_path, TINY_SWEEP))]) == 0
    spec = parse_config_text(capsys.readouterr().out)[2]
    assert spec.scenario.M == 3 and spec.algorithms == ("TwoTiers", "Ref1")


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    assert "outer_max_iter = 30" in text and "p_max_db = -30.0" in text


def test_invalid_override_exits_with_code_two(tmp_path):
    path = write(tmp_path, TINY_SWEEP)
    assert main(["run", str(path), "--algorithms", "Nope"]) == 2
    assert main(["run", str(path), "--jobs", "0"]) == 2
