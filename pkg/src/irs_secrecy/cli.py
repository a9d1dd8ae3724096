"""Experiment runner: parameter sweeps, convergence traces and timing runs.

Experiments are described by an INI file with three optional sections::

    [scenario]      ScenarioConfig fields (geometry, powers, dimensions, seed)
    [optimizer]     OptimizerConfig fields (budgets, tolerances, tuner)
    [experiment]    kind, sweep_values, algorithms, n_realizations, ...

Every realization draws one channel set and runs every requested algorithm
on it. Results are averaged per sweep value and written as CSV.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .channel import wssr
from .errors import ConfigError, IrsSecrecyError
from .optimizer import OptimizerConfig, RunTrace, precoder_only, single_loop, two_tiers
from .scenario import (
    ScenarioConfig,
    baseline_ref1,
    baseline_ref2,
    mean_and_stderr,
    quantize_phases,
    realization_seeds,
    sample_channels,
)

# Scenario field swept by each experiment kind; None means no sweep.
SWEPT_FIELD: dict[str, str | None] = {
    "PowerSweep": "p_max_db",
    "IrsSweep": "N",
    "AntennaSweep": "M",
    "EveSweep": "J",
    "UserSweep": "K",
    "QuantSweep": None,
    "ConvergenceTrace": None,
    "RuntimeScaling": "N",
}
KINDS = tuple(SWEPT_FIELD)
ALGORITHMS = ("TwoTiers", "SingleLoop", "Ref1", "Ref2")
TUNED_ALGORITHMS = ("TwoTiers", "SingleLoop")
SUMMARY_HEADER = (
    "sweep_param", "algorithm", "mean_wssr", "stderr_wssr", "mean_runtime_ms", "n_realizations",
)
REALIZATION_HEADER = ("sweep_param", "algorithm", "realization", "seed", "wssr", "runtime_ms")


def fmt(x: float) -> str:
    """Fixed 12-significant-digit formatting used in every CSV."""
    return f"{x:.12g}"


def split_algorithm(name: str) -> tuple[str, str | None]:
    """``"TwoTiers:BCD"`` becomes ``("TwoTiers", "BCD")``; no suffix gives ``None``."""
    base, _, tuner = name.partition(":")
    return base, (tuner or None)


def _check_algorithm(name: str) -> None:
    base, tuner = split_algorithm(name)
    if base not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
    if tuner is not None:
        if base not in TUNED_ALGORITHMS:
            raise ValueError(f"algorithm {base} takes no tuner suffix")
        if tuner not in ("MM", "BCD"):
            raise ValueError(f"unknown tuner suffix {tuner!r} in {name!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: what to sweep, which algorithms, how many realizations.

    For ``QuantSweep`` the sweep values are phase resolutions in bits and
    ``0`` stands for unquantized phases. With ``quant_retune`` the precoder is
    re-optimized at the quantized phases; otherwise the rate is evaluated with
    the precoder found for the unquantized ones. ``ConvergenceTrace`` ignores the
    sweep values. The scenario seed is the master seed of the realizations.
    """

    kind: str = "PowerSweep"
    sweep_values: tuple[float, ...] = (-40.0, -35.0, -30.0, -25.0, -20.0)
    algorithms: tuple[str, ...] = ALGORITHMS
    n_realizations: int = 10
    n_realizations_full: int = 100
    output_path: str = "results.csv"
    quant_retune: bool = True
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.sweep_values:
            raise ValueError("sweep_values must be non-empty")
        if any(b <= a for a, b in zip(self.sweep_values, self.sweep_values[1:])):
            raise ValueError("sweep_values must be strictly increasing")
        if not self.algorithms:
            raise ValueError("algorithms must be non-empty")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ValueError("algorithms must not repeat")
        for name in self.algorithms:
            _check_algorithm(name)
        if self.n_realizations < 1 or self.n_realizations_full < 1:
            raise ValueError("realization counts must be >= 1")
        swept = SWEPT_FIELD[self.kind]
        integer_sweep = self.kind == "QuantSweep" or (
            swept is not None and isinstance(getattr(self.scenario, swept), int)
        )
        if integer_sweep and any(v != int(v) for v in self.sweep_values):
            raise ValueError(f"{self.kind} needs integer sweep_values")
        if self.kind == "QuantSweep":
            if any(not 0 <= v <= 16 for v in self.sweep_values):
                raise ValueError("QuantSweep bits must lie in [0, 16]; 0 means unquantized")
            if any(split_algorithm(a)[0] not in TUNED_ALGORITHMS for a in self.algorithms):
                raise ValueError("QuantSweep supports TwoTiers and SingleLoop only")
        for value in self.sweep_values if swept else ():
            self.scenario_at(value)

    def scenario_at(self, value: float) -> ScenarioConfig:
        """Scenario with the swept field set to ``value``."""
        swept = SWEPT_FIELD[self.kind]
        if swept is None:
            return self.scenario
        current = getattr(self.scenario, swept)
        return dataclasses.replace(self.scenario, **{swept: type(current)(value)})

    def optimizer_for_kind(self) -> OptimizerConfig:
        if self.kind == "RuntimeScaling":
            return dataclasses.replace(self.optimizer, fixed_iterations=True)
        return self.optimizer


# --------------------------------------------------------------------------- config


_EXPERIMENT_KEYS = {
    "kind": "kind",
    "sweep_values": "sweep_values",
    "algorithms": "algorithms",
    "n_realizations": "n_realizations",
    "n_realizations_full": "n_realizations_full",
    "output": "output_path",
    "quant_retune": "quant_retune",
}


def _parse_bool(text: str) -> bool:
    value = configparser.ConfigParser.BOOLEAN_STATES.get(text.strip().lower())
    if value is None:
        raise ValueError(f"not a boolean: {text!r}")
    return value


def _coerce(text: str, default: Any) -> Any:
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text.strip()


def _list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """Line number of every ``key = value`` entry, per section."""
    lines: dict[tuple[str, str], int] = {}
    section = ""
    for number, line in enumerate(text.splitlines(), start=1):
        header = re.match(r"\s*\[([^\]]+)\]", line)
        if header:
            section = header.group(1).strip()
            continue
        entry = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
        if entry:
            lines.setdefault((section, entry.group(1)), number)
    return lines


def parse_config_text(text: str) -> tuple[ScenarioConfig, OptimizerConfig, ExperimentSpec]:
    """Parse and validate an experiment description; missing keys keep defaults."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # type: ignore[assignment]
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from exc
    lines = _key_lines(text)

    for section in parser.sections():
        if section not in ("scenario", "optimizer", "experiment"):
            raise ConfigError(f"unknown section [{section}]", field=section)

    def values_for(section: str, allowed: dict[str, str], defaults: Any) -> dict[str, Any]:
        out: dict[str, Any] = {}
        if not parser.has_section(section):
            return out
        for key, raw in parser.items(section):
            where = f"{section}.{key}"
            line = lines.get((section, key))
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{section}]", field=where, line=line)
            name = allowed[key]
            try:
                if name == "sweep_values":
                    out[name] = tuple(float(v) for v in _list(raw))
                elif name == "algorithms":
                    out[name] = tuple(_list(raw))
                else:
                    out[name] = _coerce(raw, getattr(defaults, name))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", field=where, line=line) from exc
        return out

    def build(cls: type, kwargs: dict[str, Any], section: str) -> Any:
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {exc}", field=section) from exc

    scenario_fields = {f.name: f.name for f in dataclasses.fields(ScenarioConfig)}
    optimizer_fields = {f.name: f.name for f in dataclasses.fields(OptimizerConfig)}
    scenario = build(ScenarioConfig, values_for("scenario", scenario_fields, ScenarioConfig()), "scenario")
    optimizer = build(OptimizerConfig, values_for("optimizer", optimizer_fields, OptimizerConfig()), "optimizer")
    experiment = values_for("experiment", _EXPERIMENT_KEYS, ExperimentSpec())
    spec = build(ExperimentSpec, dict(experiment, scenario=scenario, optimizer=optimizer), "experiment")
    return scenario, optimizer, spec


def parse_config(path: str | Path) -> tuple[ScenarioConfig, OptimizerConfig, ExperimentSpec]:
    """Read an INI file; unknown sections or keys raise :class:`ConfigError`."""
    return parse_config_text(Path(path).read_text())


def _ini_value(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_ini_value(v) for v in value)
    return str(value)


def format_config(spec: ExperimentSpec) -> str:
    """INI text that :func:`parse_config_text` maps back to ``spec``."""
    out = ["[scenario]"]
    out += [f"{f.name} = {_ini_value(getattr(spec.scenario, f.name))}"
            for f in dataclasses.fields(ScenarioConfig)]
    out += ["", "[optimizer]"]
    out += [f"{f.name} = {_ini_value(getattr(spec.optimizer, f.name))}"
            for f in dataclasses.fields(OptimizerConfig)]
    out += ["", "[experiment]"]
    out += [f"{key} = {_ini_value(getattr(spec, name))}" for key, name in _EXPERIMENT_KEYS.items()]
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------- running


def run_algorithm(
    name: str,
    cs: Any,
    weights: np.ndarray,
    p_max: float,
    cfg: OptimizerConfig,
    seed: int,
) -> RunTrace:
    """Run one named algorithm; ``seed`` drives its random initial or fixed phases."""
    base, tuner = split_algorithm(name)
    cfg = dataclasses.replace(cfg, seed=seed, tuner=tuner or cfg.tuner)
    if base == "TwoTiers":
        return two_tiers(cs, weights, p_max, cfg)
    if base == "SingleLoop":
        return single_loop(cs, weights, p_max, cfg)
    if base == "Ref1":
        return baseline_ref1(cs, weights, p_max, cfg)
    return baseline_ref2(cs, weights, p_max, cfg, np.random.default_rng(seed))


@dataclass(frozen=True)
class _Task:
    spec: ExperimentSpec
    sweep_value: float | None
    algorithm: str
    realization: int
    seed: int


@dataclass(frozen=True)
class RealizationResult:
    sweep_value: float
    algorithm: str
    realization: int
    seed: int
    wssr: float
    runtime_ms: float
    trace: tuple[float, ...] = ()
    trace_ms: tuple[float, ...] = ()


def _stream_seeds(seed: int) -> tuple[int, int]:
    """Independent channel and algorithm seeds for one realization."""
    state = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def _run_task(task: _Task) -> list[RealizationResult]:
    spec = task.spec
    sweep_value = task.sweep_value
    scenario = spec.scenario if sweep_value is None else spec.scenario_at(sweep_value)
    channel_seed, algo_seed = _stream_seeds(task.seed)
    cs = sample_channels(scenario, np.random.default_rng(channel_seed))
    weights = np.ones(scenario.K)
    cfg = spec.optimizer_for_kind()
    start = time.perf_counter()
    trace = run_algorithm(task.algorithm, cs, weights, scenario.p_max, cfg, algo_seed)
    ms = 1e3 * (time.perf_counter() - start)

    def result(value: float, wssr_value: float) -> RealizationResult:
        return RealizationResult(value, task.algorithm, task.realization, task.seed, wssr_value, ms,
                                 tuple(trace.wssr), tuple(np.cumsum(trace.wall_ms)))

    if spec.kind != "QuantSweep":
        return [result(0.0 if sweep_value is None else sweep_value, trace.final_wssr)]
    out = []
    for bits in spec.sweep_values:
        if bits == 0:
            out.append(result(bits, trace.final_wssr))
            continue
        phi_q = quantize_phases(trace.final_phi, int(bits))
        if spec.quant_retune:
            value = precoder_only(cs, weights, scenario.p_max, cfg, phi_q, trace.final_W).final_wssr
        else:
            value = wssr(cs, trace.final_W, phi_q, weights)
        out.append(result(bits, value))
    return out


def _tasks(spec: ExperimentSpec, n_realizations: int) -> list[_Task]:
    seeds = realization_seeds(spec.scenario.seed, n_realizations)
    per_sweep = spec.kind in ("QuantSweep", "ConvergenceTrace")
    sweep: Sequence[float | None] = [None] if per_sweep else list(spec.sweep_values)
    return [
        _Task(spec, value, algorithm, r, seed)
        for value in sweep
        for algorithm in spec.algorithms
        for r, seed in enumerate(seeds)
    ]


def run_realizations(
    spec: ExperimentSpec, n_realizations: int | None = None, jobs: int = 1
) -> list[RealizationResult]:
    """Run every (sweep value, algorithm, realization) combination.

    Results come back sorted by sweep value, algorithm order and realization
    index, whatever the number of workers.
    """
    n = spec.n_realizations if n_realizations is None else n_realizations
    tasks = _tasks(spec, n)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    results = [r for chunk in chunks for r in chunk]
    order = {a: i for i, a in enumerate(spec.algorithms)}
    return sorted(results, key=lambda r: (r.sweep_value, order[r.algorithm], r.realization))


@dataclass(frozen=True)
class SummaryRow:
    sweep_value: float
    algorithm: str
    mean_wssr: float
    stderr_wssr: float
    mean_runtime_ms: float
    n_realizations: int


def summarize(spec: ExperimentSpec, results: Sequence[RealizationResult]) -> list[SummaryRow]:
    rows = []
    keys = dict.fromkeys((r.sweep_value, r.algorithm) for r in results)
    for value, algorithm in keys:
        group = [r for r in results if r.sweep_value == value and r.algorithm == algorithm]
        mean, se = mean_and_stderr([r.wssr for r in group])
        runtime = float(np.mean([r.runtime_ms for r in group]))
        rows.append(SummaryRow(value, algorithm, mean, se, runtime, len(group)))
    return rows


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for r in rows:
        writer.writerow([fmt(r.sweep_value), r.algorithm, fmt(r.mean_wssr), fmt(r.stderr_wssr),
                         fmt(r.mean_runtime_ms), r.n_realizations])
    return buf.getvalue()


def realizations_csv(results: Sequence[RealizationResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REALIZATION_HEADER)
    for r in results:
        writer.writerow([fmt(r.sweep_value), r.algorithm, r.realization, r.seed, fmt(r.wssr),
                         fmt(r.runtime_ms)])
    return buf.getvalue()


def _padded_mean(series: Sequence[Sequence[float]]) -> np.ndarray:
    """Mean over runs, each padded with its final value to the longest length."""
    length = max(len(s) for s in series)
    padded = [list(s) + [s[-1]] * (length - len(s)) for s in series if s]
    return np.mean(np.array(padded), axis=0)


def trace_csv(spec: ExperimentSpec, results: Sequence[RealizationResult]) -> str:
    """Per-iteration CSV: ``iter`` then mean objective and mean elapsed ms per algorithm.

    Runs that stop early are padded with their final value, so each column
    stays non-decreasing when every run is.
    """
    columns: list[tuple[str, np.ndarray]] = []
    for algorithm in spec.algorithms:
        group = [r for r in results if r.algorithm == algorithm]
        columns.append((algorithm, _padded_mean([r.trace for r in group])))
        columns.append((f"{algorithm}_ms", _padded_mean([r.trace_ms for r in group])))
    length = max(len(c) for _, c in columns)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iter"] + [name for name, _ in columns])
    for i in range(length):
        row = [str(i + 1)]
        for _, col in columns:
            row.append(fmt(col[min(i, len(col) - 1)]))
        writer.writerow(row)
    return buf.getvalue()


def realizations_path(output: Path) -> Path:
    return output.with_name(output.stem + ".realizations.csv")


def run_experiment(
    spec: ExperimentSpec,
    n_realizations: int | None = None,
    jobs: int = 1,
    output: str | Path | None = None,
) -> list[SummaryRow]:
    """Run an experiment and write its CSV files.

    Sweep kinds write the summary table to ``output`` and the per-realization
    values next to it; ``ConvergenceTrace`` writes the per-iteration table.
    """
    path = Path(spec.output_path if output is None else output)
    results = run_realizations(spec, n_realizations, jobs)
    rows = summarize(spec, results)
    path.parent.mkdir(parents=True, exist_ok=True)
    if spec.kind == "ConvergenceTrace":
        path.write_text(trace_csv(spec, results))
    else:
        path.write_text(summary_csv(rows))
        realizations_path(path).write_text(realizations_csv(results))
    return rows


# --------------------------------------------------------------------------- entry point


def _defaults_epilog() -> str:
    spec = ExperimentSpec()
    lines = ["configuration keys and defaults:"]
    for section, obj, names in (
        ("scenario", spec.scenario, [f.name for f in dataclasses.fields(ScenarioConfig)]),
        ("optimizer", spec.optimizer, [f.name for f in dataclasses.fields(OptimizerConfig)]),
    ):
        lines.append(f"  [{section}]")
        lines += [f"    {n} = {_ini_value(getattr(obj, n))}" for n in names]
    lines.append("  [experiment]")
    lines += [f"    {k} = {_ini_value(getattr(spec, n))}" for k, n in _EXPERIMENT_KEYS.items()]
    lines.append(f"  kinds: {', '.join(KINDS)}")
    lines.append(f"  algorithms: {', '.join(ALGORITHMS)} (TwoTiers/SingleLoop accept :MM or :BCD)")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irs-secrecy",
        description="Joint precoding and IRS phase tuning experiments.",
        epilog=_defaults_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run the experiment described by a config file"),
        ("trace", "record per-iteration objective traces"),
        ("validate", "parse a config file and print the resolved settings"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="INI experiment file")
        if name == "validate":
            continue
        p.add_argument("--seed", type=int, help="master seed (overrides [scenario] seed)")
        p.add_argument("--realizations", type=int, help="number of channel realizations")
        p.add_argument("--out", help="output CSV path")
        p.add_argument("--algorithms", help="comma-separated algorithm list")
        p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("--full", action="store_true",
                       help="use n_realizations_full instead of n_realizations")
    return parser


def _apply_overrides(spec: ExperimentSpec, args: argparse.Namespace) -> ExperimentSpec:
    changes: dict[str, Any] = {}
    if args.seed is not None:
        changes["scenario"] = dataclasses.replace(spec.scenario, seed=args.seed)
    if args.algorithms:
        changes["algorithms"] = tuple(_list(args.algorithms))
    if args.out:
        changes["output_path"] = args.out
    if args.command == "trace":
        changes["kind"] = "ConvergenceTrace"
    try:
        return dataclasses.replace(spec, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _, _, spec = parse_config(args.config)
        if args.command == "validate":
            sys.stdout.write(format_config(spec))
            return 0
        spec = _apply_overrides(spec, args)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1", field="jobs")
        if args.realizations is not None and args.realizations < 1:
            raise ConfigError("--realizations must be >= 1", field="realizations")
        n = args.realizations or (spec.n_realizations_full if args.full else spec.n_realizations)
        rows = run_experiment(spec, n, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IrsSecrecyError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{spec.kind}: {n} realizations -> {spec.output_path}")
    for r in rows:
        label = "" if spec.kind == "ConvergenceTrace" else f"{fmt(r.sweep_value):>8}  "
        print(f"{label}{r.algorithm:<16} {r.mean_wssr:10.4f} +- {r.stderr_wssr:.4f} bits"
              f"  {r.mean_runtime_ms:10.1f} ms")
    return 0


if __name__ == "__main__":
    sys.exit(main())
