"""Batch experiment driver: config files, sweep grids, CSV outputs.

Experiments are described by flat INI-style files: an ``[experiment]``
section picks the scenario, scheme, duration, seeds and sweep; an
optional ``[topology]`` section overrides link parameters; one section
per scheme overrides that scheme's tunables (keys follow the usual
parameter names: q_target, q_min, q_max, p_max, theta, w, t_target,
t_update, alpha, beta).  Everything left out falls back to defaults.

A sweep is a semicolon-separated list of ``key=v1,v2,...`` entries and
expands to the cartesian product; ``aqm``, ``n_flows`` and ``n_max``
can be swept alongside scheme parameters.  Every (grid point, seed)
pair becomes one run; outputs are one metrics.csv for the batch plus a
queue trace and moving-average CSV per run, written deterministically
so identical specs produce identical bytes.
"""

from __future__ import annotations

import configparser
import itertools
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .aqm_base import AqmScheme
from .baselines import Ared, Codel, DropTail, Pie, Red, RedConfig
from .beta_family import (
    ABETARED_INITIAL_P_MAX,
    ABetaRed,
    BetaRed,
    BetaRedConfig,
    DBetaRed,
    target_queue_from_delay,
)
from .metrics import METRIC_COLUMNS, MetricsReport, compute_report
from .netsim import Simulation, TopologyConfig, Trace, scenario1_plan, scenario2_plan

__all__ = [
    "SCHEMES",
    "SpecError",
    "RunError",
    "ExperimentSpec",
    "RunResult",
    "load_spec",
    "build_scheme",
    "resolved_params",
    "run_experiment",
    "emit_outputs",
    "execute",
]

SCHEMES = ("droptail", "red", "ared", "codel", "pie", "betared", "abetared", "dbetared")

# Tunable keys accepted per scheme, with defaults.  ``None`` marks values
# resolved against the topology at load time (targets from t_target,
# thresholds from the buffer, averaging weights from the capacity).
SCHEME_PARAMS: dict[str, dict[str, float | None]] = {
    "droptail": {},
    "red": {"t_target": 0.040, "q_min": None, "q_max": None, "p_max": 0.1, "w": 0.002},
    "ared": {"t_target": 0.040, "w": None, "p_max": 0.1, "t_update": 0.5},
    "codel": {"t_target": 0.040, "interval": 0.100},
    "pie": {"t_target": 0.040, "t_update": 0.015, "alpha": 0.125, "beta": 1.25},
    "betared": {
        "t_target": 0.040,
        "q_target": None,
        "q_min": 0.0,
        "q_max": None,
        "p_max": 1.0,
        "theta": 0.1,
        "w": 0.1,
    },
    "abetared": {
        "t_target": 0.040,
        "theta": 0.1,
        "w": 0.1,
        "alpha": 1.0,
        "beta": 1.0,
        "t_update": 0.5,
        "p_max": ABETARED_INITIAL_P_MAX,
    },
    "dbetared": {
        "t_target": 0.040,
        "theta": 0.1,
        "w": 0.1,
        "alpha": 1.0,
        "beta": 1.0,
        "t_update": 0.5,
    },
}

_TOPOLOGY_KEYS = {
    "bottleneck_rate": float,
    "bottleneck_delay": float,
    "edge_rate": float,
    "edge_delay": float,
    "buffer": int,
    "packet_size": int,
    "start_spread": float,
    "edge_jitter": float,
    "dupack_threshold": int,
}

_OPEN_UNIT = ("theta",)          # must lie strictly inside (0, 1)
_HALF_OPEN_UNIT = ("w", "p_max")  # (0, 1]
_GAIN_SCHEMES = ("abetared", "dbetared")  # alpha/beta restricted to (0, 1]
_POSITIVE = ("t_target", "t_update", "interval", "q_target", "alpha", "beta")
_NONNEGATIVE = ("q_min", "q_max")


class SpecError(ValueError):
    """A config file or override failed validation; the message names the field."""


class RunError(RuntimeError):
    """A run inside a batch failed; carries the offending grid point."""


@dataclass
class ExperimentSpec:
    """Fully validated description of one experiment batch."""

    scenario: int = 1
    aqm: str = "betared"
    duration: float = 250.0
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    n_flows: int = 100
    n_max: int = 400
    s2_base: int = 100
    s2_interval: float = 50.0
    ma_window: float = 25.0
    out_dir: str = "results"
    topology_args: dict = field(default_factory=dict)
    scheme_overrides: dict = field(default_factory=dict)
    sweep: tuple[tuple[str, tuple], ...] = ()
    params: dict = field(default_factory=dict)  # resolved for the primary scheme


@dataclass
class RunResult:
    """Metrics (and optionally the trace) of one simulated run.

    The packet counters are snapshotted out of the trace so result rows
    survive the trace being freed.
    """

    aqm: str
    scenario: int
    sweep_point: tuple[tuple[str, object], ...]
    seed: int
    report: MetricsReport
    sent: int
    delivered: int
    dropped: int
    trace: Trace | None = None

    @property
    def sweep_label(self) -> str:
        return ";".join(f"{k}={_fmt_value(v)}" for k, v in self.sweep_point)


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return "%.6g" % v
    return str(v)


def _check_param(aqm: str, key: str, value: float) -> None:
    if key in _OPEN_UNIT and not 0.0 < value < 1.0:
        raise SpecError(f"{aqm}.{key} must lie strictly inside (0, 1), got {value}")
    if key in _HALF_OPEN_UNIT and not 0.0 < value <= 1.0:
        raise SpecError(f"{aqm}.{key} must lie in (0, 1], got {value}")
    if key in ("alpha", "beta") and aqm in _GAIN_SCHEMES and not 0.0 < value <= 1.0:
        raise SpecError(f"{aqm}.{key} must lie in (0, 1], got {value}")
    if key in _POSITIVE and not value > 0.0:
        raise SpecError(f"{aqm}.{key} must be positive, got {value}")
    if key in _NONNEGATIVE and value < 0.0:
        raise SpecError(f"{aqm}.{key} must be nonnegative, got {value}")


def resolved_params(aqm: str, overrides: dict, topology: TopologyConfig) -> dict:
    """Scheme parameter table with defaults filled and topology-derived
    values (targets, thresholds, weights) resolved."""
    if aqm not in SCHEME_PARAMS:
        raise SpecError(f"aqm must be one of {SCHEMES}, got {aqm!r}")
    params = dict(SCHEME_PARAMS[aqm])
    for key, value in overrides.items():
        if key not in params:
            raise SpecError(f"unknown parameter {key!r} for scheme {aqm!r}")
        params[key] = value
    capacity = topology.capacity_pkts
    q_target_default = target_queue_from_delay(capacity, params.get("t_target", 0.040))
    if aqm == "betared":
        if params["q_target"] is None:
            params["q_target"] = q_target_default
        if params["q_max"] is None:
            params["q_max"] = float(topology.buffer_packets)
    elif aqm == "red":
        if params["q_min"] is None:
            params["q_min"] = q_target_default / 2.0
        if params["q_max"] is None:
            params["q_max"] = 1.5 * q_target_default
    elif aqm == "ared":
        if params["w"] is None:
            params["w"] = 1.0 - math.exp(-1.0 / capacity)
    for key, value in params.items():
        if value is not None:
            _check_param(aqm, key, value)
    return params


def build_scheme(aqm: str, params: dict, topology: TopologyConfig) -> AqmScheme:
    """Construct the configured scheme instance for ``topology``."""
    capacity = topology.capacity_pkts
    buffer_pkts = float(topology.buffer_packets)
    if aqm == "droptail":
        return DropTail()
    if aqm == "red":
        return Red(RedConfig(params["q_min"], params["q_max"], params["p_max"], params["w"]))
    if aqm == "ared":
        q_target = target_queue_from_delay(capacity, params["t_target"])
        return Ared(q_target, params["w"], p_max=params["p_max"], update_period=params["t_update"])
    if aqm == "codel":
        return Codel(target=params["t_target"], interval=params["interval"])
    if aqm == "pie":
        return Pie(
            target=params["t_target"],
            capacity_pkts=capacity,
            update_period=params["t_update"],
            alpha_gain=params["alpha"],
            beta_gain=params["beta"],
        )
    if aqm == "betared":
        cfg = BetaRedConfig(
            q_target=params["q_target"],
            q_min=params["q_min"],
            q_max=params["q_max"],
            p_max=params["p_max"],
            weight=params["w"],
            theta=params["theta"],
        )
        return BetaRed(cfg)
    if aqm == "abetared":
        cfg = BetaRedConfig(
            q_target=target_queue_from_delay(capacity, params["t_target"]),
            q_min=0.0,
            q_max=buffer_pkts,
            p_max=params["p_max"],
            weight=params["w"],
            theta=params["theta"],
        )
        return ABetaRed(
            cfg,
            alpha_gain=params["alpha"],
            beta_gain=params["beta"],
            update_period=params["t_update"],
        )
    if aqm == "dbetared":
        cfg = BetaRedConfig(
            q_target=target_queue_from_delay(capacity, params["t_target"]),
            q_min=0.0,
            q_max=buffer_pkts,
            p_max=1.0,
            weight=params["w"],
            theta=params["theta"],
        )
        return DBetaRed(
            cfg,
            alpha_gain=params["alpha"],
            beta_gain=params["beta"],
            update_period=params["t_update"],
        )
    raise SpecError(f"aqm must be one of {SCHEMES}, got {aqm!r}")


def _parse_sweep(text: str, aqms_in_play: list[str]) -> tuple[tuple[str, tuple], ...]:
    sweep: list[tuple[str, tuple]] = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise SpecError(f"sweep entry must look like key=v1,v2,..., got {chunk!r}")
        key, _, raw = chunk.partition("=")
        key = key.strip()
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not values:
            raise SpecError(f"sweep key {key!r} has no values")
        if key == "aqm":
            for v in values:
                if v not in SCHEMES:
                    raise SpecError(f"sweep aqm value {v!r} not one of {SCHEMES}")
            sweep.append((key, tuple(values)))
        elif key in ("n_flows", "n_max"):
            sweep.append((key, tuple(int(float(v)) for v in values)))
        else:
            schemes = [a for kv in sweep if kv[0] == "aqm" for a in kv[1]] or aqms_in_play
            for aqm in schemes:
                if key not in SCHEME_PARAMS[aqm]:
                    raise SpecError(f"sweep parameter {key!r} does not exist for scheme {aqm!r}")
            sweep.append((key, tuple(float(v) for v in values)))
    return tuple(sweep)


def _get_typed(section, key: str, kind, where: str):
    raw = section[key]
    try:
        if kind is int:
            return int(float(raw))
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{where}.{key} is not a valid {kind.__name__}: {raw!r}") from exc


def load_spec(path: str | os.PathLike | None = None, overrides: dict | None = None) -> ExperimentSpec:
    """Parse an experiment file and apply CLI-style overrides.

    Unknown schemes, unknown keys, and out-of-range values raise
    :class:`SpecError` naming the offending field.  ``overrides`` maps
    [experiment] keys (or ``params``, a dict of scheme tunables) to
    replacement values.
    """
    spec = ExperimentSpec()
    scheme_overrides: dict[str, dict] = {}
    sweep_text = ""

    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        read = parser.read(path)
        if not read:
            raise SpecError(f"config file not found or unreadable: {path}")
        for section in parser.sections():
            if section == "experiment":
                exp = parser[section]
                for key in exp:
                    if key == "scenario":
                        spec.scenario = _get_typed(exp, key, int, "experiment")
                    elif key == "aqm":
                        spec.aqm = exp[key].strip()
                    elif key == "duration":
                        spec.duration = _get_typed(exp, key, float, "experiment")
                    elif key == "seeds":
                        try:
                            spec.seeds = tuple(
                                int(s) for s in exp[key].replace(",", " ").split()
                            )
                        except ValueError as exc:
                            raise SpecError(f"experiment.seeds must be integers: {exp[key]!r}") from exc
                    elif key == "n_flows":
                        spec.n_flows = _get_typed(exp, key, int, "experiment")
                    elif key == "n_max":
                        spec.n_max = _get_typed(exp, key, int, "experiment")
                    elif key == "s2_base":
                        spec.s2_base = _get_typed(exp, key, int, "experiment")
                    elif key == "s2_interval":
                        spec.s2_interval = _get_typed(exp, key, float, "experiment")
                    elif key == "ma_window":
                        spec.ma_window = _get_typed(exp, key, float, "experiment")
                    elif key == "out":
                        spec.out_dir = exp[key].strip()
                    elif key == "sweep":
                        sweep_text = exp[key]
                    else:
                        raise SpecError(f"unknown experiment key {key!r}")
            elif section == "topology":
                topo = parser[section]
                for key in topo:
                    if key not in _TOPOLOGY_KEYS:
                        raise SpecError(f"unknown topology key {key!r}")
                    spec.topology_args[
                        "buffer_packets" if key == "buffer" else key
                    ] = _get_typed(topo, key, _TOPOLOGY_KEYS[key], "topology")
            elif section in SCHEME_PARAMS:
                table = scheme_overrides.setdefault(section, {})
                for key in parser[section]:
                    if key not in SCHEME_PARAMS[section]:
                        raise SpecError(f"unknown parameter {key!r} for scheme {section!r}")
                    table[key] = _get_typed(parser[section], key, float, section)
            else:
                raise SpecError(f"unknown config section {section!r}")

    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key == "params":
                for aqm_key, aqm_val in value.items():
                    table = scheme_overrides.setdefault(spec.aqm, {})
                    table[aqm_key] = aqm_val
            elif key == "sweep":
                sweep_text = value
            elif key == "seeds":
                spec.seeds = tuple(int(s) for s in value)
            elif hasattr(spec, key):
                setattr(spec, key, value)
            else:
                raise SpecError(f"unknown override {key!r}")

    if spec.scenario not in (1, 2):
        raise SpecError(f"scenario must be 1 or 2, got {spec.scenario}")
    if spec.aqm not in SCHEMES:
        raise SpecError(f"aqm must be one of {SCHEMES}, got {spec.aqm!r}")
    if spec.duration <= 0:
        raise SpecError(f"duration must be positive, got {spec.duration}")
    if not spec.seeds:
        raise SpecError("seeds must not be empty")
    if spec.ma_window <= 0:
        raise SpecError(f"ma_window must be positive, got {spec.ma_window}")

    spec.scheme_overrides = scheme_overrides
    spec.sweep = _parse_sweep(sweep_text, [spec.aqm]) if sweep_text else ()

    topo = _topology_for(spec, n_flows=max(1, spec.n_flows))
    spec.params = resolved_params(spec.aqm, scheme_overrides.get(spec.aqm, {}), topo)
    # Validate every scheme section that was provided, even if unselected.
    for aqm, table in scheme_overrides.items():
        if aqm != spec.aqm:
            resolved_params(aqm, table, topo)
    return spec


def _topology_for(spec: ExperimentSpec, n_flows: int) -> TopologyConfig:
    try:
        return TopologyConfig(n_flows=n_flows, **spec.topology_args)
    except ValueError as exc:
        raise SpecError(str(exc)) from exc


def _grid(spec: ExperimentSpec):
    if not spec.sweep:
        yield ()
        return
    axes = [[(key, v) for v in values] for key, values in spec.sweep]
    yield from itertools.product(*axes)


def _single_run(spec: ExperimentSpec, point: tuple, seed: int) -> RunResult:
    aqm = spec.aqm
    n_flows = spec.n_flows
    n_max = spec.n_max
    param_overrides = dict(spec.scheme_overrides.get(aqm, {}))
    for key, value in point:
        if key == "aqm":
            aqm = value
            param_overrides = dict(spec.scheme_overrides.get(aqm, {}))
        elif key == "n_flows":
            n_flows = value
        elif key == "n_max":
            n_max = value
    for key, value in point:
        if key not in ("aqm", "n_flows", "n_max"):
            param_overrides[key] = value

    if spec.scenario == 1:
        topo = _topology_for(spec, n_flows=n_flows)
        plan = scenario1_plan(n_flows)
    else:
        topo = _topology_for(spec, n_flows=n_max)
        plan = scenario2_plan(n_max, base=spec.s2_base, interval=spec.s2_interval)

    params = resolved_params(aqm, param_overrides, topo)
    scheme = build_scheme(aqm, params, topo)
    trace = Simulation(topo, scheme, plan).run(spec.duration, seed)
    report = compute_report(trace, ma_window=spec.ma_window)
    return RunResult(
        aqm=aqm,
        scenario=spec.scenario,
        sweep_point=point,
        seed=seed,
        report=report,
        sent=trace.sent,
        delivered=trace.delivered,
        dropped=trace.dropped_total,
        trace=trace,
    )


def run_experiment(spec: ExperimentSpec) -> list[RunResult]:
    """Run the full (sweep point x seed) grid, keeping traces in memory.

    Any failing run aborts the batch with the offending grid point in
    the error message.
    """
    results: list[RunResult] = []
    for point in _grid(spec):
        for seed in spec.seeds:
            try:
                results.append(_single_run(spec, point, seed))
            except Exception as exc:
                label = ";".join(f"{k}={_fmt_value(v)}" for k, v in point) or "(defaults)"
                raise RunError(f"run failed at sweep point {label}, seed {seed}: {exc}") from exc
    return results


def _run_stub(result: RunResult) -> str:
    parts = [result.aqm]
    parts.extend(f"{k}-{_fmt_value(v)}" for k, v in result.sweep_point if k != "aqm")
    parts.append(f"seed{result.seed}")
    return "__".join(parts)


_CSV_HEADER = (
    "aqm,scenario,sweep,seed,sent,delivered,dropped,"
    + ",".join(METRIC_COLUMNS)
    + "\n"
)


def _metrics_row(result: RunResult) -> str:
    fields = [
        result.aqm,
        str(result.scenario),
        result.sweep_label,
        str(result.seed),
        str(result.sent),
        str(result.delivered),
        str(result.dropped),
    ]
    fields.extend("%.10g" % v for v in result.report.csv_values())
    return ",".join(fields) + "\n"


def _mean_row(group: list[RunResult]) -> str:
    first = group[0]
    n = len(group)
    fields = [
        first.aqm,
        str(first.scenario),
        first.sweep_label,
        "mean",
        "%.10g" % (sum(r.sent for r in group) / n),
        "%.10g" % (sum(r.delivered for r in group) / n),
        "%.10g" % (sum(r.dropped for r in group) / n),
    ]
    means = [
        sum(r.report.csv_values()[i] for r in group) / n for i in range(len(METRIC_COLUMNS))
    ]
    fields.extend("%.10g" % v for v in means)
    return ",".join(fields) + "\n"


def _write_run_files(result: RunResult, out: Path) -> list[Path]:
    stub = _run_stub(result)
    queue_path = out / f"queue_trace__{stub}.csv"
    ma_path = out / f"moving_average__{stub}.csv"
    result.trace.write_queue_csv(queue_path)
    with open(ma_path, "w", newline="") as fh:
        fh.write("time,moving_avg_q\n")
        for t, v in zip(result.report.moving_avg_times, result.report.moving_avg_values):
            fh.write("%.10g,%.10g\n" % (t, v))
    return [queue_path, ma_path]


def emit_outputs(results: list[RunResult], out_dir: str | os.PathLike) -> list[Path]:
    """Write metrics.csv plus per-run trace files; returns the paths.

    Per-seed rows are grouped by grid point with a seed-averaged row
    after each group.  Rerunning with identical inputs overwrites the
    same bytes.
    """
    if not results:
        raise ValueError("no results to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    metrics_path = out / "metrics.csv"
    with open(metrics_path, "w", newline="") as fh:
        fh.write(_CSV_HEADER)
        for _, group_iter in itertools.groupby(
            results, key=lambda r: (r.aqm, r.sweep_point)
        ):
            group = list(group_iter)
            for r in group:
                fh.write(_metrics_row(r))
            if len(group) > 1:
                fh.write(_mean_row(group))
    written.append(metrics_path)
    for r in results:
        written.extend(_write_run_files(r, out))
    return written


def execute(spec: ExperimentSpec) -> list[Path]:
    """Run the batch and stream outputs to disk, dropping each trace as
    soon as its files are written (memory-friendly for large grids)."""
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[str] = []
    written: list[Path] = []
    for point in _grid(spec):
        group: list[RunResult] = []
        for seed in spec.seeds:
            try:
                result = _single_run(spec, point, seed)
            except Exception as exc:
                label = ";".join(f"{k}={_fmt_value(v)}" for k, v in point) or "(defaults)"
                raise RunError(f"run failed at sweep point {label}, seed {seed}: {exc}") from exc
            written.extend(_write_run_files(result, out))
            rows.append(_metrics_row(result))
            result.trace = None
            group.append(result)
        if len(group) > 1:
            rows.append(_mean_row(group))
    metrics_path = out / "metrics.csv"
    with open(metrics_path, "w", newline="") as fh:
        fh.write(_CSV_HEADER)
        for row in rows:
            fh.write(row)
    return [metrics_path] + written
