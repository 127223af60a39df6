"""Command-line front end: scenario files, sweeps, CSV output, comparison.

Scenario files are INI-style key/value sections (see scenarios/ for the
shipped examples). A file without section headers is treated as the
[simulation] section, so the one-liner ``sf = emsf`` is a valid scenario
that runs entirely on defaults.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime error,
3 comparison verdict failed.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import statistics
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from tschsim.engine import ConfigError, LinkModel, SimConfig, run_simulation
from tschsim.scheduling import MsfConfig
from tschsim.sixp import SixPCostModel
from tschsim.core import SlotframeParams
from tschsim.telemetry import (
    MetricsLog,
    latency_stats,
    overhead_bytes,
    queue_stats,
    sixp_error_ratio,
    write_latency_csv,
    write_overhead_csv,
    write_queue_csv,
    write_sixp_csv,
)
from tschsim.traffic import (
    Constant,
    Piecewise,
    PoissonEvents,
    SporadicUniform,
    TrafficProfile,
    paper_scenario_profile,
)


class ScenarioError(Exception):
    """Scenario file cannot be parsed or is semantically invalid."""


@dataclass
class Scenario:
    name: str
    base: SimConfig
    replicas: int = 1
    sweep_nodes: Optional[tuple[int, ...]] = None
    sweep_sf: Optional[tuple[str, ...]] = None

    def points(self) -> list[tuple[int, str]]:
        nodes = self.sweep_nodes or (self.base.node_count,)
        sfs = self.sweep_sf or (self.base.scheduling_function,)
        return [(n, sf) for n in sorted(nodes) for sf in sfs]


def _get(parser: configparser.ConfigParser, section: str, key: str,
         conv, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except ValueError:
        raise ScenarioError(
            f"[{section}] {key}: cannot parse {raw!r}"
        ) from None


def _parse_traffic(parser: configparser.ConfigParser) -> TrafficProfile:
    section = "traffic"
    if not parser.has_section(section):
        return TrafficProfile(event_model=Constant(2))
    if parser.get(section, "profile", fallback="") == "paper":
        return paper_scenario_profile()

    def one(sec: str) -> TrafficProfile:
        periodic = _get(parser, sec, "periodic", int, 0)
        kind = parser.get(sec, "event", fallback="none").strip().lower()
        if kind in ("none", ""):
            model = Constant(0)
        elif kind == "constant":
            model = Constant(_get(parser, sec, "rate", int, 0))
        elif kind == "poisson":
            model = PoissonEvents(_get(parser, sec, "rate", float, 0.0))
        elif kind == "uniform":
            lo = _get(parser, sec, "lo", int, 0)
            hi = _get(parser, sec, "hi", int, 0)
            if lo > hi:
                raise ScenarioError(f"[{sec}] lo > hi")
            model = SporadicUniform(lo, hi)
        else:
            raise ScenarioError(f"[{sec}] unknown event model {kind!r}")
        return TrafficProfile(periodic, model)

    phases = [(0, one(section))]
    for sec in parser.sections():
        if sec.startswith("traffic:"):
            try:
                start = int(sec.split(":", 1)[1])
            except ValueError:
                raise ScenarioError(
                    f"[{sec}] phase start must be an integer frame"
                ) from None
            phases.append((start, one(sec)))
    if len(phases) == 1:
        return phases[0][1]
    phases.sort(key=lambda p: p[0])
    return TrafficProfile(event_model=Piecewise(tuple(phases)))


def parse_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError:
        parser = configparser.ConfigParser()
        try:
            parser.read_string("[simulation]\n" + text, source=str(path))
        except configparser.Error as exc:
            raise ScenarioError(str(exc)) from exc
    except configparser.Error as exc:
        raise ScenarioError(str(exc)) from exc

    sim = "simulation"
    msf_cfg = MsfConfig(
        window_len=_get(parser, "msf", "window", int, 16),
        high_threshold=_get(parser, "msf", "high", float, 0.75),
        low_threshold=_get(parser, "msf", "low", float, 0.25),
        min_cells=_get(parser, "msf", "min_cells", int, 1),
    )
    cost = SixPCostModel(
        base_bytes=_get(parser, "sixp", "base_bytes", int, 20),
        per_cell_bytes=_get(parser, "sixp", "per_cell_bytes", int, 4),
    )
    params = SlotframeParams(
        slotframe_size=_get(parser, sim, "slotframe_size", int, 101),
        slot_duration_ms=_get(parser, sim, "slot_duration_ms", float, 10.0),
    )
    link = LinkModel(default_pdr=_get(parser, sim, "pdr", float, 0.85))

    topology_kind = _get(parser, "topology", "kind", str, "random")
    edges = None
    node_count = _get(parser, sim, "nodes", int, 2)
    topo_file = parser.get("topology", "file", fallback=None)
    if topo_file:
        from tschsim.topology import TopologyError, load_topology

        try:
            tree = load_topology(topo_file)
        except (OSError, TopologyError) as exc:
            raise ScenarioError(f"[topology] file: {exc}") from exc
        edges = tuple(sorted(tree.parent.items()))
        topology_kind = "edges"
        node_count = tree.node_count

    try:
        base = SimConfig(
            node_count=node_count,
            slotframe_count=_get(parser, "scenario", "frames", int,
                                 _get(parser, sim, "frames", int, 100)),
            slotframe_params=params,
            topology_kind=topology_kind,
            topology_max_degree=_get(parser, "topology", "max_degree",
                                     int, 8),
            topology_edges=edges,
            traffic=_parse_traffic(parser),
            payload_bytes=_get(parser, sim, "payload", int, 127),
            max_retries=_get(parser, sim, "max_retries", int, 4),
            queue_capacity=_get(parser, sim, "queue_capacity", int, 5),
            scheduling_function=_get(parser, sim, "sf", str, "msf"),
            beta=_get(parser, "sixp", "beta", int, 10),
            msf=msf_cfg,
            candidate_list_len=_get(parser, "sixp", "candidate_list_len",
                                    int, 5),
            cost_model=cost,
            link=link,
            seed=_get(parser, sim, "seed", int, 1),
            sixp_transport=_get(parser, sim, "transport", str, "shared"),
            busy_policy=_get(parser, "sixp", "busy", str, "node"),
            lambda_counts=_get(parser, sim, "lambda_counts", str,
                               "generated+forwarded"),
            initial_tx_cells=_get(parser, sim, "initial_tx_cells", int, 0),
            initial_provisioning=_get(parser, sim, "initial_provisioning",
                                      str, "uniform"),
            join_jitter_frames=_get(parser, sim, "join_jitter", int, 0),
            sixp_retry_wait_frames=_get(parser, "sixp", "retry_wait",
                                        int, 4),
            sixp_lifetime_frames=_get(parser, "sixp", "lifetime", int, 16),
            emsf_cooldown_frames=_get(parser, "emsf", "cooldown", int, 12),
            emsf_stability_frames=_get(parser, "emsf", "stability", int, 3),
        )
        base.validate()
    except (ConfigError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc

    sweep_nodes = None
    sweep_sf = None
    if parser.has_option("sweep", "nodes"):
        sweep_nodes = tuple(
            int(v) for v in parser.get("sweep", "nodes").split()
        )
    if parser.has_option("sweep", "sf"):
        sweep_sf = tuple(parser.get("sweep", "sf").split())
        for sf in sweep_sf:
            if sf not in ("msf", "emsf"):
                raise ScenarioError(f"[sweep] unknown sf {sf!r}")

    replicas = _get(parser, "scenario", "replicas", int, 1)
    if replicas < 1:
        raise ScenarioError("[scenario] replicas must be >= 1")
    name = parser.get("scenario", "name", fallback=path.stem)
    return Scenario(
        name=name, base=base, replicas=replicas,
        sweep_nodes=sweep_nodes, sweep_sf=sweep_sf,
    )


def builtin_scenario_path(name: str) -> Optional[Path]:
    ref = resources.files("tschsim").joinpath("scenarios", f"{name}.ini")
    if ref.is_file():
        return Path(str(ref))
    return None


def resolve_scenario(spec: str) -> Path:
    path = Path(spec)
    if path.is_file():
        return path
    builtin = builtin_scenario_path(spec)
    if builtin is not None:
        return builtin
    raise ScenarioError(
        f"scenario {spec!r} is neither a file nor a built-in name"
    )


# ----------------------------------------------------------------------
# running


def _run_metrics(log: MetricsLog) -> dict[str, float]:
    """Flatten one run's log into the summary metric set."""
    out: dict[str, float] = {
        "generated": float(log.generated_total),
        "delivered": float(log.delivered_total),
        "dropped": float(log.dropped_total),
        "sixp_transactions": float(len(log.sixp)),
        "overhead_total_bytes": float(overhead_bytes(log)[0]),
    }
    ratio = sixp_error_ratio(log)
    if ratio is not None:
        out["sixp_error_ratio"] = ratio
    lat = latency_stats(log)
    if lat is not None:
        out["latency_mean_ms"] = lat["mean"]
        out["latency_median_ms"] = lat["median"]
        out["latency_p95_ms"] = lat["p95"]
        out["latency_max_ms"] = lat["max"]
    series, _ = queue_stats(log)
    if series:
        out["queue_avg_depth"] = sum(s[1] for s in series) / len(series)
        out["queue_peak_depth"] = float(max(s[2] for s in series))
    return out


METRIC_ORDER = [
    "sixp_error_ratio",
    "sixp_transactions",
    "overhead_total_bytes",
    "latency_mean_ms",
    "latency_median_ms",
    "latency_p95_ms",
    "latency_max_ms",
    "queue_avg_depth",
    "queue_peak_depth",
    "generated",
    "delivered",
    "dropped",
]


def run_scenario(scenario: Scenario, out_dir: str | Path,
                 replicas: Optional[int] = None,
                 base_seed: Optional[int] = None,
                 quiet: bool = False) -> Path:
    """Run every sweep point x replica, write per-run and summary CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_replicas = replicas or scenario.replicas
    seed0 = base_seed if base_seed is not None else scenario.base.seed

    rows: list[list] = []
    for node_count, sf in scenario.points():
        per_metric: dict[str, list[float]] = {}
        for rep in range(n_replicas):
            cfg = replace(
                scenario.base,
                node_count=node_count,
                scheduling_function=sf,
                seed=seed0 + rep,
            )
            log = run_simulation(cfg)
            run_dir = out / f"nodes{node_count:03d}" / sf / f"rep{rep}"
            run_dir.mkdir(parents=True, exist_ok=True)
            write_sixp_csv(log, str(run_dir / "sixp.csv"))
            write_latency_csv(log, str(run_dir / "latency.csv"))
            write_queue_csv(log, str(run_dir / "queue.csv"))
            write_overhead_csv(log, str(run_dir / "overhead.csv"))
            for key, value in _run_metrics(log).items():
                per_metric.setdefault(key, []).append(value)
            if not quiet:
                print(
                    f"ran nodes={node_count} sf={sf} rep={rep} "
                    f"seed={seed0 + rep}"
                )
        for metric in METRIC_ORDER:
            values = per_metric.get(metric)
            if not values:
                continue
            mean = sum(values) / len(values)
            spread = statistics.stdev(values) if len(values) > 1 else 0.0
            rows.append(
                ["nodes", node_count, sf, metric, repr(mean),
                 repr(spread), len(values)]
            )

    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sweepKey", "sweepValue", "sf", "metric", "mean", "stddev", "n"]
        )
        writer.writerows(rows)
    _write_resolved_config(scenario, out, n_replicas, seed0)
    return out / "summary.csv"


def _write_resolved_config(scenario: Scenario, out: Path,
                           replicas: int, seed0: int) -> None:
    cfg = scenario.base
    lines = [
        "[scenario]",
        f"name = {scenario.name}",
        f"replicas = {replicas}",
        f"frames = {cfg.slotframe_count}",
        "",
        "[simulation]",
        f"nodes = {cfg.node_count}",
        f"sf = {cfg.scheduling_function}",
        f"seed = {seed0}",
        f"pdr = {cfg.link.default_pdr}",
        f"transport = {cfg.sixp_transport}",
        f"initial_tx_cells = {cfg.initial_tx_cells}",
        f"join_jitter = {cfg.join_jitter_frames}",
        f"queue_capacity = {cfg.queue_capacity}",
        f"max_retries = {cfg.max_retries}",
        f"payload = {cfg.payload_bytes}",
        f"slotframe_size = {cfg.slotframe_params.slotframe_size}",
        f"slot_duration_ms = {cfg.slotframe_params.slot_duration_ms}",
        f"lambda_counts = {cfg.lambda_counts}",
        "",
        "[topology]",
        f"kind = {cfg.topology_kind}",
        f"max_degree = {cfg.topology_max_degree}",
        "",
        "[traffic]",
        f"profile = {cfg.traffic!r}",
        "",
        "[msf]",
        f"window = {cfg.msf.window_len}",
        f"high = {cfg.msf.high_threshold}",
        f"low = {cfg.msf.low_threshold}",
        f"min_cells = {cfg.msf.min_cells}",
        "",
        "[sixp]",
        f"beta = {cfg.beta}",
        f"candidate_list_len = {cfg.candidate_list_len}",
        f"lifetime = {cfg.sixp_lifetime_frames}",
        f"retry_wait = {cfg.sixp_retry_wait_frames}",
        f"busy = {cfg.busy_policy}",
        "",
        "[emsf]",
        f"cooldown = {cfg.emsf_cooldown_frames}",
        f"stability = {cfg.emsf_stability_frames}",
        "",
        "[sweep]",
    ]
    if scenario.sweep_nodes:
        lines.append(
            "nodes = " + " ".join(str(n) for n in scenario.sweep_nodes)
        )
    if scenario.sweep_sf:
        lines.append("sf = " + " ".join(scenario.sweep_sf))
    (out / "config_resolved.ini").write_text(
        "\n".join(lines) + "\n", encoding="utf-8"
    )


# ----------------------------------------------------------------------
# comparison

LOWER_IS_BETTER = [
    "sixp_error_ratio",
    "overhead_total_bytes",
    "latency_mean_ms",
    "queue_avg_depth",
]


def _load_summary(path: Path) -> dict:
    summary = path / "summary.csv"
    if not summary.is_file():
        raise ScenarioError(f"{summary} not found")
    rows = {}
    sfs = set()
    with open(summary, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"sweepKey", "sweepValue", "sf", "metric", "mean",
                    "stddev", "n"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise ScenarioError(f"{summary}: unexpected column schema")
        for row in reader:
            key = (row["sweepValue"], row["sf"], row["metric"])
            rows[key] = float(row["mean"])
            sfs.add(row["sf"])
    return {"rows": rows, "sfs": sfs}


def compare_runs(dir_a: str | Path, dir_b: str | Path, out=None) -> int:
    """Side-by-side metric comparison with verdict lines.

    Returns the exit code: 0 when all verdicts pass, 3 otherwise.
    """
    if out is None:
        out = sys.stdout
    a = _load_summary(Path(dir_a))
    b = _load_summary(Path(dir_b))

    keys_a, keys_b = set(a["rows"]), set(b["rows"])
    mono = len(a["sfs"]) == 1 and len(b["sfs"]) == 1
    if mono:
        # align on sweep point + metric so msf dirs compare against emsf dirs
        def strip(keys):
            return {(v, m) for v, _, m in keys}

        if strip(keys_a) != strip(keys_b):
            raise ScenarioError("summaries cover different points/metrics")
    elif keys_a != keys_b:
        raise ScenarioError("summaries cover different points/metrics")

    def value(side, point, metric):
        for (v, sf, m), mean in side["rows"].items():
            if v == point and m == metric:
                return mean
        return None

    points = sorted(
        {v for v, _, _ in keys_a}, key=lambda x: (len(x), x)
    )
    metrics = sorted({m for _, _, m in keys_a})

    print(f"comparing {dir_a} (A) vs {dir_b} (B)", file=out)
    print(f"{'point':>8} {'metric':<24} {'A':>14} {'B':>14} {'delta':>14}",
          file=out)
    for point in points:
        for metric in metrics:
            va, vb = value(a, point, metric), value(b, point, metric)
            if va is None or vb is None:
                continue
            print(
                f"{point:>8} {metric:<24} {va:>14.6g} {vb:>14.6g} "
                f"{vb - va:>14.6g}",
                file=out,
            )

    # When one directory holds an emsf run and the other an msf run the
    # comparison gates the directional claim: emsf below msf everywhere.
    emsf_side = msf_side = None
    if a["sfs"] == {"emsf"} and b["sfs"] == {"msf"}:
        emsf_side, msf_side = a, b
    elif a["sfs"] == {"msf"} and b["sfs"] == {"emsf"}:
        emsf_side, msf_side = b, a

    failed = False
    for metric in LOWER_IS_BETTER:
        pairs = [
            (point, value(a, point, metric), value(b, point, metric))
            for point in points
        ]
        pairs = [(p, va, vb) for p, va, vb in pairs
                 if va is not None and vb is not None]
        if not pairs:
            continue
        if emsf_side is not None:
            emsf_better = all(
                value(emsf_side, p, metric) < value(msf_side, p, metric)
                for p, _, _ in pairs
            )
            verdict = (
                "PASS (emsf below msf at every point)" if emsf_better
                else "FAIL (emsf not below msf at every point)"
            )
            failed = failed or not emsf_better
        elif all(va == vb for _, va, vb in pairs):
            verdict = "EQUAL"
        elif all(vb < va for _, va, vb in pairs):
            verdict = "B below A at every point"
        elif all(va < vb for _, va, vb in pairs):
            verdict = "A below B at every point"
        else:
            verdict = "mixed (no side dominates)"
        print(f"verdict {metric}: {verdict}", file=out)
    return 3 if failed else 0


# ----------------------------------------------------------------------
# entry point


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="tschsim",
        description="TSCH network simulator with MSF/EMSF cell scheduling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario file or built-in")
    sim.add_argument("scenario", help="scenario file path or built-in name")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--replicas", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--quiet", action="store_true")

    cmp_p = sub.add_parser("compare", help="compare two output directories")
    cmp_p.add_argument("dir_a")
    cmp_p.add_argument("dir_b")

    sub.add_parser("list-scenarios", help="list built-in scenarios")

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            scenario = parse_scenario(resolve_scenario(args.scenario))
            if args.replicas is not None and args.replicas < 1:
                raise ScenarioError("--replicas must be >= 1")
            run_scenario(
                scenario, args.out,
                replicas=args.replicas, base_seed=args.seed,
                quiet=args.quiet,
            )
            return 0
        if args.command == "compare":
            return compare_runs(args.dir_a, args.dir_b)
        if args.command == "list-scenarios":
            root = resources.files("tschsim").joinpath("scenarios")
            for entry in sorted(root.iterdir(), key=lambda e: e.name):
                if entry.name.endswith(".ini"):
                    print(entry.name[:-4])
            return 0
    except (ScenarioError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
