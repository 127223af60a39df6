"""Acceptance suite: one test per release criterion, each printing a
PASS line with its measured numbers (run pytest -s to see them inline).

Trend criteria run the shipped scenario files through the same code path
the CLI uses, so passing here means the packaged experiments reproduce
the expected MSF/EMSF comparisons.
"""

import math
import random
import statistics
import time
from dataclasses import replace

import pytest

from tschsim.cli import builtin_scenario_path, parse_scenario, run_scenario
from tschsim.core import HoppingConfig, SlotframeParams, compute_asn, \
    hop_frequency, slot_coordinates
from tschsim.engine import LinkModel, SimConfig, Simulation, run_simulation
from tschsim.scheduling import compute_lambda, poisson_pmf, \
    predict_packet_count
from tschsim.telemetry import conservation_holds, latency_stats, \
    overhead_bytes, sixp_error_ratio
from tschsim.traffic import Constant, PoissonEvents, SporadicUniform, \
    TrafficHistory, TrafficProfile

SLOTFRAME_MS = 1010.0  # 101 slots x 10 ms


def relative_error(value: float, expected: float) -> float:
    return abs(value - expected) / expected


# ---------------------------------------------------------------------
# criterion 1: formula unit suite


def test_criterion_1_formula_suite():
    start = time.perf_counter()

    assert compute_asn(0, 101, 0) == 0
    assert compute_asn(2, 101, 5) == 207
    assert compute_asn(7, 101, 100) == 807

    cfg = HoppingConfig()
    assert hop_frequency(0, 0, cfg) == 11
    assert hop_frequency(3, 16, cfg) == 14
    assert hop_frequency(5, 27, cfg) == 11

    params = SlotframeParams()
    assert slot_coordinates(0, params) == (0, 0)
    assert slot_coordinates(207, params) == (2, 5)
    assert slot_coordinates(100, params) == (0, 100)

    assert relative_error(poisson_pmf(0, 1.0), math.exp(-1)) < 1e-9
    assert poisson_pmf(0, 0.0) == 1.0
    assert relative_error(poisson_pmf(2, 3.0), 4.5 * math.exp(-3)) < 1e-9

    def history(values):
        h = TrafficHistory(beta=10)
        for v in values:
            h.record(v)
        return h

    assert compute_lambda(history([3] * 10)) == 3.0
    assert compute_lambda(history([2] * 5 + [7] * 5)) == 4.5
    assert compute_lambda(history([0, 0, 0])) == 0.0

    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print(f"\nACCEPTANCE 1 formula unit suite: PASS ({elapsed:.3f}s)")


# ---------------------------------------------------------------------
# criterion 2: Poisson-mode oracle


def test_criterion_2_poisson_mode_oracle():
    start = time.perf_counter()
    rng = random.Random("acceptance/poisson-mode")
    agreements = 0
    for _ in range(1000):
        lam = rng.uniform(0.0, 40.0)
        bound = math.ceil(lam) + 50
        brute = max(range(bound + 1), key=lambda n: poisson_pmf(n, lam))
        if predict_packet_count(lam) == brute:
            agreements += 1
    elapsed = time.perf_counter() - start
    assert agreements == 1000
    assert elapsed < 5.0
    print(f"\nACCEPTANCE 2 Poisson-mode oracle: PASS "
          f"(1000/1000 agree, {elapsed:.2f}s)")


# ---------------------------------------------------------------------
# criterion 3: conservation property


def test_criterion_3_conservation_50_runs():
    start = time.perf_counter()
    master = random.Random("acceptance/conservation")
    for run_index in range(50):
        node_count = master.randint(3, 30)
        pdr = master.uniform(0.5, 1.0)
        sf = "msf" if run_index % 2 == 0 else "emsf"
        transport = "dedicated" if run_index % 3 else "shared"
        traffic = master.choice([
            TrafficProfile(1, Constant(1)),
            TrafficProfile(0, SporadicUniform(1, 4)),
            TrafficProfile(1, PoissonEvents(0.8)),
        ])
        cfg = SimConfig(
            node_count=node_count,
            slotframe_count=60,
            topology_kind="random",
            traffic=traffic,
            scheduling_function=sf,
            link=LinkModel(default_pdr=pdr),
            seed=master.randint(0, 10_000),
            sixp_transport=transport,
            initial_tx_cells=1,
        )
        sim = Simulation(cfg)
        log = sim.run()
        assert conservation_holds(log), (
            f"conservation broken: run {run_index} cfg seed {cfg.seed}"
        )
        assert all(f.queue_max <= 5 for f in log.frames)
        assert all(depth <= 5 for depth in log.queue_max_by_node.values())
        for node in sim.nodes:
            for packet in node.queue:
                assert packet.retries <= 4
        sim.check_mirror_invariant()
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    print(f"\nACCEPTANCE 3 conservation over 50 runs: PASS ({elapsed:.1f}s)")


# ---------------------------------------------------------------------
# criteria 4 + 5: density-sweep trends (shared runs)


@pytest.fixture(scope="module")
def density_sweep_results():
    scenario = parse_scenario(builtin_scenario_path("error_ratio_sweep"))
    start = time.perf_counter()
    results = {}
    for node_count, sf in scenario.points():
        ratios, overheads = [], []
        for rep in range(scenario.replicas):
            cfg = replace(
                scenario.base,
                node_count=node_count,
                scheduling_function=sf,
                seed=scenario.base.seed + rep,
            )
            log = run_simulation(cfg)
            ratio = sixp_error_ratio(log)
            assert ratio is not None
            ratios.append(ratio)
            overheads.append(overhead_bytes(log)[0])
        results[(node_count, sf)] = {
            "error_ratio": sum(ratios) / len(ratios),
            "overhead": sum(overheads) / len(overheads),
        }
    results["elapsed"] = time.perf_counter() - start
    return results


def test_criterion_4_error_ratio_trend(density_sweep_results):
    densities = (10, 20, 30, 40, 50)
    lines = []
    for n in densities:
        msf = density_sweep_results[(n, "msf")]["error_ratio"]
        emsf = density_sweep_results[(n, "emsf")]["error_ratio"]
        assert emsf < msf, f"EMSF not below MSF at {n} nodes"
        assert emsf <= 0.10, f"EMSF error ratio {emsf:.3f} > 10% at {n}"
        lines.append(f"{n}:{msf:.3f}/{emsf:.3f}")
    assert density_sweep_results["elapsed"] < 600.0
    print(f"\nACCEPTANCE 4 error-ratio trend: PASS "
          f"(msf/emsf {' '.join(lines)}, "
          f"{density_sweep_results['elapsed']:.0f}s)")


def test_criterion_5_overhead_trend(density_sweep_results):
    densities = (10, 20, 30, 40, 50)
    slope = {}
    for sf in ("msf", "emsf"):
        fit = statistics.linear_regression(
            densities,
            [density_sweep_results[(n, sf)]["overhead"]
             for n in densities],
        )
        slope[sf] = fit.slope
    assert slope["msf"] > 0
    assert slope["emsf"] < 0.40 * slope["msf"], (
        f"EMSF slope {slope['emsf']:.0f} not below "
        f"40% of MSF slope {slope['msf']:.0f}"
    )
    print(f"\nACCEPTANCE 5 overhead trend: PASS "
          f"(slopes msf={slope['msf']:.0f} emsf={slope['emsf']:.0f} "
          f"B/node, ratio {slope['emsf'] / slope['msf']:.2f})")


# ---------------------------------------------------------------------
# criteria 6 + 7: paper-scenario traces (shared runs)


@pytest.fixture(scope="module")
def trace_results():
    scenario = parse_scenario(builtin_scenario_path("latency_trace"))
    start = time.perf_counter()
    logs = {"msf": [], "emsf": []}
    for sf in logs:
        for rep in range(scenario.replicas):
            cfg = replace(
                scenario.base,
                scheduling_function=sf,
                seed=scenario.base.seed + rep,
            )
            logs[sf].append(run_simulation(cfg))
    logs["elapsed"] = time.perf_counter() - start
    return logs


def test_criterion_6_latency_trend(trace_results):
    """Post-warm-up means the frames after the traffic switches to the
    sporadic phase (index >= 50)."""
    msf_logs, emsf_logs = trace_results["msf"], trace_results["emsf"]

    def frame_mean(logs, frame):
        values = [
            lg.frames[frame].latency_mean_ms for lg in logs
            if lg.frames[frame].latency_mean_ms is not None
        ]
        return sum(values) / len(values) if values else None

    wins = compared = 0
    for frame in range(50, 200):
        msf_mean = frame_mean(msf_logs, frame)
        emsf_mean = frame_mean(emsf_logs, frame)
        if msf_mean is None or emsf_mean is None:
            continue
        compared += 1
        if emsf_mean < msf_mean:
            wins += 1
    win_share = wins / compared
    assert win_share >= 0.60, f"EMSF wins only {win_share:.0%} of frames"

    pooled = sorted(
        (d.delivery_asn - d.birth_asn) * 10.0
        for lg in emsf_logs for d in lg.delivered
    )
    emsf_median = statistics.median(pooled)
    assert emsf_median < 2 * SLOTFRAME_MS, (
        f"EMSF median latency {emsf_median:.0f} ms "
        f">= {2 * SLOTFRAME_MS:.0f} ms"
    )
    assert trace_results["elapsed"] < 300.0
    print(f"\nACCEPTANCE 6 latency trend: PASS "
          f"(EMSF wins {wins}/{compared} frames, "
          f"median {emsf_median:.0f} ms)")


def test_criterion_7_queue_trend(trace_results):
    emsf_worst = max(
        fr.queue_avg for lg in trace_results["emsf"] for fr in lg.frames
    )
    assert emsf_worst <= 4.0, (
        f"EMSF network-average queue hit {emsf_worst:.2f}"
    )
    msf_full_frames = sum(
        1 for lg in trace_results["msf"] for fr in lg.frames
        if fr.queue_max >= 5
    )
    assert msf_full_frames >= 1, "MSF never filled a queue to 5"
    print(f"\nACCEPTANCE 7 queue trend: PASS "
          f"(EMSF worst avg {emsf_worst:.2f}, "
          f"MSF node-frames at 5: {msf_full_frames})")


# ---------------------------------------------------------------------
# criterion 8: determinism of CSV outputs


def test_criterion_8_determinism(tmp_path):
    scenario = parse_scenario(builtin_scenario_path("latency_trace"))
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run_scenario(scenario, out_a, replicas=1, quiet=True)
    run_scenario(scenario, out_b, replicas=1, quiet=True)
    files_a = sorted(
        p.relative_to(out_a) for p in out_a.rglob("*") if p.is_file()
    )
    files_b = sorted(
        p.relative_to(out_b) for p in out_b.rglob("*") if p.is_file()
    )
    assert files_a == files_b
    for rel in files_a:
        assert (out_a / rel).read_bytes() == (out_b / rel).read_bytes(), (
            f"{rel} differs between identical runs"
        )
    print(f"\nACCEPTANCE 8 determinism: PASS "
          f"({len(files_a)} files byte-identical)")


# ---------------------------------------------------------------------
# criterion 9: fixed point under constant traffic


def test_criterion_9_fixed_point():
    start = time.perf_counter()
    cfg = SimConfig(
        node_count=2,
        slotframe_count=60,
        topology_kind="chain",
        traffic=TrafficProfile(event_model=Constant(3)),
        scheduling_function="emsf",
        link=LinkModel(default_pdr=1.0),
        seed=1,
    )
    sim = Simulation(cfg)
    size = cfg.slotframe_params.slotframe_size
    alloc_by_frame = []
    for frame in range(cfg.slotframe_count):
        sim.slotframe_boundary(frame)
        for _ in range(size):
            sim.step_slot(sim.asn)
            sim.asn += 1
        alloc_by_frame.append(sim.nodes[1].allocated_toward_parent())
    sim._finalize()

    beta = cfg.beta
    assert alloc_by_frame[beta + 2] == 3, (
        f"allocation {alloc_by_frame[beta + 2]} != 3 at slotframe beta+2"
    )
    assert all(a == 3 for a in alloc_by_frame[beta + 2:])
    last_tx_frame = max(r.asn // size for r in sim.log.sixp)
    assert last_tx_frame <= beta + 2, (
        f"6P transaction as late as slotframe {last_tx_frame}"
    )
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print(f"\nACCEPTANCE 9 fixed point: PASS "
          f"(allocation 3 from slotframe "
          f"{alloc_by_frame.index(3)}, last 6P at {last_tx_frame}, "
          f"{elapsed:.2f}s)")
