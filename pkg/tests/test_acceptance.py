"""The ten acceptance criteria at their stated tolerances and time budgets.

Each test prints one ``criterion N: PASS|FAIL`` line to the terminal (even
under output capture) and then asserts.
"""

import itertools
import math
import random
import time

import numpy as np
import pytest

from relay_dmt.channel import (
    build_equivalent_channel,
    sample_realization,
    sample_unitaries,
    two_hop_equivalent_channel,
)
from relay_dmt.cli import main
from relay_dmt.dmt import (
    dmt_af_mac,
    dmt_ddf_mac,
    dmt_rs_ni_exact_curve,
    dmt_two_hop,
    r_grid,
    verify_dual_flow,
)
from relay_dmt.outage import (
    ExperimentConfig,
    TrialPolicy,
    estimate_diversity,
    records_to_csv,
    run_sweep,
    simulate_af_mac_single_relay,
    simulate_ddf_mac_single_relay,
)
from relay_dmt.rng import stream
from relay_dmt.scheduling import build_sequential_maxflow_schedule, build_two_hop_schedule
from relay_dmt.topology import (
    max_flow_path_decomposition,
    min_cut,
    min_cut_exhaustive,
    parse_topology,
    simple_paths,
    two_hop_topology,
)

from conftest import random_graph, random_schedule
from oracles import brute_exact


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, elapsed, budget):
        ok = ok and elapsed <= budget
        with capsys.disabled():
            limit = "no budget" if math.isinf(budget) else f"budget {budget:g}s"
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail} [{elapsed:.1f}s / {limit}]")
        return ok
    return emit


def _relay_ring(K):
    return [(k, k % K + 1) for k in range(1, K)] if K > 1 else []


# -- 1 -------------------------------------------------------------------------

def test_criterion_1_two_hop_closed_form(report):
    t0 = time.perf_counter()
    worst = 0.0
    ok = True
    for K, B in itertools.product((2, 3, 4), (1, 2, 4)):
        for r in r_grid(0.01, 1.05):
            want = max(0.0, K * (1 - r) - r / B)
            worst = max(worst, abs(dmt_two_hop(K, B, r) - want))
        rz = B * K / (B * K + 1)
        ok &= dmt_two_hop(K, B, 0.0) == K
        ok &= dmt_two_hop(K, B, rz) == 0.0 and dmt_two_hop(K, B, rz - 1e-6) > 0
    ok &= worst <= 1e-12
    el = time.perf_counter() - t0
    assert report(1, ok, f"max |err| = {worst:.2e}, d(0) = K and zero at BK/(BK+1)", el, 1)


# -- 2 -------------------------------------------------------------------------

def test_criterion_2_af_ddf_curves(report):
    t0 = time.perf_counter()
    worst = 0.0
    ordered = True
    for r in r_grid(0.01, 0.5):
        s = 2 * r
        af, ddf = dmt_af_mac((r, r)), dmt_ddf_mac((r, r))
        worst = max(worst, abs(af - max(0.0, 1 - 2 * s)))
        worst = max(worst, abs(ddf - (max(0.0, 1 - s / (1 - s)) if s < 1 else 0.0)))
        ordered &= af <= ddf
    el = time.perf_counter() - t0
    assert report(2, worst <= 1e-12 and ordered,
                  f"max |err| = {worst:.2e}, AF <= DDF on grid: {ordered}", el, 1)


# -- 3 -------------------------------------------------------------------------

def test_criterion_3_exact_vs_oracle(report):
    t0 = time.perf_counter()
    rnd = random.Random(2024)
    worst = 0.0
    count = 0
    while count < 25:
        g = random_graph(rnd, n_min=4, n_max=6, p=0.5)
        if len(g.edges) > 8:
            continue
        options = list(simple_paths(g))
        paths = [rnd.choice(options) for _ in range(rnd.randint(1, 4))]
        S = rnd.randint(len(paths), sum(p.length for p in paths) + 2)
        rs = [0.0, rnd.uniform(0, len(paths) / S), rnd.uniform(0, 1)]
        for r, d in zip(rs, dmt_rs_ni_exact_curve(g, paths, S, rs)):
            worst = max(worst, abs(d - brute_exact(paths, S, r)))
        count += 1
    rr = 0.0
    for K, B in itertools.product((2, 3, 4), (1, 2, 3)):
        sch = build_two_hop_schedule(K, B)
        rs = r_grid(0.01, 1.05)
        got = dmt_rs_ni_exact_curve(None, sch.paths, sch.slot_count, rs)
        rr = max(rr, max(abs(d - dmt_two_hop(K, B, r)) for r, d in zip(rs, got)))
    el = time.perf_counter() - t0
    assert report(3, worst <= 1e-9 and rr <= 1e-9,
                  f"{count} random instances max |err| = {worst:.1e}; round-robin max |err| = {rr:.1e}",
                  el, 30)


# -- 4 -------------------------------------------------------------------------

def test_criterion_4_graph_duality(report):
    t0 = time.perf_counter()
    rnd = random.Random(77)
    bad = 0
    connected = 0
    for _ in range(200):
        g = random_graph(rnd, n_max=10, max_ant=3, connected=rnd.random() < 0.8)
        w, witness = min_cut(g)
        bad += w != min_cut_exhaustive(g)[0]
        if w > 0:
            connected += 1
            paths = max_flow_path_decomposition(g)
            bad += len(paths) != w
            bad += not verify_dual_flow(g, paths).ok
    el = time.perf_counter() - t0
    assert report(4, bad == 0, f"200 graphs ({connected} connected), {bad} mismatches", el, 30)


# -- 5 -------------------------------------------------------------------------

def test_criterion_5_equivalent_channel_oracle(report):
    t0 = time.perf_counter()
    rng = stream(55)
    rnd = random.Random(55)
    worst = 0.0
    for n in range(1000):
        K, B = rnd.randint(1, 4), rnd.randint(1, 3)
        g = two_hop_topology(K, _relay_ring(K))
        sch = build_two_hop_schedule(K, B)
        P = 10 ** rnd.uniform(0, 4)
        real = sample_realization(g, rng)
        a = build_equivalent_channel(g, sch, real, None, P)
        b = two_hop_equivalent_channel(K, B, real, P)
        for x, y in ((a.H_T, b.H_T), (a.Q, b.Q), (a.P_n, b.P_n)):
            worst = max(worst, float(np.max(np.abs(x - y))))
    el = time.perf_counter() - t0
    assert report(5, worst <= 1e-10, f"1000 realizations, max |builder - closed form| = {worst:.1e}",
                  el, 60)


# -- 6 -------------------------------------------------------------------------

def test_criterion_6_structural_invariants(report):
    t0 = time.perf_counter()
    rnd = random.Random(66)
    rng = stream(66)
    builds = 0
    fails = []
    while builds < 10_000:
        g = random_graph(rnd, n_max=7, max_ant=2)
        sch = random_schedule(rnd, g)
        for _ in range(25):
            real = sample_realization(g, rng)
            u = sample_unitaries(g, sch, rng, phases=True)
            P = 10 ** rnd.uniform(-1, 5)
            eq = build_equivalent_channel(g, sch, real, u, P)
            builds += 1
            for i, i2 in itertools.product(range(1, sch.L + 1), repeat=2):
                if i2 > i and np.any(eq.block(i, i2) != 0):
                    fails.append("upper block")
            if np.linalg.eigvalsh(eq.P_n)[0] < 1 - 1e-10:
                fails.append("P_n < I")
            if any(not (0 < a <= 1) for a in eq.alphas.values()):
                fails.append("alpha")
            for U in u.values():
                if np.max(np.abs(U @ U.conj().T - np.eye(len(U)))) > 1e-10:
                    fails.append("unitary")
    el = time.perf_counter() - t0
    assert report(6, not fails, f"{builds} builds, {len(fails)} violations", el, 300)


# -- 7 -------------------------------------------------------------------------

def test_criterion_7_two_hop_slope(report):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(topology=two_hop_topology(2), schedule=build_two_hop_schedule(2, 1),
                           fixed_rates=(1.0,), snr_grid_db=(20.0, 25.0, 30.0, 35.0, 40.0),
                           policy=TrialPolicy(1000, 60_000_000, 200), seed=7, crn=True)
    recs = run_sweep(cfg)
    fit = estimate_diversity(recs, min_events=200)
    el = time.perf_counter() - t0
    print(records_to_csv(recs, fit))
    ok = 1.6 <= fit.slope <= 2.4 and fit.n_points == 5
    assert report(7, ok, f"d_hat = {fit.slope:.3f} +/- {fit.stderr:.3f} over {fit.snr_window} dB "
                         f"(window [1.6, 2.4], >= 200 events/point)", el, 600)


# -- 8 -------------------------------------------------------------------------

def test_criterion_8_ddf_af_slopes(report):
    t0 = time.perf_counter()
    pol = TrialPolicy(1000, 50_000_000, 200)
    ddf = [simulate_ddf_mac_single_relay(1, 0.25, s, pol, seed=8)
           for s in (20.0, 25.0, 30.0, 35.0, 40.0, 45.0)]
    t_ddf = time.perf_counter() - t0
    af = [simulate_af_mac_single_relay(2, [0.3, 0.3], s, pol, seed=8)
          for s in (20.0, 25.0, 30.0, 35.0, 40.0)]
    t_af = time.perf_counter() - t0 - t_ddf
    d1 = estimate_diversity(ddf, min_events=200)
    d2 = estimate_diversity(af, min_events=200)
    print(records_to_csv(ddf, d1))
    print(records_to_csv(af, d2))
    ok = 0.45 <= d1.slope <= 0.90 and abs(d2.slope) < 0.15 and t_ddf <= 600 and t_af <= 600
    assert report(8, ok, f"DDF M=1 r=0.25 d_hat = {d1.slope:.3f} (window [0.45, 0.90]); "
                         f"AF M=2 r=0.3 d_hat = {d2.slope:.3f} (|d_hat| < 0.15)",
                  max(t_ddf, t_af), 600)


# -- 9 -------------------------------------------------------------------------

def test_criterion_9_multi_antenna_slope(report):
    # at 40 dB (p ~ 4e-7) 200 events do not fit the budget; that point is
    # reported but stays below target and so out of the fit
    t0 = time.perf_counter()
    g = parse_topology("nodes 3; ant 0:2 1:1 2:2; edges 0-1 1-2; src 0; sink 2")
    sch = build_sequential_maxflow_schedule(g)
    cfg = ExperimentConfig(topology=g, schedule=sch, fixed_rates=(1.0,),
                           snr_grid_db=(20.0, 25.0, 30.0, 35.0, 40.0),
                           policy=TrialPolicy(1000, 60_000_000, 200), seed=9)
    recs = run_sweep(cfg)
    fit = estimate_diversity(recs, min_events=200)
    el = time.perf_counter() - t0
    print(records_to_csv(recs, fit))
    ok = min_cut(g)[0] == 2 and 1.5 <= fit.slope <= 2.5
    assert report(9, ok, f"d_G = {min_cut(g)[0]}, d_hat = {fit.slope:.3f} +/- {fit.stderr:.3f} over "
                         f"{fit.snr_window} dB (window [1.5, 2.5], >= 200 events/fitted point)", el, 600)


# -- 10 ------------------------------------------------------------------------

CLI_RUNS = [
    ["--K", "2", "--B", "1", "--R", "1", "--snr", "10:30:5"],
    ["--mode", "mac", "--K", "2", "--M", "2", "--sym-r", "0.1", "--snr", "10:20:5"],
    ["--mode", "af", "--M", "2", "--sym-r", "0.2", "--snr", "10:30:10"],
    ["--mode", "ddf", "--M", "1", "--r", "0.25", "--snr", "10:30:10", "--fit"],
]


def test_criterion_10_determinism(report, tmp_path, capsys):
    t0 = time.perf_counter()
    same = True
    for n, run in enumerate(CLI_RUNS):
        outs = []
        for w in (1, 2, 3):
            d = tmp_path / f"{n}-{w}"
            code = main(["simulate", *run, "--seed", "10", "--events", "100",
                         "--trials-max", "400000", "--workers", str(w), "--out", str(d), "--no-plot"])
            assert code == 0
            outs.append((d / "outage.csv").read_bytes())
        same &= len(set(outs)) == 1
    capsys.readouterr()
    el = time.perf_counter() - t0
    assert report(10, same, f"{len(CLI_RUNS)} simulate commands x workers 1/2/3 byte-identical: {same}",
                  el, math.inf)
