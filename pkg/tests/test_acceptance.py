"""Acceptance criteria at their stated tolerances.

Each test records a one-line verdict printed in the terminal summary and then
asserts it, so a red criterion shows both as a failure and as a FAIL line.
"""
import math
import time

import numpy as np
import pytest

from _support import matrix_with_singular_values, planted_market, uniform_interior_instance
from qarb.arbitrage import EnsembleSpec, complexity_experiment, ensemble_matrices, screen_fixed
from qarb.cli import main
from qarb.data import SynthSpec, synth
from qarb.econometrics import adf_test, calibrate, engle_granger, error_propagation_probe
from qarb.embedding import build_embedding, exact_condition_number
from qarb.qcnc import CncConfig, Comparator
from qarb.qsim import StateVector
from qarb.vtpa import VtpaConfig, is_prefix_pattern, vtpa

TREND_TARGETS = {0.01: -3.96, 0.05: -3.41, 0.10: -3.13}


def _two_vector_state(emb, weight_small):
    """Column-block state with ``weight_small`` on the smallest right singular vector, rest on the largest."""
    _, _, Vt = np.linalg.svd(emb.block, full_matrices=False)
    amps = np.zeros(emb.dim)
    amps[emb.n_rows:emb.n_rows + emb.n_cols] = (math.sqrt(weight_small) * Vt[-1]
                                                + math.sqrt(1 - weight_small) * Vt[0])
    return StateVector(amps, emb.n_qubits)


def test_criterion_1_qcnc_soundness_and_completeness(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    violations = flagged = 0
    runs = 10_000
    for i in range(runs):
        d = int(rng.integers(2, 5))
        n_rows = int(rng.integers(d, 16 - d + 1))  # embedding dimension stays <= 16
        kappa = float(np.exp(rng.uniform(0, np.log(64))))
        s = np.r_[1.0, rng.uniform(1 / kappa, 1, d - 2), 1 / kappa] if d > 1 else np.ones(1)
        X = matrix_with_singular_values(s, n_rows, seed=i)
        kappa0 = float(2 ** rng.integers(1, 5))
        cfg = CncConfig(kappa0, epsilon=1e-3)
        out = Comparator(build_embedding(X)).run(cfg, rng)
        if out.flag:
            flagged += 1
            bound = kappa0 / (1 + kappa0 * 2.0 ** -cfg.phase_bits)
            violations += exact_condition_number(X).kappa < bound

    rates = {}
    for kappa0 in (2.0, 4.0, 8.0):
        emb = build_embedding(matrix_with_singular_values([1.0, 0.8, 0.6, 1 / (2 * kappa0)], 8, seed=int(kappa0)))
        comp = Comparator(emb, _two_vector_state(emb, 1 / (2 * kappa0)))
        cfg = CncConfig(kappa0, epsilon=1e-3)
        rates[kappa0] = np.mean([comp.run(cfg, np.random.default_rng([7, int(kappa0), s])).flag
                                 for s in range(3000)])
    floor = 1 - math.exp(-1) - 0.03
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and min(rates.values()) >= floor and elapsed < 300
    detail = (f"{violations} soundness violations in {runs} runs ({flagged} flagged); detection at 2*kappa0 "
              + ", ".join(f"k0={int(k)}: {r:.3f}" for k, r in rates.items())
              + f" (floor {floor:.3f}); {elapsed:.0f}s")
    verdict("criterion 1 QCNC soundness/completeness", ok, detail)
    assert ok, detail


def test_criterion_2_single_round_success(verdict):
    lines, ok = [], True
    for kappa0 in (2, 4, 8):
        kappa = 2 * kappa0
        cfg = CncConfig(kappa0, epsilon=0.01, phase_bits=math.ceil(math.log2(kappa0)) + 8)
        default = CncConfig(kappa0, epsilon=0.01)
        hits = hits_default = 0
        for i in range(1000):
            comp = Comparator(*uniform_interior_instance(kappa, d=8, seed=i, stratified=True))
            rng = np.random.default_rng([kappa0, i])
            hits += sum(comp.sample_round(cfg, rng) < cfg.threshold for _ in range(10))
            hits_default += sum(comp.sample_round(default, rng) < default.threshold for _ in range(10))
        rate = hits / 10_000
        predicted = (1 / kappa0 - 1 / kappa) / (1 - 1 / kappa)
        good = rate >= 1 / (2 * kappa0) and abs(rate / predicted - 1) <= 0.2
        ok &= good
        lines.append(f"k0={kappa0}: {rate:.4f} vs floor {1 / (2 * kappa0):.4f}, uniform {predicted:.4f} "
                     f"[{cfg.phase_bits} bits; default {default.phase_bits} bits gives {hits_default / 10_000:.4f}]")
    detail = "; ".join(lines)
    verdict("criterion 2 single-round success bound", ok, detail)
    assert ok, detail


def test_criterion_3_clock_structure(verdict):
    epsilon = 0.01
    spec = EnsembleSpec(n_rows=8, d=4, kappa_range=(1.2, 64.0), trials=3000, seed=3)
    cfg = VtpaConfig(32, epsilon, boost=3.0)
    non_prefix = stopped = outside = 0
    for i, (X, kappa) in enumerate(ensemble_matrices(spec)):
        out = vtpa(build_embedding(X), "uniform", cfg, np.random.default_rng([3, i]))
        non_prefix += not is_prefix_pattern(out.clock_pattern)
        if out.stopped:
            stopped += 1
            lo, hi = out.kappa_interval
            outside += not (lo / 2 <= kappa < hi * 2)
    contained = 1 - outside / stopped
    ok = non_prefix == 0 and contained >= 1 - 3 * epsilon
    detail = (f"{non_prefix} non-prefix patterns in {spec.trials} runs; interval (+-1 band) contains oracle kappa "
              f"in {contained:.4f} of {stopped} stopped runs (need >= {1 - 3 * epsilon:.2f})")
    verdict("criterion 3 VTPA clock structure", ok, detail)
    assert ok, detail


def test_criterion_4_scaling(verdict):
    rep = complexity_experiment(EnsembleSpec(n_rows=8, d=4, trials=200, seed=4, epsilon=0.1), (4, 8, 16, 32))
    d_rep = complexity_experiment(EnsembleSpec(n_rows=16, d=4, trials=200, seed=4, epsilon=0.1, spectrum="clustered"),
                                  (16,), d_grid=(2, 4, 8), d_kappa0=16)["d_scaling"]
    slope, dev = rep["slope"], d_rep["max_relative_deviation"]
    ok = abs(slope - 2) <= 0.3 and dev <= 0.2
    detail = (f"slope vs log kappa0 = {slope:.3f} (2 +- 0.3); cost ratio over d=2,4,8 "
              f"{[round(r, 3) for r in d_rep['cost_ratio']]} vs sqrt(d) "
              f"{[round(r, 3) for r in d_rep['sqrt_d_ratio']]}, max deviation {dev:.1%} (<= 20%)")
    verdict("criterion 4 average-cost scaling", ok, detail)
    assert ok, detail


@pytest.mark.slow
def test_criterion_5_adf_calibration(verdict):
    n = 1000
    first = calibrate((n,), 100_000, seed=51, trends=(True,))["values"]["ct"][str(n)]
    second = calibrate((n,), 200_000, seed=52, trends=(True,))["values"]["ct"][str(n)]
    levels = (0.01, 0.05, 0.10)
    close = all(abs(a - TREND_TARGETS[q]) <= 0.05 and abs(b - TREND_TARGETS[q]) <= 0.05
                and abs(a - b) <= 0.05 for q, a, b in zip(levels, first, second))
    rejected = sum(adf_test(np.cumsum(np.random.default_rng([5, s]).standard_normal(250)), 1).rejects(0.05)
                   for s in range(10_000))
    rate = rejected / 10_000
    ok = close and 0.03 <= rate <= 0.07
    detail = (f"n={n} 1e5 trials {[round(v, 3) for v in first]}, 2e5 trials {[round(v, 3) for v in second]} "
              f"vs {list(TREND_TARGETS.values())} +- 0.05; random-walk rejection at 5% = {rate:.4f}")
    verdict("criterion 5 ADF calibration", ok, detail)
    assert ok, detail


@pytest.mark.slow
def test_criterion_6_engle_granger(verdict):
    recovered = false_pos = 0
    for seed in range(1000):
        panel = synth(SynthSpec("planted", T=1000, beta=(2.0,), phi=0.5, sigma_noise=0.05, seed=seed))
        res = engle_granger(panel.prices[:, 1:], panel.prices[:, 0])
        recovered += res.flag and abs(res.beta[0] - 2.0) < 0.05
        walks = synth(SynthSpec("random_walk", T=1000, J=2, seed=seed))
        false_pos += engle_granger(walks.prices[:, 1:], walks.prices[:, 0]).flag
    ok = recovered >= 900 and false_pos <= 100
    detail = f"planted recovered in {recovered}/1000 seeds (>= 900); independent walks flagged {false_pos}/1000 (<= 100)"
    verdict("criterion 6 Engle-Granger recovery", ok, detail)
    assert ok, detail


def test_criterion_7_error_chain(verdict):
    panel = synth(SynthSpec("planted", T=500, beta=(2.0, 1.0), phi=0.5, sigma_noise=0.05, seed=7))
    rep = error_propagation_probe(panel.prices[:, 1:], panel.prices[:, 0], replicates=20, seed=7)
    lo, hi = rep.exponent_ci
    ok = rep.chain_holds and rep.converged
    detail = (f"chain bounds held on {len(rep.runs)}/{len(rep.runs)} runs; exponent {rep.exponent:.3f} "
              f"CI95 [{lo:.3f}, {hi:.3f}]; eps^2 hypothesis {'consistent' if rep.quadratic_consistent else 'rejected'}, "
              f"linear {'consistent' if rep.linear_consistent else 'rejected'}")
    if not rep.chain_holds:
        detail = f"chain violated on {sum(not r.chain_holds for r in rep.runs)} runs; " + detail
    verdict("criterion 7 error-propagation chain", ok, detail)
    assert ok, detail


def test_criterion_8_planted_screen(verdict):
    t0 = time.perf_counter()
    found = 0
    for seed in range(100):
        panel, pool, target = planted_market(seed)
        assert len(pool) == 50
        found += target.key in screen_fixed(pool, panel, 16, rng_seed=seed).survivor_keys
    elapsed = time.perf_counter() - t0
    ok = found >= 90 and elapsed < 600
    detail = f"planted triple surfaced in {found}/100 seeds (>= 90); {elapsed:.1f}s (< 600s)"
    verdict("criterion 8 end-to-end planted screen", ok, detail)
    assert ok, detail


def test_criterion_9_cli_determinism(verdict, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("QARB_SEED", raising=False)
    assert main(["synth", "--kind", "planted", "--T", "300", "--beta", "1", "1", "--seed", "3", "--out", "p.csv"]) == 0
    assert main(["ingest", "--panel", "p.csv", "--pool-d", "2", "--pool-out", "pool.json"]) == 0
    commands = {
        "synth": ["synth", "--kind", "walk", "--J", "4", "--seed", "9"],
        "ingest": ["ingest", "--panel", "p.csv", "--pool-d", "2", "--pool-out", "pool2.json"],
        "preselect": ["preselect", "--panel", "p.csv", "--pool", "pool.json", "--kappa0", "16", "--oracle"],
        "cointegrate": ["cointegrate", "--panel", "p.csv", "--stocks", "0,1,2", "--qlr-epsilon", "1e-4"],
        "screen-fixed": ["screen-fixed", "--pool", "pool.json", "--panel", "p.csv", "--kappa0", "8", "--threads", "2"],
        "screen-progressive": ["screen-progressive", "--pool", "pool.json", "--panel", "p.csv", "--k", "1"],
        "calibrate-df": ["calibrate-df", "--n", "50", "--trials", "2000"],
        "scaling": ["scaling", "--kappa0", "4", "8", "--trials", "20", "--d-grid", "2", "4"],
    }
    differing = []
    for name, argv in commands.items():
        outs = []
        for rep in range(2):
            out = f"{name}-{rep}.out"
            assert main([*argv, "--seed", "5", "--out", out]) == 0, name
            outs.append((tmp_path / out).read_bytes())
        if outs[0] != outs[1]:
            differing.append(name)
    ok = not differing
    detail = f"{len(commands) - len(differing)}/{len(commands)} subcommands byte-identical on rerun" + (
        f"; differing: {differing}" if differing else "")
    verdict("criterion 9 CLI determinism", ok, detail)
    assert ok, detail
