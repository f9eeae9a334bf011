import math

import numpy as np
import pytest

from _support import matrix_with_singular_values, right_vector_state
from qarb.embedding import build_embedding, exact_condition_number
from qarb.errors import ConfigError, DegenerateInput, ProtocolViolation
from qarb.qcnc import Comparator, qcnc, qcnc_cost
from qarb.qsim import make_state
from qarb.vtpa import (
    Cascade,
    CoherentCascade,
    VtpaConfig,
    band_of,
    cumulative_envelope,
    cumulative_queries,
    is_prefix_pattern,
    measured_distribution,
    query_ledger,
    vtpa,
    with_true_kappa,
)


class TestConfig:
    @pytest.mark.parametrize("kappa0,M", [(2, 1), (3, 2), (4, 2), (5, 3), (16, 4), (17, 5)])
    def test_M(self, kappa0, M):
        cfg = VtpaConfig(kappa0)
        assert cfg.M == M
        assert 2 ** cfg.M >= kappa0 > 2 ** (cfg.M - 1)

    def test_stage_config(self):
        s = VtpaConfig(16, boost=2).stage_config(3)
        assert (s.kappa0, s.repetitions, s.phase_bits) == (8, 32, 5)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            VtpaConfig(1)


def test_prefix_helper():
    assert is_prefix_pattern((1, 1, 0, 0)) and is_prefix_pattern((0, 0)) and is_prefix_pattern((1, 1))
    assert not is_prefix_pattern((0, 1))


def test_well_conditioned_stops_early():
    emb = build_embedding(matrix_with_singular_values([1.0, 0.9, 1 / 1.2], 5, seed=1))
    for seed in range(100):
        out = vtpa(emb, "uniform", VtpaConfig(16), seed)
        assert out.stopped
        assert out.clock_pattern in ((0, 0, 0, 0), (1, 0, 0, 0))
        assert 1 <= out.kappa_interval[0] and out.kappa_interval[1] <= 4


def test_ill_conditioned_passes():
    emb = build_embedding(matrix_with_singular_values([1.0, 1 / 40, 1 / 40], 4, seed=2))
    passed = [not vtpa(emb, "uniform", VtpaConfig(16, epsilon=1e-3), s).stopped for s in range(200)]
    assert np.mean(passed) > 0.6
    out = vtpa(emb, "uniform", VtpaConfig(16, epsilon=1e-3, boost=4), 0)
    assert not out.stopped and out.kappa_interval == (16.0, math.inf)


def test_single_stage_matches_qcnc():
    rng = np.random.default_rng(3)
    cfg = VtpaConfig(2)
    for i in range(100):
        X = rng.standard_normal((4, 3))
        emb = build_embedding(X)
        out = vtpa(emb, "uniform", cfg, i)
        assert out.stopped == (not qcnc(emb, "uniform", cfg.stage_config(1), i).flag)


def test_prefix_structure_over_runs():
    rng = np.random.default_rng(4)
    for i in range(300):
        X = rng.standard_normal((6, 3)) @ np.diag([1, 1, 10 ** -rng.uniform(0, 2)])
        out = vtpa(build_embedding(X), "uniform", VtpaConfig(32), i)
        assert is_prefix_pattern(out.clock_pattern)
        assert out.stopped == (out.clock_pattern != (1,) * 5)


def test_out_of_order_stage():
    emb = build_embedding(np.eye(2))
    casc = Cascade(emb, "uniform", VtpaConfig(8))
    with pytest.raises(ProtocolViolation):
        casc.stage(2)
    coh = CoherentCascade(emb, make_state([0, 0, 1, 0]), 2)
    coh.stage(1)
    with pytest.raises(ProtocolViolation):
        coh.stage(1)


class TestCoherentCascade:
    def test_identity_flags_at_stage_one(self):
        emb = build_embedding(np.eye(2))
        dist = CoherentCascade(emb, make_state([0, 0, 1, 1]), 2).run().register_distribution()
        assert dist == pytest.approx({((0, 0), 1): 1.0})

    def test_ill_conditioned_final_state(self):
        emb = build_embedding(np.diag([1.0, 1 / 64]))
        psi = make_state([0, 0, 0, 1])  # right singular vector of the small value
        dist = CoherentCascade(emb, psi, 2).run().register_distribution()
        # one phase estimation per stage, so a little leakage into early stops is expected
        assert dist.get(((1, 1), 0), 0) > 0.95

    @pytest.mark.parametrize("s,M,extra", [([1.0, 0.4], 2, 2), ([1.0, 0.3, 0.1], 3, 1), ([1.0, 0.6], 3, 2)])
    def test_coherent_equals_measured(self, s, M, extra):
        emb = build_embedding(matrix_with_singular_values(s, len(s), seed=7))
        psi, _ = right_vector_state(emb, range(len(s)))
        coherent = CoherentCascade(emb, psi, M, extra).run().register_distribution()
        measured = measured_distribution(emb, psi, M, extra)
        assert set(coherent) == set(measured)
        for k in coherent:
            assert coherent[k] == pytest.approx(measured[k], abs=1e-10)
        for (pattern, flag), p in coherent.items():
            assert is_prefix_pattern(pattern)
            assert flag == int(pattern != (1,) * M)

    def test_stage_superposition_structure(self):
        # kappa in [2, 4]: after stage 2 only U_1 with F=1 and U_2 with F=0 remain, plus the U_0 stop
        emb = build_embedding(np.diag([1.0, 0.3]))
        psi = make_state([0, 0, 1, 1])
        coh = CoherentCascade(emb, psi, 2)
        coh.stage(1)
        coh.stage(2)
        for (pattern, flag) in coh.register_distribution():
            assert (pattern, flag) in {((0, 0), 1), ((1, 0), 1), ((1, 1), 0)}


class TestLedger:
    def test_single_band_single_matrix(self):
        emb = build_embedding(np.eye(2))
        out = with_true_kappa(vtpa(emb, "uniform", VtpaConfig(2, epsilon=0.01), 0), 1.0)
        led = query_ledger([out])
        assert led["per_kappa0"][2.0]["bands"][1]["T_j"] == pytest.approx(qcnc_cost(2, 0.01, 2))
        assert led["slope"] is None

    def test_envelope_for_equal_bands(self):
        outs = []
        for j, kappa in zip((1, 2, 3), (1.5, 3.0, 6.0)):
            emb = build_embedding(matrix_with_singular_values([1.0, 1 / kappa], 3, seed=j))
            for seed in range(20):
                outs.append(with_true_kappa(vtpa(emb, "uniform", VtpaConfig(8, epsilon=0.05), seed), kappa))
        led = query_ledger(outs)["per_kappa0"][8.0]
        assert {b: v["P_j"] for b, v in led["bands"].items()} == pytest.approx({1: 1 / 3, 2: 1 / 3, 3: 1 / 3})
        assert led["T_avg"] <= led["envelope"]

    def test_cumulative_monotone_and_enveloped(self):
        for j in range(1, 10):
            assert cumulative_queries(j, 0.01, 4) < cumulative_queries(j + 1, 0.01, 4)
            assert cumulative_queries(j, 0.01, 4) <= cumulative_envelope(j, 0.01, 4)

    def test_band_assignment(self):
        assert band_of(1.0) == 1 and band_of(1.99) == 1 and band_of(2.0) == 2 and band_of(4.0) == 3

    def test_empty(self):
        with pytest.raises(DegenerateInput):
            query_ledger([])

    def test_missing_true_kappa(self):
        out = vtpa(build_embedding(np.eye(2)), "uniform", VtpaConfig(4), 0)
        with pytest.raises(ConfigError):
            query_ledger([out])


def test_spent_never_exceeds_total():
    emb = build_embedding(matrix_with_singular_values([1.0, 0.1], 2, seed=0))
    for seed in range(50):
        out = vtpa(emb, "uniform", VtpaConfig(16), seed)
        assert out.spent_queries <= out.total_queries + 1e-9


def test_comparator_reuse_is_equivalent():
    emb = build_embedding(matrix_with_singular_values([1.0, 0.2, 0.05], 4, seed=9))
    comp = Comparator(emb)
    assert vtpa(emb, "uniform", VtpaConfig(16), 5) == vtpa(emb, "uniform", VtpaConfig(16), 5, comparator=comp)


def test_low_kappa_rarely_passes():
    # exact kappa < kappa0 / 2 should survive at most eps * M plus resolution slack
    emb = build_embedding(matrix_with_singular_values([1.0, 0.5, 0.2], 4, seed=10))
    assert exact_condition_number(emb.block).kappa < 8
    cfg = VtpaConfig(16, epsilon=1e-3)
    survived = np.mean([not vtpa(emb, "uniform", cfg, s).stopped for s in range(500)])
    assert survived <= cfg.epsilon * cfg.M + 0.01
