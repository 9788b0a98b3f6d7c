"""Analytic kernels, Monte Carlo estimators, power arithmetic, grid search."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from wrxdbb import (
    ANALYTIC_ASSUMPTIONS,
    ROC_CSV_HEADER,
    SURFACE_CSV_HEADER,
    BeaconSpec,
    CostModel,
    DetectorConfig,
    Hypothesis,
    OffsetPolicy,
    PowerPoint,
    RocPoint,
    ScenarioConfig,
    analytic_roc,
    binom_tail,
    chip_error_probs,
    mc_estimate,
    noise_chip_one_prob,
    optimize_params,
    reference_beacon_spec,
    power,
    resolve_gamma,
    roc_sweep,
    roc_to_csv,
    surface_to_csv,
    two_class_tail,
    wilson_ci,
)

NODE = "10110000"


def reference_cfg(gamma=229):
    return DetectorConfig.from_beacon(reference_beacon_spec(), NODE, gamma)


def reduced_cfg(gamma=22):
    spec = BeaconSpec(M=15, K=7, L=4, kappa=2, manchester=False)
    return DetectorConfig.from_beacon(spec, "1011", gamma)


def enumerated_tails(n, p):
    """Exact P(X >= k) for all k by brute-force outcome enumeration.

    Counts outcomes per success total by iterating all 2^n sample paths,
    deliberately not using binomial coefficients, then weights them with
    exact rational arithmetic.
    """
    counts = [0] * (n + 1)
    for v in range(2**n):
        counts[bin(v).count("1")] += 1
    pf = Fraction(p)
    qf = 1 - pf
    masses = [counts[i] * pf**i * qf ** (n - i) for i in range(n + 1)]
    return [float(sum(masses[k:])) for k in range(n + 2)]


# ---------------------------------------------------------------- binom_tail


def test_binom_tail_examples():
    assert binom_tail(2, 1, 0.5) == 0.75
    for n, p in ((0, 0.3), (5, 0.0), (9, 1.0), (14, 0.15)):
        assert binom_tail(n, 0, p) == 1.0
    # exact rational summation oracle value for the address-bit error kernel
    assert binom_tail(14, 8, 0.15) == 0.00032763231003315666


def test_binom_tail_matches_enumeration_exactly():
    for n, p in ((1, 0.5), (2, 0.5), (5, 0.25), (8, 0.15), (11, 0.7), (12, 0.15)):
        want = enumerated_tails(n, p)
        for k in range(n + 2):
            assert binom_tail(n, k, p) == want[k]


def test_binom_tail_large_n_against_exact_summation():
    # the log-domain path must track an exact rational reference
    for n, k, p in ((248, 230, 0.85), (248, 200, 0.5), (248, 100, 0.15)):
        pf = Fraction(p)
        exact = float(
            sum(
                math.comb(n, i) * pf**i * (1 - pf) ** (n - i)
                for i in range(k, n + 1)
            )
        )
        assert binom_tail(n, k, p) == pytest.approx(exact, rel=1e-12)


def test_binom_tail_monotonicity():
    vals = [binom_tail(30, k, 0.3) for k in range(32)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    probs = [binom_tail(30, 12, p) for p in np.linspace(0, 1, 21)]
    assert all(a <= b for a, b in zip(probs, probs[1:]))


def test_binom_tail_edges_and_validation():
    assert binom_tail(7, 8, 0.4) == 0.0
    assert binom_tail(7, 3, 0.0) == 0.0
    assert binom_tail(7, 3, 1.0) == 1.0
    with pytest.raises(ValueError, match="n must be >= 0"):
        binom_tail(-1, 0, 0.5)
    with pytest.raises(ValueError, match="outside"):
        binom_tail(5, 7, 0.5)
    with pytest.raises(ValueError, match="outside"):
        binom_tail(5, 2, 1.5)


def test_two_class_tail_matches_enumeration():
    n1, p1, n0, p0 = 5, 0.3, 6, 0.8
    pf1, pf0 = Fraction(p1), Fraction(p0)
    for m in range(n1 + n0 + 2):
        exact = float(
            sum(
                math.comb(n1, i) * pf1**i * (1 - pf1) ** (n1 - i)
                * math.comb(n0, j) * pf0**j * (1 - pf0) ** (n0 - j)
                for i in range(n1 + 1)
                for j in range(n0 + 1)
                if i + j >= m
            )
        )
        assert two_class_tail(n1, p1, n0, p0, m) == pytest.approx(exact, rel=1e-12)
    assert two_class_tail(3, 0.2, 4, 0.9, 0) == 1.0
    assert two_class_tail(3, 0.2, 4, 0.9, 8) == 0.0
    with pytest.raises(ValueError, match="counts must be >= 0"):
        two_class_tail(-1, 0.5, 2, 0.5, 1)


# ----------------------------------------------------------------- intervals


def test_wilson_ci_brackets_estimate():
    for successes, trials in ((0, 50), (50, 50), (1, 1), (17, 100), (499, 1000)):
        lo, hi = wilson_ci(successes, trials)
        phat = successes / trials
        assert 0.0 <= lo <= phat <= hi <= 1.0
    lo, hi = wilson_ci(500, 1000)
    assert lo + hi == pytest.approx(1.0, abs=1e-12)


def test_wilson_ci_validation():
    with pytest.raises(ValueError, match="trials must be >= 1"):
        wilson_ci(0, 0)
    with pytest.raises(ValueError, match="successes outside"):
        wilson_ci(5, 4)


def test_wilson_width_shrinks_with_trials():
    # doubling the trial count shrinks the interval width by about 1/sqrt(2)
    cfg = reduced_cfg()
    scenario = ScenarioConfig(
        hypothesis=Hypothesis.BEACON_PRESENT,
        ber=0.15,
        offset_policy=OffsetPolicy.fixed(0),
        seed=17,
    )
    r1 = mc_estimate(cfg, scenario, 23, 2000, seed=17, aligned_only=True)
    r2 = mc_estimate(cfg, scenario, 23, 4000, seed=18, aligned_only=True)
    ratio = (r2.p_d_hi - r2.p_d_lo) / (r1.p_d_hi - r1.p_d_lo)
    assert 0.6 <= ratio <= 0.83


# -------------------------------------------------------------- chip kernels


def test_chip_error_probs_values():
    e1, e0 = chip_error_probs(4, 0.15)
    assert e1 == pytest.approx(0.01198125, abs=1e-15)
    assert e0 == pytest.approx(0.10951875, abs=1e-15)
    # kappa=2 closed forms: a sent 1 needs both samples flipped; a sent 0
    # errs on the tie, i.e. when any sample flips
    for b in (0.05, 0.15, 0.3):
        e1, e0 = chip_error_probs(2, b)
        assert e1 == pytest.approx(b * b, abs=1e-15)
        assert e0 == pytest.approx(1 - (1 - b) ** 2, abs=1e-15)
    with pytest.raises(ValueError, match="kappa must be >= 1"):
        chip_error_probs(0, 0.1)


def test_noise_chip_one_prob():
    assert noise_chip_one_prob(4) == 0.6875
    assert noise_chip_one_prob(2) == 0.75
    assert noise_chip_one_prob(1) == 0.5


# ------------------------------------------------------------------ RocPoint


def test_roc_point_validation():
    with pytest.raises(ValueError, match=r"outside \[0, 1\]"):
        RocPoint(gamma=1, p_d=1.5)
    with pytest.raises(ValueError, match="does not bracket"):
        RocPoint(gamma=1, p_d=0.5, p_d_lo=0.6, p_d_hi=0.9)


# -------------------------------------------------------------- analytic_roc


def test_analytic_ber_zero_is_certain_detection():
    cfg = reference_cfg()
    scenario = ScenarioConfig(hypothesis=Hypothesis.BEACON_PRESENT, ber=0.0)
    points = analytic_roc(cfg, scenario, [0, 100, 229, 247])
    assert all(pt.p_d == 1.0 for pt in points)
    assert all(pt.p_fa is None for pt in points)
    assert all(pt.method == "analytic" and pt.trials == 0 for pt in points)


def test_analytic_gamma_at_tap_count_kills_everything():
    cfg = reference_cfg()
    noise = ScenarioConfig(hypothesis=Hypothesis.NOISE_ONLY)
    pt = analytic_roc(cfg, noise, [248])[0]
    assert pt.p_d == 0.0
    assert pt.p_fa == 0.0


def test_analytic_monotone_in_gamma():
    cfg = reference_cfg()
    noise = ScenarioConfig(hypothesis=Hypothesis.NOISE_ONLY, ber=0.15)
    points = analytic_roc(cfg, noise, list(range(0, 249, 8)))
    pd = [pt.p_d for pt in points]
    pfa = [pt.p_fa for pt in points]
    assert all(a >= b for a, b in zip(pd, pd[1:]))
    assert all(a >= b for a, b in zip(pfa, pfa[1:]))


def test_analytic_runs_fast():
    cfg = reference_cfg()
    noise = ScenarioConfig(hypothesis=Hypothesis.NOISE_ONLY, ber=0.15)
    start = time.perf_counter()
    analytic_roc(cfg, noise, [180, 199, 216, 229, 240, 248])
    assert time.perf_counter() - start < 1.0


def test_analytic_rejects_chip_noise_mode():
    cfg = reference_cfg()
    scenario = ScenarioConfig(hypothesis=Hypothesis.NOISE_ONLY, noise_mode="chip")
    with pytest.raises(ValueError, match="independent noise mode"):
        analytic_roc(cfg, scenario, [229])


def test_analytic_gamma_validation():
    cfg = reference_cfg()
    noise = ScenarioConfig(hypothesis=Hypothesis.NOISE_ONLY)
    with pytest.raises(ValueError, match="gamma list must not be empty"):
        analytic_roc(cfg, noise, [])
    with pytest.raises(ValueError, match=r"outside \[0, 248\]"):
        analytic_roc(cfg, noise, [300])


def test_analytic_assumptions_documented():
    assert isinstance(ANALYTIC_ASSUMPTIONS, tuple)
    assert len(ANALYTIC_ASSUMPTIONS) >= 2
    assert all(isinstance(s, str) and s for s in ANALYTIC_ASSUMPTIONS)


# --------------------------------------------------------------- mc_estimate


def test_mc_noiseless_beacon_always_wakes():
    cfg = reference_cfg()
    scenario = ScenarioConfig(hypothesis=Hypothesis.BEACON_PRESENT, ber=0.0, seed=3)
    pt = mc_estimate(cfg, scenario, 229, 200, seed=3)
    assert pt.p_d == 1.0
    assert pt.p_fa is None
    assert pt.trials == 200
    assert pt.method == "mc"


def test_mc_same_seed_is_deterministic():
    cfg = reduced_cfg()
    scenario = ScenarioConfig(hypothesis=Hypothesis.BEACON_PRESENT, ber=0.15, seed=9)
    a = mc_estimate(cfg, scenario, 22, 500, seed=9)
    b = mc_estimate(cfg, scenario, 22, 500, seed=9)
    assert (a.p_d, a.p_d_lo, a.p_d_hi, a.trials) == (b.p_d, b.p_d_lo, b.p_d_hi, b.trials)


def test_mc_worker_split_does_not_change_result():
    cfg = reduced_cfg()
    scenario = ScenarioConfig(hypothesis=Hypothesis.BEACON_PRESENT, ber=0.15, seed=4)
    one = mc_estimate(cfg, scenario, 22, 600, seed=4, workers=1)
    two = mc_estimate(cfg, scenario, 22, 600, seed=4, workers=2)
    assert one.p_d == two.p_d
    assert (one.p_d_lo, one.p_d_hi) == (two.p_d_lo, two.p_d_hi)


def test_mc_validation():
    cfg = reduced_cfg()
    beacon = ScenarioConfig(hypothesis=Hypothesis.BEACON_PRESENT, ber=0.1, seed=1)
    with pytest.raises(ValueError, match="trials must be >= 1"):
        mc_estimate(cfg, beacon, 22, 0)
    with pytest.raises(ValueError, match="fixed offset policy"):
        mc_estimate(cfg, beacon, 22, 10, aligned_only=True)


def test_mc_detection_band_at_calibrated_threshold():
    # at the threshold where the analytic preamble detection sits near 97%,
    # a 2*10^4 trial estimate lands inside [0.95, 0.99]
    cfg = reference_cfg(199)
    scenario = ScenarioConfig(hypothesis=Hypothesis.BEACON_PRESENT, ber=0.15, seed=41)
    pt = mc_estimate(cfg, scenario, 199, 20_000, seed=41)
    assert 0.95 <= pt.p_d <= 0.99
    assert pt.p_d_hi - pt.p_d_lo < 0.02


# ----------------------------------------------------------------- roc_sweep


def test_roc_sweep_sorted_and_paired():
    cfg = reduced_cfg()
    noise = ScenarioConfig(hypothesis=Hypothesis.NOISE_ONLY, seed=5)
    points = roc_sweep(cfg, noise, [22, 18], trials=400, seed=5, method="both")
    assert [(pt.gamma, pt.method) for pt in points] == [
        (18, "analytic"), (18, "mc"), (22, "analytic"), (22, "mc"),
    ]
    mc = {pt.gamma: pt for pt in points if pt.method == "mc"}
    # paired-sample monotonicity: stricter threshold, same streams
    assert mc[18].p_fa >= mc[22].p_fa


def test_roc_sweep_endpoints():
    cfg = reduced_cfg()
    noise = ScenarioConfig(hypothesis=Hypothesis.NOISE_ONLY, seed=5)
    points = roc_sweep(cfg, noise, [0, 30], trials=300, seed=5, method="both")
    by_key = {(pt.gamma, pt.method): pt for pt in points}
    assert by_key[(0, "analytic")].p_fa > 0.99
    assert by_key[(0, "mc")].p_fa >= 0.98
    assert by_key[(30, "analytic")].p_fa == 0.0
    assert by_key[(30, "mc")].p_fa == 0.0


def test_roc_sweep_aligned_mc_agrees_with_analytic():
    # with a fixed offset and the scan pinned to the aligned window the
    # analytic single-window model is exact, so MC must agree within 3
    # binomial standard errors at every threshold
    cfg = reduced_cfg()
    scenario = ScenarioConfig(
        hypothesis=Hypothesis.BEACON_PRESENT,
        ber=0.15,
        offset_policy=OffsetPolicy.fixed(0),
        seed=23,
    )
    gammas = [20, 21, 22, 23, 24, 25]
    trials = 4000
    points = roc_sweep(
        cfg, scenario, gammas, trials=trials, seed=23, method="both",
        aligned_only=True,
    )
    analytic = {pt.gamma: pt.p_d for pt in points if pt.method == "analytic"}
    mc = {pt.gamma: pt.p_d for pt in points if pt.method == "mc"}
    for g in gammas:
        se = math.sqrt(analytic[g] * (1 - analytic[g]) / trials)
        assert abs(mc[g] - analytic[g]) <= 3 * se


def test_roc_sweep_validation():
    cfg = reduced_cfg()
    noise = ScenarioConfig(hypothesis=Hypothesis.NOISE_ONLY, seed=1)
    with pytest.raises(ValueError, match="gamma list must not be empty"):
        roc_sweep(cfg, noise, [], trials=10, seed=1)
    with pytest.raises(ValueError, match="unknown method"):
        roc_sweep(cfg, noise, [20], trials=10, seed=1, method="magic")


# --------------------------------------------------------------------- power


def test_power_examples():
    assert power(PowerPoint(e_dyn=0.9e-12, f_clk=1e6)) == pytest.approx(
        0.9e-6, rel=1e-12
    )
    assert power(PowerPoint(e_dyn=0.7e-12, f_clk=200e3)) == pytest.approx(
        140e-9, rel=1e-12
    )
    assert power(PowerPoint(e_dyn=0.0, f_clk=1e9, p_leak=0.5e-9)) == 0.5e-9
    assert power(PowerPoint(e_dyn=1e-12, f_clk=1e6, p_leak=2e-9)) == pytest.approx(
        1.002e-6, rel=1e-12
    )


def test_power_point_validation():
    with pytest.raises(ValueError, match="non-negative"):
        PowerPoint(e_dyn=-1e-12, f_clk=1e6)
    with pytest.raises(ValueError, match="non-negative"):
        PowerPoint(e_dyn=1e-12, f_clk=1e6, p_sleep=-1.0)


# ------------------------------------------------------------- resolve_gamma


def test_resolve_gamma_branches():
    assert resolve_gamma(0.92, 248) == 229
    assert resolve_gamma(1.0, 10) == 10
    assert resolve_gamma(199, 248) == 199
    assert resolve_gamma(3.0, 248) == 3
    with pytest.raises(ValueError, match="gamma must be a number"):
        resolve_gamma(True, 100)
    with pytest.raises(ValueError, match=r"outside \[0, 100\]"):
        resolve_gamma(-1, 100)
    with pytest.raises(ValueError, match=r"lie in \(0, 1\]"):
        resolve_gamma(1.5, 100)
    with pytest.raises(ValueError, match=r"lie in \(0, 1\]"):
        resolve_gamma(0.0, 100)
    with pytest.raises(ValueError, match="int or float"):
        resolve_gamma("x", 100)


# ------------------------------------------------------------ grid search


def test_cost_model_validation():
    with pytest.raises(ValueError, match="non-negative"):
        CostModel(c_tx=-1.0)


def test_optimize_transmit_cost_only_picks_smallest_beacon():
    cost = CostModel(c_tx=1, c_miss=0, c_fa=0)
    res = optimize_params(8, 0.15, 4, cost, [31, 7, 15], [5, 3, 9], [0.85, 0.92])
    assert (res.best_m, res.best_k) == (7, 3)
    assert res.best_gamma == 48  # smallest threshold wins the tie
    assert res.best_cost == 55.0  # 7 + 2*3*8 beacon bits at unit cost
    assert len(res.surface) == 3 * 3 * 2


def test_optimize_free_transmit_noiseless_reaches_certain_detection():
    cost = CostModel(c_tx=0, c_miss=1.0, c_fa=1.0)
    res = optimize_params(8, 0.0, 4, cost, [7, 15, 31], [3, 5], [0.85, 0.92])
    best = [
        pt for pt in res.surface
        if (pt.M, pt.K, pt.gamma) == (res.best_m, res.best_k, res.best_gamma)
    ][0]
    assert best.p_d == 1.0
    assert res.best_cost == min(pt.cost for pt in res.surface)
    assert res.best_cost < 1e-40


def test_optimize_tie_break_prefers_smaller_beacon_then_gamma():
    cost = CostModel(c_tx=0, c_miss=0, c_fa=0)  # every cost is exactly zero
    res = optimize_params(8, 0.15, 4, cost, [15, 7], [5, 3], [0.92, 0.85])
    assert (res.best_m, res.best_k, res.best_gamma) == (7, 3, 48)


def test_optimize_balanced_costs_land_near_ten_to_one():
    # transmit cost grows per bit while misses are expensive: the optimum
    # sits where the preamble is roughly ten times the spreading length,
    # interior to both search ranges
    cost = CostModel(c_tx=1, c_miss=900, c_fa=300)
    res = optimize_params(
        8, 0.15, 4, cost, [7, 15, 31, 63], [2, 3, 5, 7, 9], [0.80, 0.85, 0.88, 0.92]
    )
    assert (res.best_m, res.best_k, res.best_gamma) == (31, 3, 199)
    assert 5 <= res.best_m / res.best_k <= 15


def test_optimize_validation():
    cost = CostModel()
    with pytest.raises(ValueError, match="must be non-empty"):
        optimize_params(8, 0.15, 4, cost, [], [3], [0.9])
    with pytest.raises(ValueError, match="ber must lie"):
        optimize_params(8, 0.7, 4, cost, [7], [3], [0.9])


# --------------------------------------------------------------- csv writers


def test_roc_csv_format():
    points = [
        RocPoint(gamma=10, p_d=0.5, p_d_lo=0.4, p_d_hi=0.6, trials=100, method="mc"),
        RocPoint(gamma=10, p_d=0.123456789012345, p_fa=1e-30, method="analytic"),
    ]
    text = roc_to_csv(points)
    lines = text.strip().split("\n")
    assert lines[0] == ROC_CSV_HEADER
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "10"
    # absent estimates serialize as empty cells
    assert lines[1].split(",")[4] == ""
    # repr round-trip keeps full precision
    assert float(lines[2].split(",")[1]) == 0.123456789012345
    assert float(lines[2].split(",")[4]) == 1e-30


def test_surface_csv_format():
    cost = CostModel(c_tx=1, c_miss=0, c_fa=0)
    res = optimize_params(8, 0.15, 4, cost, [7], [3], [0.9])
    text = surface_to_csv(res.surface)
    lines = text.strip().split("\n")
    assert lines[0] == SURFACE_CSV_HEADER
    assert len(lines) == 2
    assert lines[1].startswith("7,3,")
