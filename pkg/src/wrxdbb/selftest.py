"""Quick built-in sanity battery for the `selftest` CLI command.

A handful of fast, deterministic checks over every stage. This is not the
test suite; it exists so a fresh install can be validated in seconds.
"""

from __future__ import annotations

import numpy as np

from .analysis import (
    PowerPoint,
    analytic_roc,
    binom_tail,
    mc_estimate,
    power,
)
from .dbb_core import (
    DetectorConfig,
    decimate,
    detect_wb,
    mf_output,
    mf_scan,
)
from .frontend import (
    Hypothesis,
    OffsetPolicy,
    ScenarioConfig,
    synth_listen_interval,
)
from .wbcodec import (
    as_bits,
    build_beacon,
    gen_msequence,
    manchester_decode,
    manchester_encode,
    reference_beacon_spec,
)


def _check_msequence():
    seq = gen_msequence(5, (5, 2), [1, 1, 1, 1, 1])
    ok = seq.size == 31 and int(seq.sum()) == 16
    return ok, f"degree-5 m-sequence: {seq.size} chips, {int(seq.sum())} ones"


def _check_manchester():
    bits = as_bits("1011001")
    ok = bool(np.array_equal(manchester_decode(manchester_encode(bits)), bits))
    return ok, "manchester round trip"


def _check_beacon():
    spec = reference_beacon_spec()
    b = build_beacon(spec, as_bits("10110000"), as_bits("00001111"))
    ok = b.chips.size == 286 and spec.beacon_samples == 1144
    return ok, f"default beacon: {b.chips.size} chips"


def _check_filters():
    ok = mf_output([1, 0, 1, 1], [1, 1, 1, 1]) == 3
    taps = gen_msequence(4, (4, 1), [1, 0, 0, 0])
    stream = np.concatenate([as_bits("010101"), taps, as_bits("000")])
    ok = ok and mf_scan(taps, stream, taps.size - 1) == 6 + taps.size - 1
    ok = ok and decimate([1, 1, 0, 0, 1, 0, 1], 0, 4) == 1
    return ok, "matched filter and decimator spot checks"


def _check_noiseless_wake():
    spec = reference_beacon_spec()
    node = as_bits("10110000")
    cfg = DetectorConfig.from_beacon(spec, node, gamma=229)
    scenario = ScenarioConfig(
        hypothesis=Hypothesis.BEACON_PRESENT,
        ber=0.0,
        offset_policy=OffsetPolicy.fixed(100),
        seed=7,
    )
    stream = synth_listen_interval(spec, scenario, node, as_bits("00001111"))
    result = detect_wb(stream, cfg)
    ok = result.woke and result.sync_index == 100 + cfg.pmf_length - 1
    return ok, "noiseless end-to-end wake at fixed offset"


def _check_analysis():
    ok = abs(binom_tail(2, 1, 0.5) - 0.75) < 1e-15
    ok = ok and abs(power(PowerPoint(0.9e-12, 1e6)) - 0.9e-6) < 1e-18
    spec = reference_beacon_spec()
    cfg = DetectorConfig.from_beacon(spec, "10110000", gamma=229)
    scenario = ScenarioConfig(hypothesis=Hypothesis.BEACON_PRESENT, ber=0.0, seed=3)
    pt = mc_estimate(cfg, scenario, gamma=229, trials=20, seed=3)
    ok = ok and pt.p_d == 1.0
    ana = analytic_roc(cfg, scenario, [229])[0]
    ok = ok and ana.p_d == 1.0
    return ok, "binomial tail, power arithmetic, noiseless estimates"


CHECKS = (
    ("m-sequence generator", _check_msequence),
    ("manchester codec", _check_manchester),
    ("beacon builder", _check_beacon),
    ("matched filters", _check_filters),
    ("noiseless detection", _check_noiseless_wake),
    ("analysis kernels", _check_analysis),
)


def run_selftest(verbose: bool = True) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok = all_ok and ok
        if verbose:
            print(f"[{'ok' if ok else 'FAIL'}] {name}: {detail}")
    if verbose:
        print("selftest:", "all checks passed" if all_ok else "FAILURES above")
    return all_ok
