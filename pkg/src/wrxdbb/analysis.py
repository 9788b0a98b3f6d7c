"""Detection/false-alarm statistics, power arithmetic, and parameter search.

Two routes to the same quantities: an analytic binomial reconstruction of the
detector's per-interval probabilities, and a Monte Carlo harness that runs
the bit-exact detector over synthesized listen intervals. The two are kept
deliberately independent so each can check the other.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .dbb_core import (
    DetectorConfig,
    address_field_samples,
    detect_wb,
    scan_position_count,
)
from .frontend import (
    Hypothesis,
    ScenarioConfig,
    rng_for_trial,
    synth_listen_interval,
)
from .wbcodec import as_bits

_Z95 = 1.959963984540054  # two-sided 95% normal quantile

# Stream tags keep beacon-present and false-alarm randomness disjoint while
# staying independent of gamma, so threshold sweeps see paired samples.
_HYP_TAG = {
    Hypothesis.NOISE_ONLY: 0,
    Hypothesis.BEACON_PRESENT: 1,
    Hypothesis.INTERFERER_PRESENT: 2,
}

ANALYTIC_ASSUMPTIONS = (
    "aligned-window detection: the beacon's detection probability is the"
    " probability that the exactly aligned filter window crosses gamma;"
    " partial-overlap windows before alignment and peak-refinement coupling"
    " are ignored",
    "noise windows treated as independent: the per-interval false-preamble"
    " probability composes the per-window crossing probability over the"
    " scanned window count as if windows did not share samples",
    "interferer intervals modeled as one aligned beacon evaluation plus"
    " (scan count - beacon samples) pure-noise windows",
    "address-bit probabilities are exact per bit (two-class binomial over"
    " the code's one and zero chips, including the decimator's tie-to-one"
    " bias) and bits are treated as independent, which holds for"
    " non-overlapping code windows",
)


# ----------------------------------------------------------------- binomials


# Up to this n the tail is summed in exact rational arithmetic and rounded
# once, so results are correctly rounded floats. Above it, log-domain terms
# with fsum keep the relative error near 1e-14.
_EXACT_N_LIMIT = 64


def binom_tail(n: int, k: int, p: float) -> float:
    """Upper tail P(X >= k) for X ~ Binomial(n, p) by direct summation."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not 0 <= k <= n + 1:
        raise ValueError(f"k={k} outside [0, {n + 1}]")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    if k == 0:
        return 1.0
    if k == n + 1:
        return 0.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    if n <= _EXACT_N_LIMIT:
        pf = Fraction(p)
        qf = 1 - pf
        total = sum(
            math.comb(n, i) * pf**i * qf ** (n - i) for i in range(k, n + 1)
        )
        return min(1.0, float(total))
    lp = math.log(p)
    lq = math.log1p(-p)
    lfact_n = math.lgamma(n + 1)
    terms = [
        math.exp(
            lfact_n
            - math.lgamma(i + 1)
            - math.lgamma(n - i + 1)
            + i * lp
            + (n - i) * lq
        )
        for i in range(k, n + 1)
    ]
    return min(1.0, math.fsum(terms))


def _binom_pmf(n: int, p: float) -> np.ndarray:
    """P(X = a) for a = 0..n, X ~ Binomial(n, p)."""
    if p == 0.0 or p == 1.0:
        pmf = np.zeros(n + 1)
        pmf[n if p == 1.0 else 0] = 1.0
        return pmf
    a = np.arange(n + 1)
    lg = math.lgamma(n + 1)
    logs = (
        lg
        - np.array([math.lgamma(i + 1) for i in a])
        - np.array([math.lgamma(n - i + 1) for i in a])
        + a * math.log(p)
        + (n - a) * math.log1p(-p)
    )
    return np.exp(logs)


def two_class_tail(n1: int, p1: float, n0: int, p0: float, m: int) -> float:
    """P(Bin(n1, p1) + Bin(n0, p0) >= m), exact by conditioning on the
    first count."""
    if n1 < 0 or n0 < 0:
        raise ValueError("counts must be >= 0")
    pmf = _binom_pmf(n1, p1)
    total = [
        pmf[a] * binom_tail(n0, min(max(m - a, 0), n0 + 1), p0)
        for a in range(n1 + 1)
    ]
    return min(1.0, math.fsum(total))


def wilson_ci(successes: int, trials: int) -> tuple:
    """Wilson-score 95% interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes outside [0, trials]")
    z2 = _Z95 * _Z95
    phat = successes / trials
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = (
        _Z95
        * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4 * trials * trials))
        / denom
    )
    # Rounding can push an endpoint a few ulp past the estimate at 0 or 1;
    # the true interval always contains it.
    lo = min(max(center - half, 0.0), phat)
    hi = max(min(center + half, 1.0), phat)
    return lo, hi


# ------------------------------------------------------- per-stage analytics


def chip_error_probs(kappa: int, ber: float) -> tuple:
    """(e1, e0): probability the decimated chip is wrong given the sent chip.

    A sent chip arrives as kappa independent samples each flipped with
    probability ber; the decimator majority-votes with ties to 1, which makes
    a sent 0 easier to corrupt than a sent 1 for even kappa.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    e1 = binom_tail(kappa, kappa // 2 + 1, ber)
    e0 = binom_tail(kappa, (kappa + 1) // 2, ber)
    return e1, e0


def noise_chip_one_prob(kappa: int) -> float:
    """Probability a pure-noise decimated chip reads 1 (ties favor 1)."""
    return binom_tail(kappa, (kappa + 1) // 2, 0.5)


@dataclass(frozen=True)
class AmfBitProbs:
    """Per-address-bit decode probabilities through decimator plus AMF."""

    p1_given_sent1: float
    p1_given_sent0: float
    p1_given_noise: float

    def decode_as(self, want: int, sent: int) -> float:
        """P(bit decodes to `want` | bit value `sent` was transmitted)."""
        p1 = self.p1_given_sent1 if sent else self.p1_given_sent0
        return p1 if want else 1.0 - p1

    def noise_as(self, want: int) -> float:
        return self.p1_given_noise if want else 1.0 - self.p1_given_noise


def amf_bit_probs(cfg: DetectorConfig, ber: float) -> AmfBitProbs:
    """Exact decode probabilities for one spread address bit.

    Conditions on the code's one-chips and zero-chips separately because the
    decimator's tie rule gives them different error rates.
    """
    taps = cfg.amf.taps
    n1 = int(np.count_nonzero(taps))
    n0 = taps.size - n1
    mid = cfg.amf.threshold
    e1, e0 = chip_error_probs(cfg.spec.kappa, ber)
    t1 = noise_chip_one_prob(cfg.spec.kappa)
    return AmfBitProbs(
        p1_given_sent1=two_class_tail(n1, 1.0 - e1, n0, 1.0 - e0, mid),
        p1_given_sent0=two_class_tail(n1, e0, n0, e1, mid),
        p1_given_noise=two_class_tail(n1, t1, n0, 1.0 - t1, mid),
    )


def _address_products(node_address, probs: AmfBitProbs) -> tuple:
    """(p_correct, p_noise_match, p_wrong_match) for the L destination bits.

    p_correct: all L bits decode to the node address when it was sent.
    p_noise_match: pure noise decodes to the node address.
    p_wrong_match: a beacon carrying a uniformly drawn *other* address
    decodes to the node address (averaged over the 2^L - 1 others).
    """
    bits = [int(b) for b in as_bits(node_address)]
    L = len(bits)
    p_correct = math.prod(probs.decode_as(v, v) for v in bits)
    p_noise = math.prod(probs.noise_as(v) for v in bits)
    # Sum over all 2^L addresses factorizes; subtract the self term.
    p_any = math.prod(
        probs.decode_as(v, v) + probs.decode_as(v, 1 - v) for v in bits
    )
    p_wrong = (p_any - p_correct) / (2**L - 1) if L >= 1 else 0.0
    return p_correct, p_noise, max(p_wrong, 0.0)


# --------------------------------------------------------------- ROC points


@dataclass(frozen=True)
class RocPoint:
    gamma: int
    p_d: float | None = None
    p_d_lo: float | None = None
    p_d_hi: float | None = None
    p_fa: float | None = None
    p_fa_lo: float | None = None
    p_fa_hi: float | None = None
    trials: int = 0
    method: str = "analytic"

    def __post_init__(self):
        for est, lo, hi in (
            (self.p_d, self.p_d_lo, self.p_d_hi),
            (self.p_fa, self.p_fa_lo, self.p_fa_hi),
        ):
            for v in (est, lo, hi):
                if v is not None and not 0.0 <= v <= 1.0:
                    raise ValueError(f"probability {v} outside [0, 1]")
            if est is not None and lo is not None and hi is not None:
                if not lo <= est <= hi:
                    raise ValueError(
                        f"interval [{lo}, {hi}] does not bracket {est}"
                    )


def analytic_roc(
    cfg: DetectorConfig,
    scenario: ScenarioConfig,
    gammas,
    aligned_only: bool = False,
) -> list:
    """Analytic per-interval (P_D, P_FA) at each threshold.

    P_D is the aligned-window detection probability times the probability
    all L destination bits decode correctly. P_FA composes the per-window
    noise crossing probability (and, under INTERFERER_PRESENT, the aligned
    interferer detection times a wrong-address match) over the scanned
    windows. See ANALYTIC_ASSUMPTIONS for the approximations; with
    aligned_only the single-window quantities are exact.

    Only the independent per-sample noise model is supported analytically.
    """
    if scenario.noise_mode != "independent":
        raise ValueError(
            f"analytic model supports only the independent noise mode, "
            f"got {scenario.noise_mode!r}"
        )
    gammas = _check_gammas(cfg, gammas)
    spec = cfg.spec
    j = cfg.pmf.length
    ber = scenario.ber
    n = scenario.resolved_interval(spec)
    n_scan = scan_position_count(n, spec)
    probs = amf_bit_probs(cfg, ber)
    p_correct, p_noise_match, p_wrong_match = _address_products(
        cfg.node_address, probs
    )

    points = []
    for gamma in gammas:
        p_pre = binom_tail(j, gamma + 1, 1.0 - ber)
        q = binom_tail(j, gamma + 1, 0.5)
        p_d = p_pre * p_correct
        if aligned_only:
            if scenario.hypothesis is Hypothesis.INTERFERER_PRESENT:
                p_fa = p_pre * p_wrong_match
            else:
                p_fa = q * p_noise_match
        else:
            # 1 - (1-x)^n via expm1/log1p so deep-tail values stay nonzero
            x_noise = q * p_noise_match
            x_inter = p_pre * p_wrong_match
            if x_noise >= 1.0 or (
                scenario.hypothesis is Hypothesis.INTERFERER_PRESENT
                and x_inter >= 1.0
            ):
                p_fa = 1.0
            elif scenario.hypothesis is Hypothesis.INTERFERER_PRESENT:
                clean = max(n_scan - spec.beacon_samples, 0)
                p_fa = -math.expm1(
                    math.log1p(-x_inter) + clean * math.log1p(-x_noise)
                )
            else:
                p_fa = -math.expm1(n_scan * math.log1p(-x_noise))
        if scenario.hypothesis is Hypothesis.BEACON_PRESENT:
            p_fa = None
        lo_hi = (p_fa, p_fa) if p_fa is not None else (None, None)
        points.append(
            RocPoint(
                gamma=gamma,
                p_d=p_d,
                p_d_lo=p_d,
                p_d_hi=p_d,
                p_fa=p_fa,
                p_fa_lo=lo_hi[0],
                p_fa_hi=lo_hi[1],
                trials=0,
                method="analytic",
            )
        )
    return points


def _check_gammas(cfg: DetectorConfig, gammas) -> list:
    gammas = [int(g) for g in gammas]
    if not gammas:
        raise ValueError("gamma list must not be empty")
    j = cfg.pmf.length
    for g in gammas:
        if not 0 <= g <= j:
            raise ValueError(f"gamma {g} outside [0, {j}]")
    return gammas


def _count_wakes(
    cfg: DetectorConfig,
    scenario: ScenarioConfig,
    gamma: int,
    seed: int,
    start: int,
    stop: int,
    aligned_only: bool,
) -> int:
    """Wakes over trial indices [start, stop); pure function of its args."""
    tag = _HYP_TAG[scenario.hypothesis]
    node = cfg.node_address
    src = (1 - node).astype(np.uint8)
    wakes = 0
    for t in range(start, stop):
        rng = rng_for_trial(seed, tag, t)
        stream = synth_listen_interval(cfg.spec, scenario, node, src, rng)
        aligned_at = stream.truth.offset if aligned_only else None
        result = detect_wb(stream, cfg, gamma, aligned_at=aligned_at)
        if result.woke:
            wakes += 1
    return wakes


def mc_estimate(
    cfg: DetectorConfig,
    scenario: ScenarioConfig,
    gamma: int,
    trials: int,
    seed: int | None = None,
    workers: int = 1,
    aligned_only: bool = False,
) -> RocPoint:
    """Monte Carlo estimate of one ROC coordinate at one threshold.

    BEACON_PRESENT scenarios fill the detection side; NOISE_ONLY and
    INTERFERER_PRESENT fill the false-alarm side. Each trial draws its
    randomness from (seed, hypothesis, trial index), so the result is
    bit-identical for any worker split, and threshold sweeps on the same
    seed see the same sample streams.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gamma = _check_gammas(cfg, [gamma])[0]
    if seed is None:
        seed = scenario.seed
    if aligned_only and scenario.offset_policy.kind != "fixed":
        raise ValueError("aligned_only needs a fixed offset policy")
    workers = max(1, min(int(workers), trials))
    if workers == 1:
        wakes = _count_wakes(cfg, scenario, gamma, seed, 0, trials, aligned_only)
    else:
        bounds = np.linspace(0, trials, workers + 1).astype(int)
        jobs = [
            (cfg, scenario, gamma, seed, int(a), int(b), aligned_only)
            for a, b in zip(bounds[:-1], bounds[1:])
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            wakes = sum(pool.map(_count_wakes_star, jobs))

    p = wakes / trials
    lo, hi = wilson_ci(wakes, trials)
    if scenario.hypothesis is Hypothesis.BEACON_PRESENT:
        return RocPoint(
            gamma=gamma, p_d=p, p_d_lo=lo, p_d_hi=hi, trials=trials, method="mc"
        )
    return RocPoint(
        gamma=gamma, p_fa=p, p_fa_lo=lo, p_fa_hi=hi, trials=trials, method="mc"
    )


def _count_wakes_star(args) -> int:
    return _count_wakes(*args)


def roc_sweep(
    cfg: DetectorConfig,
    scenario: ScenarioConfig,
    gammas,
    trials: int,
    seed: int | None = None,
    workers: int = 1,
    method: str = "both",
    aligned_only: bool = False,
) -> list:
    """Sweep thresholds and return RocPoints sorted by (gamma, method).

    Monte Carlo rows merge a BEACON_PRESENT run (detection side) with a run
    of the given scenario (false-alarm side, unless the scenario itself is
    BEACON_PRESENT). Analytic rows come from analytic_roc.
    """
    if method not in ("mc", "analytic", "both"):
        raise ValueError(f"unknown method {method!r}")
    gammas = sorted(_check_gammas(cfg, gammas))
    points: list = []
    if method in ("analytic", "both"):
        points.extend(analytic_roc(cfg, scenario, gammas, aligned_only))
    if method in ("mc", "both"):
        beacon_scn = replace(scenario, hypothesis=Hypothesis.BEACON_PRESENT)
        for gamma in gammas:
            pd_pt = mc_estimate(
                cfg, beacon_scn, gamma, trials, seed, workers, aligned_only
            )
            if scenario.hypothesis is Hypothesis.BEACON_PRESENT:
                points.append(pd_pt)
                continue
            fa_pt = mc_estimate(
                cfg, scenario, gamma, trials, seed, workers, aligned_only
            )
            points.append(
                RocPoint(
                    gamma=gamma,
                    p_d=pd_pt.p_d,
                    p_d_lo=pd_pt.p_d_lo,
                    p_d_hi=pd_pt.p_d_hi,
                    p_fa=fa_pt.p_fa,
                    p_fa_lo=fa_pt.p_fa_lo,
                    p_fa_hi=fa_pt.p_fa_hi,
                    trials=trials,
                    method="mc",
                )
            )
    points.sort(key=lambda pt: (pt.gamma, pt.method))
    return points


# ------------------------------------------------------------------- power


@dataclass(frozen=True)
class PowerPoint:
    """Active power inputs: switching energy per cycle, clock, leakage."""

    e_dyn: float
    f_clk: float
    p_leak: float = 0.0
    p_sleep: float = 0.0

    def __post_init__(self):
        for name in ("e_dyn", "f_clk", "p_leak", "p_sleep"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def power(pt: PowerPoint) -> float:
    """Active power in watts: e_dyn * f_clk + p_leak."""
    return pt.e_dyn * pt.f_clk + pt.p_leak


# --------------------------------------------------------------- optimizer


@dataclass(frozen=True)
class CostModel:
    """Scalarized objective for beacon parameter search.

    cost = beacon_rate * c_tx * (M + 2KL) + c_miss * (1 - P_D)
         + listen_rate * c_fa * P_FA

    The weights are user-supplied scalars; the model is a plumbing stand-in
    for whatever network-level energy objective the deployment actually has.
    """

    c_tx: float = 1.0
    c_miss: float = 0.0
    c_fa: float = 0.0
    beacon_rate: float = 1.0
    listen_rate: float = 1.0

    def __post_init__(self):
        for name in ("c_tx", "c_miss", "c_fa", "beacon_rate", "listen_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class SurfacePoint:
    M: int
    K: int
    gamma: int
    p_d: float
    p_fa: float
    cost: float


@dataclass(frozen=True)
class OptimizeResult:
    best_m: int
    best_k: int
    best_gamma: int
    best_cost: float
    surface: tuple


def resolve_gamma(value, j: int) -> int:
    """Threshold given as an absolute count or a fraction of J.

    Integers are absolute; a float in (0, 1] means ceil(fraction * J);
    an integral float above 1 is treated as absolute.
    """
    if isinstance(value, bool):
        raise ValueError("gamma must be a number")
    if isinstance(value, int):
        gamma = value
    elif isinstance(value, float):
        if 0.0 < value <= 1.0:
            gamma = math.ceil(value * j)
        elif value > 1.0 and value.is_integer():
            gamma = int(value)
        else:
            raise ValueError(
                f"fractional gamma must lie in (0, 1], got {value}"
            )
    else:
        raise ValueError(f"gamma must be int or float, got {type(value).__name__}")
    if not 0 <= gamma <= j:
        raise ValueError(f"gamma {gamma} outside [0, {j}]")
    return gamma


def _lengths_only_point(
    m: int, k: int, L: int, kappa: int, ber: float, gamma: int
) -> tuple:
    """(p_d, p_fa) for a Manchester-coded candidate, averaged over addresses.

    Uses only the lengths: J = 2*kappa*M preamble taps; the coded spreading
    has K one-chips and K zero-chips. Averaging the address-match products
    over a uniform node address makes the noise match exactly 2^-L.
    """
    j = 2 * kappa * m
    kc = 2 * k
    mid = (kc + 1) // 2
    e1, e0 = chip_error_probs(kappa, ber)
    t1 = noise_chip_one_prob(kappa)
    p1g1 = two_class_tail(k, 1.0 - e1, k, 1.0 - e0, mid)
    p1g0 = two_class_tail(k, e0, k, e1, mid)
    p1n = two_class_tail(k, t1, k, 1.0 - t1, mid)
    # Uniform-average over node address bits.
    p_bit_correct = (p1g1 + (1.0 - p1g0)) / 2.0
    p_bit_noise = (p1n + (1.0 - p1n)) / 2.0  # = 1/2 exactly
    p_correct = p_bit_correct**L
    p_noise_match = p_bit_noise**L

    p_pre = binom_tail(j, gamma + 1, 1.0 - ber)
    q = binom_tail(j, gamma + 1, 0.5)
    beacon_bits = m + 2 * k * L
    n = 2 * kappa * 2 * beacon_bits  # listen twice the beacon duration
    addr_samples = 2 * L * kc * kappa
    n_scan = max(n - addr_samples - j + 1, 0)
    p_d = p_pre * p_correct
    x = q * p_noise_match
    p_fa = 1.0 if x >= 1.0 else -math.expm1(n_scan * math.log1p(-x))
    return p_d, p_fa


def optimize_params(
    L: int,
    ber: float,
    kappa: int,
    cost: CostModel,
    M_range,
    K_range,
    gamma_grid,
) -> OptimizeResult:
    """Exhaustive search over (M, K, gamma) minimizing the cost model.

    Detection and false alarm come from the lengths-only analytic model with
    a listen interval of twice the candidate beacon. gamma_grid entries are
    resolved per candidate (fractions of that candidate's J), so one grid
    spans beacons of different sizes. Ties break toward the smaller beacon
    (M + 2KL), then the smaller gamma.
    """
    ms = sorted({int(m) for m in M_range})
    ks = sorted({int(k) for k in K_range})
    grid = list(gamma_grid)
    if not ms or not ks or not grid:
        raise ValueError("M_range, K_range, and gamma_grid must be non-empty")
    if L < 1 or kappa < 1:
        raise ValueError("L and kappa must be >= 1")
    if not 0.0 <= ber <= 0.5:
        raise ValueError(f"ber must lie in [0, 0.5], got {ber}")
    if min(ms) < 1 or min(ks) < 1:
        raise ValueError("M and K must be >= 1")

    surface = []
    best = None
    best_key = None
    for m in ms:
        j = 2 * kappa * m
        for k in ks:
            beacon_bits = m + 2 * k * L
            for g in grid:
                gamma = resolve_gamma(g, j)
                p_d, p_fa = _lengths_only_point(m, k, L, kappa, ber, gamma)
                c = (
                    cost.beacon_rate * cost.c_tx * beacon_bits
                    + cost.c_miss * (1.0 - p_d)
                    + cost.listen_rate * cost.c_fa * p_fa
                )
                pt = SurfacePoint(m, k, gamma, p_d, p_fa, c)
                surface.append(pt)
                key = (c, beacon_bits, gamma)
                if best_key is None or key < best_key:
                    best_key = key
                    best = pt
    return OptimizeResult(
        best_m=best.M,
        best_k=best.K,
        best_gamma=best.gamma,
        best_cost=best.cost,
        surface=tuple(surface),
    )


# ------------------------------------------------------------------- output


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


ROC_CSV_HEADER = "gamma,p_d,p_d_lo,p_d_hi,p_fa,p_fa_lo,p_fa_hi,trials,method"
SURFACE_CSV_HEADER = "M,K,gamma,p_d,p_fa,cost"


def roc_to_csv(points) -> str:
    lines = [ROC_CSV_HEADER]
    for pt in points:
        lines.append(
            ",".join(
                _cell(v)
                for v in (
                    pt.gamma,
                    pt.p_d,
                    pt.p_d_lo,
                    pt.p_d_hi,
                    pt.p_fa,
                    pt.p_fa_lo,
                    pt.p_fa_hi,
                    pt.trials,
                    pt.method,
                )
            )
        )
    return "\n".join(lines) + "\n"


def surface_to_csv(points) -> str:
    lines = [SURFACE_CSV_HEADER]
    for pt in points:
        lines.append(
            ",".join(
                _cell(v)
                for v in (pt.M, pt.K, pt.gamma, pt.p_d, pt.p_fa, pt.cost)
            )
        )
    return "\n".join(lines) + "\n"
