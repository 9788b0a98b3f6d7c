"""Bit-exact model of the wake-up receiver digital base-band.

Pipeline: a preamble matched filter (PMF) slides over the oversampled sample
stream and flags a candidate when its agreement count exceeds a threshold;
a peak search over the next kappa outputs fixes sample-level sync and phase;
a decimator reduces the address field to chip rate by majority vote; an
address matched filter (AMF) despreads the destination and source address
bits; the node wakes iff the destination equals its programmed address.

All filters count bit agreements (XNOR sum), so outputs are integers in
[0, J] for a J-tap filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frontend import SampleStream, oversample
from .wbcodec import BeaconSpec, Bits, as_bits, bits_to_str

# Streams long enough that FFT correlation beats the direct sliding product.
_FFT_CUTOVER_OPS = 200_000


@dataclass(eq=False)
class MatchedFilterSpec:
    """Binary matched filter: reference taps plus an integer threshold."""

    taps: Bits
    threshold: int

    def __post_init__(self):
        self.taps = as_bits(self.taps)
        if self.taps.size < 1:
            raise ValueError("matched filter needs at least one tap")
        if not 0 <= self.threshold <= self.taps.size:
            raise ValueError(
                f"threshold {self.threshold} outside [0, {self.taps.size}]"
            )

    @property
    def length(self) -> int:
        return self.taps.size


def address_field_samples(spec: BeaconSpec) -> int:
    """Oversampled samples occupied by the 2L spread address bits."""
    return 2 * spec.L * spec.coded_spreading.size * spec.kappa


def scan_position_count(interval_samples: int, spec: BeaconSpec) -> int:
    """Number of PMF windows the detector scans in one listen interval.

    Windows end at sample indices J-1 .. N-1-addr_samples, so the address
    field of a candidate always fits inside the interval.
    """
    j = spec.kappa * spec.coded_preamble.size
    return max(interval_samples - address_field_samples(spec) - j + 1, 0)


@dataclass(eq=False)
class DetectorConfig:
    """Everything the detector state machine needs for one node."""

    spec: BeaconSpec
    pmf: MatchedFilterSpec
    amf: MatchedFilterSpec
    node_address: Bits

    def __post_init__(self):
        self.node_address = as_bits(self.node_address)
        if self.node_address.size != self.spec.L:
            raise ValueError(
                f"node_address must have length L={self.spec.L}, "
                f"got {self.node_address.size}"
            )
        expect_j = self.spec.kappa * self.spec.coded_preamble.size
        if self.pmf.length != expect_j:
            raise ValueError(
                f"pmf must have {expect_j} taps "
                f"(kappa x coded preamble), got {self.pmf.length}"
            )
        kc = self.spec.coded_spreading.size
        if self.amf.length != kc:
            raise ValueError(f"amf must have {kc} taps, got {self.amf.length}")
        mid = (kc + 1) // 2
        if self.amf.threshold != mid:
            raise ValueError(
                f"amf threshold must be the midpoint {mid}, got {self.amf.threshold}"
            )

    @classmethod
    def from_beacon(cls, spec: BeaconSpec, node_address, gamma: int) -> "DetectorConfig":
        """Build the matched filters for a beacon format.

        PMF taps are the oversampled coded preamble; AMF taps are the coded
        spreading sequence with its threshold pinned to the midpoint.
        """
        pmf_taps = oversample(spec.coded_preamble, spec.kappa)
        amf_taps = spec.coded_spreading
        mid = (amf_taps.size + 1) // 2
        return cls(
            spec=spec,
            pmf=MatchedFilterSpec(pmf_taps, int(gamma)),
            amf=MatchedFilterSpec(amf_taps, mid),
            node_address=as_bits(node_address),
        )

    @property
    def pmf_length(self) -> int:
        return self.pmf.length


@dataclass(eq=False)
class DetectionResult:
    preamble_detected: bool
    sync_index: int | None
    phase: int | None
    dest_bits: Bits | None
    src_bits: Bits | None
    woke: bool
    pmf_evaluations: int = 0
    amf_evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "preamble_detected": self.preamble_detected,
            "sync_index": self.sync_index,
            "phase": self.phase,
            "dest_bits": None if self.dest_bits is None else bits_to_str(self.dest_bits),
            "src_bits": None if self.src_bits is None else bits_to_str(self.src_bits),
            "woke": self.woke,
            "pmf_evaluations": self.pmf_evaluations,
            "amf_evaluations": self.amf_evaluations,
        }


def mf_output(taps, window) -> int:
    """Agreement count between taps and one window (XNOR sum)."""
    taps = as_bits(taps)
    window = as_bits(window)
    if taps.size != window.size:
        raise ValueError(
            f"taps ({taps.size}) and window ({window.size}) differ in length"
        )
    return int(np.count_nonzero(taps == window))


def mf_outputs(taps, stream, method: str = "auto") -> np.ndarray:
    """Matched filter agreement counts for every full window of the stream.

    Element i is the output for the window stream[i : i+J], i.e. the window
    ending at sample i+J-1. The direct method slides an integer dot product;
    the fft method computes the same correlation in the frequency domain and
    rounds back to integers (exact here, since outputs are integers and the
    rounding error is orders of magnitude below one half).
    """
    taps = as_bits(taps)
    stream = as_bits(stream)
    j = taps.size
    n = stream.size
    if j < 1:
        raise ValueError("matched filter needs at least one tap")
    if n < j:
        raise ValueError(f"stream ({n}) shorter than taps ({j})")
    if method == "auto":
        method = "direct" if (n - j + 1) * j <= _FFT_CUTOVER_OPS else "fft"
    t = taps.astype(np.int64) * 2 - 1
    s = stream.astype(np.int64) * 2 - 1
    if method == "direct":
        corr = np.correlate(s, t, mode="valid")
    elif method == "fft":
        size = 1
        while size < n + j - 1:
            size *= 2
        spec_s = np.fft.rfft(s, size)
        spec_t = np.fft.rfft(t[::-1], size)
        full = np.fft.irfft(spec_s * spec_t, size)
        corr = np.rint(full[j - 1 : n]).astype(np.int64)
    else:
        raise ValueError(f"unknown method {method!r}")
    return (corr + j) // 2


def mf_scan(taps, stream, gamma: int, method: str = "auto") -> int | None:
    """Index of the first window whose output exceeds gamma, or None.

    Returns the index of the last sample of that window (detection happens
    when the newest sample enters the filter). Strict inequality: a window
    matching exactly gamma positions does not trigger.
    """
    taps = as_bits(taps)
    outputs = mf_outputs(taps, stream, method)
    hits = np.flatnonzero(outputs > gamma)
    if hits.size == 0:
        return None
    return int(hits[0]) + taps.size - 1


def peak_refine(taps, stream, n0: int, kappa: int) -> tuple:
    """Pick the best sync among kappa successive outputs after a crossing.

    Examines the windows ending at n0 .. n0+kappa-1 and returns
    (sync_index, phase) for the largest output, earliest index on ties.
    phase = sync_index mod kappa.
    """
    taps = as_bits(taps)
    stream = as_bits(stream)
    j = taps.size
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if n0 < j - 1:
        raise ValueError(f"n0={n0} is before the first full window {j - 1}")
    if n0 + kappa - 1 >= stream.size:
        raise ValueError(
            f"refinement window [{n0}, {n0 + kappa - 1}] exceeds stream end "
            f"{stream.size - 1}"
        )
    outs = mf_outputs(taps, stream[n0 - j + 1 : n0 + kappa], method="direct")
    best = int(np.argmax(outs))  # argmax takes the earliest maximum
    sync = n0 + best
    return sync, sync % kappa


def decimate(window, phase: int, kappa: int) -> int:
    """One decimator decision from a 2*kappa-1 sample buffer.

    phase selects which kappa consecutive buffered samples belong to the
    current chip; the chip decision is their majority vote, with the
    even-kappa tie (sum exactly kappa/2) resolving to 1.
    """
    window = as_bits(window)
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if window.size != 2 * kappa - 1:
        raise ValueError(
            f"decimator window must hold {2 * kappa - 1} samples, got {window.size}"
        )
    if not 0 <= phase < kappa:
        raise ValueError(f"phase {phase} outside [0, {kappa - 1}]")
    total = int(window[phase : phase + kappa].sum())
    return 1 if 2 * total >= kappa else 0


def decimate_stream(samples, start: int, n_chips: int, kappa: int) -> Bits:
    """Reduce kappa-oversampled samples to n_chips chip decisions.

    Equivalent to calling decimate() once per chip with the phase that
    selects samples[start + k*kappa : start + (k+1)*kappa].
    """
    samples = as_bits(samples)
    stop = start + n_chips * kappa
    if start < 0 or stop > samples.size:
        raise ValueError(
            f"need samples [{start}, {stop}) but stream has {samples.size}"
        )
    groups = samples[start:stop].astype(np.int64).reshape(n_chips, kappa)
    sums = groups.sum(axis=1)
    return (2 * sums >= kappa).astype(np.uint8)


def despread_addresses(chips, amf: MatchedFilterSpec, L: int) -> tuple:
    """Recover (dest_bits, src_bits) from 2L spread address bits at chip rate.

    Each address bit occupies one code length of chips; the bit is 1 iff
    the AMF output for that window reaches the midpoint threshold.
    """
    chips = as_bits(chips)
    if L < 1:
        raise ValueError("L must be >= 1")
    kc = amf.length
    need = 2 * L * kc
    if chips.size < need:
        raise ValueError(f"need {need} chips to despread 2L={2 * L} bits, got {chips.size}")
    windows = chips[:need].reshape(2 * L, kc)
    agreements = np.count_nonzero(windows == amf.taps, axis=1)
    bits = (agreements >= amf.threshold).astype(np.uint8)
    return bits[:L], bits[L:]


def address_match(dest_bits, node_address) -> bool:
    """True iff every decoded destination bit matches the node address."""
    dest_bits = as_bits(dest_bits)
    node_address = as_bits(node_address)
    if dest_bits.size != node_address.size:
        raise ValueError(
            f"address lengths differ: {dest_bits.size} vs {node_address.size}"
        )
    if dest_bits.size < 1:
        raise ValueError("addresses must have at least one bit")
    return bool(np.array_equal(dest_bits, node_address))


def detect_wb(
    stream,
    cfg: DetectorConfig,
    gamma: int | None = None,
    method: str = "auto",
    aligned_at: int | None = None,
) -> DetectionResult:
    """Run the full detector over one listen interval.

    The PMF scans window end positions J-1 .. N-1-addr_samples (so a
    candidate's address field always fits). On a crossing, the peak among the
    next kappa outputs fixes sync; the address field is decimated to chip
    rate and despread; the node wakes iff dest equals node_address. After a
    mismatch (or a peak whose address field would overrun the interval) the
    scan resumes at the sample after the rejected peak. The reported fields
    are the waking detection's if any, otherwise the first detection's.

    aligned_at pins a single evaluation: only the window ending at
    aligned_at + J - 1 is checked and no peak refinement happens, which is
    the natural mode for analytic cross-checks at a known beacon offset.

    The evaluation counters reflect the sequential hardware schedule (one
    PMF output per scanned sample plus kappa-1 per refinement; 2L AMF
    outputs per despread), not the vectorized implementation underneath.
    """
    samples = stream.samples if isinstance(stream, SampleStream) else as_bits(stream)
    spec = cfg.spec
    j = cfg.pmf.length
    n = samples.size
    if n < j:
        raise ValueError(f"stream ({n}) shorter than pmf ({j})")
    if gamma is None:
        gamma = cfg.pmf.threshold
    if not 0 <= gamma <= j:
        raise ValueError(f"gamma {gamma} outside [0, {j}]")
    kappa = spec.kappa
    addr_samples = address_field_samples(spec)
    addr_chips = 2 * spec.L * cfg.amf.length
    cap = n - 1 - addr_samples  # last usable window end

    no_hit = DetectionResult(False, None, None, None, None, False)

    def despread_at(sync: int) -> tuple:
        chips = decimate_stream(samples, sync + 1, addr_chips, kappa)
        return despread_addresses(chips, cfg.amf, spec.L)

    if aligned_at is not None:
        end = aligned_at + j - 1
        if aligned_at < 0 or end > cap:
            raise ValueError(
                f"aligned_at={aligned_at} leaves no room for preamble plus "
                f"address field in {n} samples"
            )
        out = mf_output(cfg.pmf.taps, samples[aligned_at : aligned_at + j])
        if out <= gamma:
            no_hit.pmf_evaluations = 1
            return no_hit
        dest, src = despread_at(end)
        woke = address_match(dest, cfg.node_address)
        return DetectionResult(
            True, end, end % kappa, dest, src, woke,
            pmf_evaluations=1, amf_evaluations=2 * spec.L,
        )

    if cap < j - 1:
        return no_hit

    outputs = mf_outputs(cfg.pmf.taps, samples, method)  # index = window start
    ends_over = np.flatnonzero(outputs[: cap - j + 2] > gamma) + j - 1

    pmf_evals = 0
    amf_evals = 0
    first: DetectionResult | None = None
    resume = j - 1
    while True:
        nxt = np.searchsorted(ends_over, resume)
        if nxt == ends_over.size:
            pmf_evals += cap - resume + 1
            break
        n0 = int(ends_over[nxt])
        pmf_evals += n0 - resume + 1 + (kappa - 1)
        best = int(np.argmax(outputs[n0 - j + 1 : n0 - j + 1 + kappa]))
        sync = n0 + best
        if sync > cap:
            resume = sync + 1
            if resume > cap:
                break
            continue
        dest, src = despread_at(sync)
        amf_evals += 2 * spec.L
        woke = address_match(dest, cfg.node_address)
        result = DetectionResult(True, sync, sync % kappa, dest, src, woke)
        if woke:
            result.pmf_evaluations = pmf_evals
            result.amf_evaluations = amf_evals
            return result
        if first is None:
            first = result
        resume = sync + 1
        if resume > cap:
            break

    final = first if first is not None else no_hit
    final.pmf_evaluations = pmf_evals
    final.amf_evaluations = amf_evals
    return final
