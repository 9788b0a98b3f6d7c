"""Oversampled hard-decision stream synthesis for one listen interval.

Models what a low-power analog front-end delivers to the digital base-band:
one hard bit decision per sample at kappa times the chip rate, corrupted by a
binary symmetric channel. Three hypotheses: pure noise, a beacon addressed to
the node, and an interfering beacon addressed elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .wbcodec import BeaconSpec, Bits, as_bits, bits_to_str, build_beacon


class Hypothesis(Enum):
    NOISE_ONLY = "NOISE_ONLY"
    BEACON_PRESENT = "BEACON_PRESENT"
    INTERFERER_PRESENT = "INTERFERER_PRESENT"


@dataclass(frozen=True)
class OffsetPolicy:
    """Beacon start offset: FIXED(n) or UNIFORM_RANDOM over valid positions."""

    kind: str  # "fixed" | "uniform"
    value: int = 0

    @classmethod
    def fixed(cls, n: int) -> "OffsetPolicy":
        if n < 0:
            raise ValueError("fixed offset must be >= 0")
        return cls("fixed", int(n))

    @classmethod
    def uniform(cls) -> "OffsetPolicy":
        return cls("uniform")


@dataclass(frozen=True)
class InterfererDestPolicy:
    """Interferer destination: uniform over the 2^L - 1 non-self addresses,
    or a fixed address."""

    kind: str  # "uniform" | "fixed"
    address: tuple = ()

    @classmethod
    def uniform(cls) -> "InterfererDestPolicy":
        return cls("uniform")

    @classmethod
    def fixed(cls, address) -> "InterfererDestPolicy":
        return cls("fixed", tuple(int(b) for b in as_bits(address)))


@dataclass
class ScenarioConfig:
    hypothesis: Hypothesis = Hypothesis.NOISE_ONLY
    ber: float = 0.0
    interval_samples: int = 0  # 0 = default to 2x beacon duration
    offset_policy: OffsetPolicy = OffsetPolicy.uniform()
    interferer_dest_policy: InterfererDestPolicy = InterfererDestPolicy.uniform()
    seed: int = 0
    noise_mode: str = "independent"  # or "chip": one flip per chip, repeated kappa x

    def __post_init__(self):
        if not 0.0 <= self.ber <= 0.5:
            raise ValueError(f"ber must lie in [0, 0.5], got {self.ber}")
        if self.noise_mode not in ("independent", "chip"):
            raise ValueError(f"unknown noise mode {self.noise_mode!r}")

    def resolved_interval(self, spec: BeaconSpec) -> int:
        n = self.interval_samples if self.interval_samples else 2 * spec.beacon_samples
        if n < spec.beacon_samples:
            raise ValueError(
                f"interval of {n} samples cannot contain a "
                f"{spec.beacon_samples}-sample beacon"
            )
        return n


@dataclass(eq=False)
class Truth:
    hypothesis: Hypothesis
    offset: int | None = None
    dest: Bits | None = None
    src: Bits | None = None


@dataclass(eq=False)
class SampleStream:
    samples: Bits
    truth: Truth


def oversample(chips: Bits, kappa: int) -> Bits:
    """Repeat each chip kappa times."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    return np.repeat(as_bits(chips), kappa)


def apply_bsc(samples: Bits, ber: float, rng: np.random.Generator) -> Bits:
    """Flip each sample independently with probability ber."""
    if not 0.0 <= ber <= 0.5:
        raise ValueError(f"ber must lie in [0, 0.5], got {ber}")
    samples = as_bits(samples)
    if ber == 0.0:
        return samples.copy()
    flips = rng.random(samples.size) < ber
    return (samples ^ flips).astype(np.uint8)


def _noise_bits(n: int, kappa: int, noise_mode: str, rng: np.random.Generator) -> Bits:
    """Bernoulli(0.5) fill; in chip mode decisions repeat kappa times."""
    if noise_mode == "chip":
        chips = rng.integers(0, 2, (n + kappa - 1) // kappa, dtype=np.uint8)
        return np.repeat(chips, kappa)[:n]
    return rng.integers(0, 2, n, dtype=np.uint8)


def _draw_interferer_dest(
    policy: InterfererDestPolicy, node_dest: Bits, rng: np.random.Generator
) -> Bits:
    L = node_dest.size
    if policy.kind == "fixed":
        addr = as_bits(list(policy.address))
        if addr.size != L:
            raise ValueError(f"fixed interferer address must have length L={L}")
        return addr
    # uniform over the 2^L - 1 addresses != node_dest, one draw, no rejection
    self_int = int("".join(map(str, node_dest)), 2)
    r = int(rng.integers(0, (1 << L) - 1))
    if r >= self_int:
        r += 1
    return as_bits(format(r, f"0{L}b"))


def synth_listen_interval(
    spec: BeaconSpec,
    scenario: ScenarioConfig,
    node_dest,
    src,
    rng: np.random.Generator | None = None,
) -> SampleStream:
    """Synthesize one listen interval of front-end samples plus ground truth.

    NOISE_ONLY: i.i.d. Bernoulli(0.5) samples. BEACON_PRESENT: a beacon
    addressed to node_dest embedded at the policy offset, then run through the
    BSC. INTERFERER_PRESENT: same, destination drawn by the interferer policy.
    """
    node_dest = as_bits(node_dest)
    src = as_bits(src)
    if node_dest.size != spec.L or src.size != spec.L:
        raise ValueError(f"node_dest and src must each have length L={spec.L}")
    n = scenario.resolved_interval(spec)
    if rng is None:
        rng = np.random.default_rng(scenario.seed)

    if scenario.hypothesis is Hypothesis.NOISE_ONLY:
        samples = _noise_bits(n, spec.kappa, scenario.noise_mode, rng)
        return SampleStream(samples, Truth(scenario.hypothesis))

    if scenario.hypothesis is Hypothesis.BEACON_PRESENT:
        dest = node_dest
    else:
        dest = _draw_interferer_dest(
            scenario.interferer_dest_policy, node_dest, rng
        )
    beacon = build_beacon(spec, dest, src)
    b = spec.beacon_samples
    if scenario.offset_policy.kind == "fixed":
        offset = scenario.offset_policy.value
        if offset + b > n:
            raise ValueError(
                f"fixed offset {offset} leaves no room for a {b}-sample beacon "
                f"in {n} samples"
            )
    else:
        offset = int(rng.integers(0, n - b + 1))

    samples = _noise_bits(n, spec.kappa, scenario.noise_mode, rng)
    if scenario.noise_mode == "chip":
        noisy_chips = apply_bsc(beacon.chips, scenario.ber, rng)
        samples[offset : offset + b] = oversample(noisy_chips, spec.kappa)
    else:
        clean = oversample(beacon.chips, spec.kappa)
        samples[offset : offset + b] = apply_bsc(clean, scenario.ber, rng)
    return SampleStream(samples, Truth(scenario.hypothesis, offset, dest, src))


def rng_for_trial(seed: int, *key: int) -> np.random.Generator:
    """Independent, reproducible substream for one Monte Carlo trial.

    The spawn key makes the stream a pure function of (seed, key), so trial
    partitioning across workers cannot change any trial's randomness.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def dump_stream(stream: SampleStream, fp, width: int = 96) -> None:
    """Write a stream as a JSON truth header plus '0'/'1' sample lines."""
    t = stream.truth
    header = {
        "hypothesis": t.hypothesis.value,
        "offset": None if t.offset is None else int(t.offset),
        "dest": None if t.dest is None else bits_to_str(t.dest),
        "src": None if t.src is None else bits_to_str(t.src),
    }
    fp.write(json.dumps(header, sort_keys=True) + "\n")
    s = bits_to_str(stream.samples)
    for i in range(0, len(s), width):
        fp.write(s[i : i + width] + "\n")


def load_stream(fp) -> SampleStream:
    """Inverse of dump_stream."""
    if isinstance(fp, str):
        with open(fp, "r") as f:
            return load_stream(f)
    header = json.loads(fp.readline())
    body = "".join(line.strip() for line in fp)
    truth = Truth(
        hypothesis=Hypothesis(header["hypothesis"]),
        offset=header.get("offset"),
        dest=None if header.get("dest") is None else as_bits(header["dest"]),
        src=None if header.get("src") is None else as_bits(header["src"]),
    )
    return SampleStream(as_bits(body), truth)


def dump_stream_to_path(stream: SampleStream, path: str) -> None:
    with open(path, "w") as f:
        dump_stream(stream, f)
