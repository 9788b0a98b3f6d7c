"""Wake-up beacon construction.

A beacon is an M-bit pseudo-random preamble followed by a destination and a
source address of L bits each, every address bit spread by a K-chip code.
With Manchester chip coding enabled the on-air sequence doubles, giving
c*(M + 2*K*L) chips, c = 2.

All bit sequences are numpy uint8 arrays with values in {0, 1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

Bits = np.ndarray

# Feedback polynomials known to be primitive under the tap convention below,
# one per register length. Position list = exponents with coefficient 1
# (the degree itself included, constant term implied).
MSEQ_TAPS = {
    2: (2, 1),
    3: (3, 1),
    4: (4, 1),
    5: (5, 2),
    6: (6, 1),
    7: (7, 1),
    8: (8, 6, 5, 4),
    9: (9, 4),
    10: (10, 3),
}


def as_bits(x) -> Bits:
    """Coerce a '0'/'1' string, an iterable, or an array to a uint8 bit array."""
    if isinstance(x, str):
        if x and set(x) - {"0", "1"}:
            raise ValueError(f"bit string may contain only '0'/'1': {x!r}")
        return (np.frombuffer(x.encode("ascii"), dtype=np.uint8) - ord("0")).copy()
    arr = np.asarray(x, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit sequence must be one-dimensional")
    if arr.size and arr.max(initial=0) > 1:
        raise ValueError("bit sequence may contain only 0 and 1")
    return arr


def bits_to_str(bits: Bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits))


def gen_msequence(degree: int, taps, seed) -> Bits:
    """Generate one full period (2^degree - 1 bits) of an LFSR output.

    Fibonacci form: the state holds `degree` bits, newest first; each step
    outputs the oldest bit and shifts in the XOR of the state positions named
    by `taps` (1-indexed from the newest end; must include `degree`).

    Raises ValueError for an all-zero seed ("degenerate LFSR state") and when
    the state recurs before 2^degree - 1 steps ("non-primitive polynomial").
    """
    if not 2 <= degree <= 16:
        raise ValueError(f"degree must be in [2, 16], got {degree}")
    taps = sorted(set(int(t) for t in taps))
    if not taps or taps[0] < 1 or taps[-1] > degree:
        raise ValueError(f"tap positions must lie in [1, {degree}]: {taps}")
    if degree not in taps:
        raise ValueError("taps must include the register length (the degree)")
    state = list(as_bits(seed))
    if len(state) != degree:
        raise ValueError(f"seed length must equal degree {degree}")
    if not any(state):
        raise ValueError("degenerate LFSR state: all-zero seed")

    period = (1 << degree) - 1
    init = tuple(state)
    out = np.empty(period, dtype=np.uint8)
    for i in range(period):
        out[i] = state[-1]
        fb = 0
        for t in taps:
            fb ^= state[t - 1]
        state = [fb] + state[:-1]
        if tuple(state) == init and i < period - 1:
            raise ValueError(
                f"non-primitive polynomial: LFSR period {i + 1} < {period}"
            )
    return out


def default_preamble(M: int) -> Bits:
    """m-sequence preamble of length M = 2^d - 1 from the built-in tap table."""
    degree = (M + 1).bit_length() - 1
    if (1 << degree) - 1 != M or degree not in MSEQ_TAPS:
        raise ValueError(
            f"no built-in m-sequence of length {M}; supply an explicit preamble"
        )
    return gen_msequence(degree, MSEQ_TAPS[degree], [1] * degree)


def manchester_encode(bits: Bits) -> Bits:
    """Map each bit to a chip pair: 1 -> (1,0), 0 -> (0,1)."""
    bits = as_bits(bits)
    out = np.empty(2 * bits.size, dtype=np.uint8)
    out[0::2] = bits
    out[1::2] = 1 - bits
    return out


def manchester_decode(chips: Bits) -> Bits:
    """Inverse of manchester_encode; erasure pairs (0,0)/(1,1) decode to 1."""
    chips = as_bits(chips)
    if chips.size % 2:
        raise ValueError("Manchester chip sequence must have even length")
    a = chips[0::2]
    b = chips[1::2]
    return np.where(a != b, a, np.uint8(1)).astype(np.uint8)


def spread_bits(bits: Bits, code: Bits) -> Bits:
    """Spread each bit by the code: bit 1 emits the code, bit 0 its complement."""
    bits = as_bits(bits)
    code = as_bits(code)
    if code.size == 0:
        raise ValueError("spreading code must be non-empty")
    out = np.where(bits[:, None] == 1, code[None, :], 1 - code[None, :])
    return out.reshape(-1).astype(np.uint8)


@dataclass(eq=False)
class BeaconSpec:
    """Design point of a wake-up beacon.

    M preamble bits, K spreading chips per address bit, L address bits,
    kappa front-end samples per chip, plus the concrete sequences.
    """

    M: int
    K: int
    L: int
    kappa: int
    preamble: Bits = None
    spreading_code: Bits = None
    manchester: bool = True

    def __post_init__(self):
        if min(self.M, self.K, self.L, self.kappa) < 1:
            raise ValueError("M, K, L and kappa must all be >= 1")
        if self.preamble is None:
            self.preamble = default_preamble(self.M)
        self.preamble = as_bits(self.preamble)
        if self.spreading_code is None:
            self.spreading_code = default_preamble(self.K)
        self.spreading_code = as_bits(self.spreading_code)
        if self.preamble.size != self.M:
            raise ValueError(f"preamble length {self.preamble.size} != M={self.M}")
        if self.spreading_code.size != self.K:
            raise ValueError(
                f"spreading code length {self.spreading_code.size} != K={self.K}"
            )

    @property
    def chips_per_bit(self) -> int:
        return 2 if self.manchester else 1

    def code_chips(self, bits: Bits) -> Bits:
        """Chip-code a bit sequence (Manchester if enabled, identity otherwise)."""
        return manchester_encode(bits) if self.manchester else as_bits(bits)

    @property
    def coded_preamble(self) -> Bits:
        return self.code_chips(self.preamble)

    @property
    def coded_spreading(self) -> Bits:
        return self.code_chips(self.spreading_code)

    @property
    def beacon_bits(self) -> int:
        return self.M + 2 * self.K * self.L

    @property
    def beacon_chips(self) -> int:
        return self.chips_per_bit * self.beacon_bits

    @property
    def beacon_samples(self) -> int:
        return self.kappa * self.beacon_chips


def reference_beacon_spec() -> BeaconSpec:
    """The reference design point: M=31, K=7, L=8, kappa=4, Manchester on."""
    return BeaconSpec(M=31, K=7, L=8, kappa=4)


@dataclass(eq=False)
class WakeupBeacon:
    chips: Bits
    dest: Bits
    src: Bits


def build_beacon(spec: BeaconSpec, dest, src) -> WakeupBeacon:
    """Assemble preamble + spread(dest) + spread(src), then chip-code.

    The pre-coding length is exactly M + 2*K*L bits.
    """
    dest = as_bits(dest)
    src = as_bits(src)
    if dest.size != spec.L or src.size != spec.L:
        raise ValueError(f"dest and src must each have length L={spec.L}")
    body = np.concatenate(
        [
            spec.preamble,
            spread_bits(dest, spec.spreading_code),
            spread_bits(src, spec.spreading_code),
        ]
    )
    assert body.size == spec.beacon_bits
    return WakeupBeacon(chips=spec.code_chips(body), dest=dest, src=src)
