"""Software model of a duty-cycled wake-up receiver digital base-band.

Beacon construction (m-sequence preamble, spread addresses, Manchester
chips), a noisy hard-decision front-end model, the bit-exact detector
(preamble matched filter, decimator, address matched filter, decoder), and
the analysis layer (analytic + Monte Carlo ROC, power arithmetic, parameter
search).
"""

from .analysis import (
    ANALYTIC_ASSUMPTIONS,
    ROC_CSV_HEADER,
    SURFACE_CSV_HEADER,
    AmfBitProbs,
    CostModel,
    OptimizeResult,
    PowerPoint,
    RocPoint,
    SurfacePoint,
    amf_bit_probs,
    analytic_roc,
    binom_tail,
    chip_error_probs,
    mc_estimate,
    noise_chip_one_prob,
    optimize_params,
    power,
    resolve_gamma,
    roc_sweep,
    roc_to_csv,
    surface_to_csv,
    two_class_tail,
    wilson_ci,
)
from .config import ConfigError, RunConfig, load_config, parse_config, serialize_config
from .dbb_core import (
    DetectionResult,
    DetectorConfig,
    MatchedFilterSpec,
    address_field_samples,
    address_match,
    decimate,
    decimate_stream,
    despread_addresses,
    detect_wb,
    mf_output,
    mf_outputs,
    mf_scan,
    peak_refine,
    scan_position_count,
)
from .frontend import (
    Hypothesis,
    InterfererDestPolicy,
    OffsetPolicy,
    SampleStream,
    ScenarioConfig,
    Truth,
    apply_bsc,
    dump_stream,
    dump_stream_to_path,
    load_stream,
    oversample,
    rng_for_trial,
    synth_listen_interval,
)
from .wbcodec import (
    BeaconSpec,
    WakeupBeacon,
    as_bits,
    bits_to_str,
    build_beacon,
    default_preamble,
    gen_msequence,
    manchester_decode,
    manchester_encode,
    reference_beacon_spec,
    spread_bits,
)

__version__ = "0.1.0"
