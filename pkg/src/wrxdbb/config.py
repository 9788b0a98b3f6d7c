"""JSON run-configuration parsing, validation, and serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .analysis import resolve_gamma
from .frontend import Hypothesis, InterfererDestPolicy, OffsetPolicy, ScenarioConfig
from .wbcodec import BeaconSpec, Bits, as_bits, bits_to_str


class ConfigError(ValueError):
    """A malformed or incomplete run configuration."""


_BEACON_KEYS = {"M", "K", "L", "kappa", "manchester", "preamble",
                "spreading_code", "dest", "src"}
_DETECTOR_KEYS = {"node_address", "gamma"}
_SCENARIO_KEYS = {"hypothesis", "ber", "interval_samples", "offset_policy",
                  "interferer_dest_policy", "seed", "noise_mode"}
_ANALYSIS_KEYS = {"trials", "gammas", "method", "workers", "aligned_only"}
_OUTPUT_KEYS = {"path", "format", "figure"}
_OPTIMIZE_KEYS = {"L", "ber", "kappa", "M_range", "K_range", "gamma_grid",
                  "cost"}
_COST_KEYS = {"c_tx", "c_miss", "c_fa", "beacon_rate", "listen_rate"}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) in {where}: {', '.join(sorted(unknown))}"
        )


def _get(section: dict, key: str, kind, default, where: str):
    if key not in section:
        return default
    value = section[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigError(f"{where}.{key} must be an integer")
    if not isinstance(value, kind):
        raise ConfigError(
            f"{where}.{key} must be {getattr(kind, '__name__', kind)}"
        )
    return value


@dataclass(eq=False)
class RunConfig:
    """Parsed and validated run configuration.

    gamma values are resolved to absolute integer thresholds at parse time;
    serialization writes the resolved values, so parse/serialize is
    idempotent after one round.
    """

    spec: BeaconSpec
    node_address: Bits | None = None
    gamma: int | None = None
    dest: Bits | None = None
    src: Bits | None = None
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    trials: int = 1000
    gammas: list = field(default_factory=list)
    method: str = "both"
    workers: int = 1
    aligned_only: bool = False
    output_path: str | None = None
    output_format: str = "csv"
    figure: bool = True
    optimize: dict | None = None

    @property
    def pmf_length(self) -> int:
        return self.spec.kappa * self.spec.coded_preamble.size

    def require(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise ConfigError(f"missing required config field: {name}")
        return value


def parse_config(data) -> RunConfig:
    """Build a RunConfig from a parsed-JSON dict (or a JSON string)."""
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    known = {"beacon", "detector", "scenario", "analysis", "output", "optimize"}
    _check_keys(data, known, "config")

    try:
        beacon = data.get("beacon", {})
        _check_keys(beacon, _BEACON_KEYS, "beacon")
        spec = BeaconSpec(
            M=_get(beacon, "M", int, 31, "beacon"),
            K=_get(beacon, "K", int, 7, "beacon"),
            L=_get(beacon, "L", int, 8, "beacon"),
            kappa=_get(beacon, "kappa", int, 4, "beacon"),
            preamble=beacon.get("preamble"),
            spreading_code=beacon.get("spreading_code"),
            manchester=_get(beacon, "manchester", bool, True, "beacon"),
        )
        dest = beacon.get("dest")
        src = beacon.get("src")
        dest = None if dest is None else as_bits(dest)
        src = None if src is None else as_bits(src)

        det = data.get("detector", {})
        _check_keys(det, _DETECTOR_KEYS, "detector")
        node = det.get("node_address")
        node = None if node is None else as_bits(node)
        j = spec.kappa * spec.coded_preamble.size
        gamma = det.get("gamma")
        gamma = None if gamma is None else resolve_gamma(gamma, j)

        scn = data.get("scenario", {})
        _check_keys(scn, _SCENARIO_KEYS, "scenario")
        hyp_name = _get(scn, "hypothesis", str, "NOISE_ONLY", "scenario")
        try:
            hypothesis = Hypothesis(hyp_name.upper())
        except ValueError:
            raise ConfigError(f"unknown hypothesis {hyp_name!r}")
        off = scn.get("offset_policy", "uniform")
        if off == "uniform":
            offset_policy = OffsetPolicy.uniform()
        elif isinstance(off, int) and not isinstance(off, bool):
            offset_policy = OffsetPolicy.fixed(off)
        else:
            raise ConfigError(
                "scenario.offset_policy must be \"uniform\" or an integer"
            )
        idp = scn.get("interferer_dest_policy", "uniform")
        if idp == "uniform":
            dest_policy = InterfererDestPolicy.uniform()
        elif isinstance(idp, str):
            dest_policy = InterfererDestPolicy.fixed(idp)
        else:
            raise ConfigError(
                "scenario.interferer_dest_policy must be \"uniform\" or a bit string"
            )
        scenario = ScenarioConfig(
            hypothesis=hypothesis,
            ber=_get(scn, "ber", float, 0.0, "scenario"),
            interval_samples=_get(scn, "interval_samples", int, 0, "scenario"),
            offset_policy=offset_policy,
            interferer_dest_policy=dest_policy,
            seed=_get(scn, "seed", int, 0, "scenario"),
            noise_mode=_get(scn, "noise_mode", str, "independent", "scenario"),
        )
        scenario.resolved_interval(spec)  # validate the interval fits

        ana = data.get("analysis", {})
        _check_keys(ana, _ANALYSIS_KEYS, "analysis")
        raw_gammas = ana.get("gammas", [])
        if not isinstance(raw_gammas, list):
            raise ConfigError("analysis.gammas must be a list")
        gammas = [resolve_gamma(g, j) for g in raw_gammas]
        method = _get(ana, "method", str, "both", "analysis")
        if method not in ("mc", "analytic", "both"):
            raise ConfigError(
                f"analysis.method must be mc, analytic, or both, got {method!r}"
            )
        trials = _get(ana, "trials", int, 1000, "analysis")
        workers = _get(ana, "workers", int, 1, "analysis")
        if workers < 1:
            raise ConfigError("analysis.workers must be >= 1")
        aligned_only = _get(ana, "aligned_only", bool, False, "analysis")

        out = data.get("output", {})
        _check_keys(out, _OUTPUT_KEYS, "output")
        output_format = _get(out, "format", str, "csv", "output")
        if output_format not in ("csv", "json"):
            raise ConfigError(
                f"output.format must be csv or json, got {output_format!r}"
            )

        opt = data.get("optimize")
        if opt is not None:
            _check_keys(opt, _OPTIMIZE_KEYS, "optimize")
            if "cost" in opt:
                _check_keys(opt["cost"], _COST_KEYS, "optimize.cost")
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        spec=spec,
        node_address=node,
        gamma=gamma,
        dest=dest,
        src=src,
        scenario=scenario,
        trials=trials,
        gammas=gammas,
        method=method,
        workers=workers,
        aligned_only=aligned_only,
        output_path=_get(out, "path", str, None, "output"),
        output_format=output_format,
        figure=_get(out, "figure", bool, True, "output"),
        optimize=opt,
    )


def load_config(path: str) -> RunConfig:
    with open(path, "r") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_config(data)


def serialize_config(cfg: RunConfig) -> str:
    """Emit the resolved configuration as stable, sorted JSON."""
    scn = cfg.scenario
    off = scn.offset_policy
    idp = scn.interferer_dest_policy
    data = {
        "beacon": {
            "M": cfg.spec.M,
            "K": cfg.spec.K,
            "L": cfg.spec.L,
            "kappa": cfg.spec.kappa,
            "manchester": cfg.spec.manchester,
            "preamble": bits_to_str(cfg.spec.preamble),
            "spreading_code": bits_to_str(cfg.spec.spreading_code),
        },
        "detector": {},
        "scenario": {
            "hypothesis": scn.hypothesis.value,
            "ber": scn.ber,
            "interval_samples": scn.interval_samples,
            "offset_policy": "uniform" if off.kind == "uniform" else off.value,
            "interferer_dest_policy": (
                "uniform" if idp.kind == "uniform"
                else "".join(map(str, idp.address))
            ),
            "seed": scn.seed,
            "noise_mode": scn.noise_mode,
        },
        "analysis": {
            "trials": cfg.trials,
            "gammas": cfg.gammas,
            "method": cfg.method,
            "workers": cfg.workers,
            "aligned_only": cfg.aligned_only,
        },
        "output": {
            "format": cfg.output_format,
            "figure": cfg.figure,
        },
    }
    if cfg.dest is not None:
        data["beacon"]["dest"] = bits_to_str(cfg.dest)
    if cfg.src is not None:
        data["beacon"]["src"] = bits_to_str(cfg.src)
    if cfg.node_address is not None:
        data["detector"]["node_address"] = bits_to_str(cfg.node_address)
    if cfg.gamma is not None:
        data["detector"]["gamma"] = cfg.gamma
    if cfg.output_path is not None:
        data["output"]["path"] = cfg.output_path
    if cfg.optimize is not None:
        data["optimize"] = cfg.optimize
    return json.dumps(data, indent=2, sort_keys=True) + "\n"
