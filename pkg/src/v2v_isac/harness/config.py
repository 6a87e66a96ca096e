"""Run configuration: an INI-style sectioned key-value file.

Every key is optional. Missing keys take the simulation defaults (carrier
60 GHz, 512 subcarriers, up to 100 frames, 2 ms slots, ...). The
``[run] scenario`` preset fills the blocking/PER probability vectors and the
arrival rate; explicit keys in ``[channel]`` or ``[traffic]`` override it.

Example::

    [run]
    agent = a2c
    scenario = poor
    iterations = 20000

    [channel]
    preset = calibrated
    per_probs = 0.8, 0.1, 0.1
"""

from __future__ import annotations

import configparser
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

from ..agents.agent import AGENT_KINDS, AgentConfig
from ..channel import LINK_PRESETS, LinkParams, link_preset, validate_config
from ..env import SCENARIOS, RewardMode, RewardWeights
from ..sensing import SensingParams
from ..traffic import TrafficParams


class ConfigError(ValueError):
    """Unparseable, unknown or invalid configuration entry."""


@dataclass(frozen=True)
class EnvSection:
    w1: float = 1e-5
    w2: float = 1.0
    w3: float = 1e-5
    sinr_db_center: float = 0.0
    sinr_db_scale: float = 30.0


@dataclass(frozen=True)
class RunSection:
    agent: str = "ppo"
    reward: str = "aou"
    scenario: str = "strong"
    seed: int = 0
    episodes: int = 100
    iterations: int = 100_000
    eval_iterations: int | None = None  # defaults to iterations
    log_interval: int = 100
    out_dir: str = "runs"


@dataclass(frozen=True)
class RunConfig:
    link: LinkParams = field(default_factory=lambda: link_preset("calibrated"))
    traffic: TrafficParams = TrafficParams()
    sensing: SensingParams = SensingParams()
    env: EnvSection = EnvSection()
    agent: AgentConfig = AgentConfig()
    run: RunSection = RunSection()
    link_preset: str = "calibrated"

    @property
    def weights(self) -> RewardWeights:
        return RewardWeights(self.env.w1, self.env.w2, self.env.w3, RewardMode(self.run.reward))

    @property
    def eval_iterations(self) -> int:
        return self.run.eval_iterations or self.run.iterations

    def with_run(self, **changes) -> "RunConfig":
        """Copy with ``[run]`` keys replaced; scenario changes re-derive the preset vectors."""
        run = replace(self.run, **changes)
        if "scenario" in changes and run.scenario != "custom":
            sc = _scenario(run.scenario, "run.scenario")
            return replace(
                self,
                run=run,
                link=replace(self.link, blocking_probs=sc.blocking_probs, per_probs=sc.per_probs),
                traffic=replace(self.traffic, lambda_slot=sc.lambda_slot),
            )
        return replace(self, run=run)


# ---------------------------------------------------------------- parsing

def _float_list(text: str) -> tuple[float, ...]:
    text = text.strip()
    if text.startswith("["):
        values = json.loads(text)
    else:
        values = [v for v in text.replace(",", " ").split()]
    return tuple(float(v) for v in values)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def inner(text: str):
        return None if text.strip().lower() in ("", "none", "auto") else parse(text)
    return inner


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


SCHEMA: dict[str, dict[str, Callable[[str], Any]]] = {
    "channel": {
        "preset": str,
        "carrier_hz": float,
        "bandwidth_hz": float,
        "noise_dbm_hz": float,
        "tx_power_dbm": float,
        "antenna_gain_linear": float,
        "antenna_gain_dbi": float,
        "sector_beamwidth_deg": float,
        "halfpower_beamwidth_deg": float,
        "pilot_s": float,
        "slot_s": float,
        "distance_m": float,
        "blocking_probs": _float_list,
        "per_values": _float_list,
        "per_probs": _float_list,
        "align_on_block_change": _bool,
    },
    "traffic": {"lambda_slot": float, "q_max": _int, "packet_bytes": _int},
    "sensing": {
        "n_subcarriers": _int,
        "frame_period_s": _optional(float),
        "resolution_period_s": _optional(float),
        "n_frames_max": _int,
        "v_max": float,
        "d_max": float,
    },
    "env": {
        "weights": _float_list,
        "sinr_db_center": float,
        "sinr_db_scale": float,
    },
    "agent": {
        "hidden": _int,
        "lr": float,
        "gamma": float,
        "gae_lambda": float,
        "clip_eps": float,
        "entropy_coef": float,
        "value_coef": float,
        "rollout": _int,
        "minibatch": _int,
        "epochs": _int,
        "max_grad_norm": _optional(float),
        "normalize_advantages": _bool,
        "scale_rewards": _bool,
    },
    "run": {
        "agent": str,
        "reward": str,
        "scenario": str,
        "seed": _int,
        "episodes": _int,
        "iterations": _int,
        "eval_iterations": _optional(_int),
        "log_interval": _int,
        "out_dir": str,
    },
}

EXPECTED_LENGTHS = {"channel.blocking_probs": 4, "env.weights": 3}


def _scenario(name: str, key: str):
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"{key}: unknown scenario {name!r}; choose from {sorted(SCENARIOS)} or 'custom'") from None


def _parse_sections(raw: dict[str, dict[str, Any]]) -> dict[str, dict[str, Any]]:
    parsed: dict[str, dict[str, Any]] = {name: {} for name in SCHEMA}
    for section, entries in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"[{section}]: unknown section; expected one of {sorted(SCHEMA)}")
        for key, value in entries.items():
            path = f"{section}.{key}"
            if key not in SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key")
            if isinstance(value, str):
                try:
                    value = SCHEMA[section][key](value)
                except (ValueError, json.JSONDecodeError) as exc:
                    raise ConfigError(f"{path}: cannot parse {value!r} ({exc})") from None
            elif isinstance(value, list):
                value = tuple(value)
            if path in EXPECTED_LENGTHS and len(value) != EXPECTED_LENGTHS[path]:
                raise ConfigError(f"{path}: expected {EXPECTED_LENGTHS[path]} values, got {len(value)}")
            parsed[section][key] = value
    return parsed


def config_from_sections(raw: dict[str, dict[str, Any]]) -> RunConfig:
    """Build and validate a config from ``{section: {key: value}}``.

    Values may be strings (parsed exactly as in a file) or already-typed.
    """
    p = _parse_sections(raw)

    run = RunSection(**p["run"])
    if run.agent not in AGENT_KINDS:
        raise ConfigError(f"run.agent: must be one of {AGENT_KINDS}, got {run.agent!r}")
    try:
        RewardMode(run.reward)
    except ValueError:
        raise ConfigError(f"run.reward: must be 'aou' or 'queue', got {run.reward!r}") from None
    for key in ("episodes", "iterations", "log_interval"):
        if getattr(run, key) < 1:
            raise ConfigError(f"run.{key}: must be >= 1")

    ch = dict(p["channel"])
    preset = ch.pop("preset", "calibrated")
    if preset not in LINK_PRESETS:
        raise ConfigError(f"channel.preset: unknown preset {preset!r}; choose from {sorted(LINK_PRESETS)}")
    if "antenna_gain_dbi" in ch:
        if "antenna_gain_linear" in ch:
            raise ConfigError("channel.antenna_gain_dbi: give either antenna_gain_dbi or antenna_gain_linear")
        ch["antenna_gain_linear"] = 10.0 ** (ch.pop("antenna_gain_dbi") / 10.0)
    slot_s = ch.get("slot_s", LinkParams.slot_s)
    ch.setdefault("pilot_s", 0.01 * slot_s)

    tr = dict(p["traffic"])
    if run.scenario == "custom":
        missing = [k for k, sec in (("blocking_probs", ch), ("per_probs", ch), ("lambda_slot", tr)) if k not in sec]
        if missing:
            raise ConfigError(f"run.scenario: 'custom' requires explicit {', '.join(missing)}")
    else:
        sc = _scenario(run.scenario, "run.scenario")
        ch.setdefault("blocking_probs", sc.blocking_probs)
        ch.setdefault("per_probs", sc.per_probs)
        tr.setdefault("lambda_slot", sc.lambda_slot)
    link = link_preset(preset, **ch)
    traffic = TrafficParams(**tr)

    se = dict(p["sensing"])
    n_frames_max = se.get("n_frames_max", SensingParams.n_frames_max)
    if se.get("frame_period_s") is None:
        se["frame_period_s"] = link.slot_s / max(n_frames_max, 1)
    sensing = SensingParams(carrier_hz=link.carrier_hz, bandwidth_hz=link.bandwidth_hz, **se)

    en = dict(p["env"])
    if "weights" in en:
        en["w1"], en["w2"], en["w3"] = en.pop("weights")
    env = EnvSection(**en)
    if min(env.w1, env.w2, env.w3) < 0:
        raise ConfigError("env.weights: weights must be non-negative")
    if env.sinr_db_scale <= 0:
        raise ConfigError("env.sinr_db_scale: must be positive")

    agent = AgentConfig(**p["agent"])
    for key in ("hidden", "rollout", "minibatch", "epochs"):
        if getattr(agent, key) < 1:
            raise ConfigError(f"agent.{key}: must be >= 1")
    if not 0 <= agent.gae_lambda <= 1:
        raise ConfigError("agent.gae_lambda: must lie in [0, 1]")
    if agent.clip_eps <= 0:
        raise ConfigError("agent.clip_eps: must be positive")
    if not 0 < agent.gamma <= 1:
        raise ConfigError("agent.gamma: must lie in (0, 1]")

    config = RunConfig(link=link, traffic=traffic, sensing=sensing, env=env, agent=agent, run=run,
                       link_preset=preset)
    check(config)
    return config


def check(config: RunConfig) -> None:
    """Raise :class:`ConfigError` listing every physical-constraint violation."""
    problems = validate_config(config.link, config.sensing, config.traffic)
    if problems:
        raise ConfigError("invalid configuration: " + "; ".join(problems))


def read_sections(path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive
    path = Path(path)
    try:
        with path.open() as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    return {section: dict(parser.items(section)) for section in parser.sections()}


def load_config(path, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Read ``path`` and apply ``overrides`` given as ``{"section.key": value}``."""
    raw = read_sections(path)
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        raw.setdefault(section, {})[key] = value if isinstance(value, str) else str(value)
    try:
        return config_from_sections(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def dump_config(config: RunConfig) -> str:
    """Render a fully-resolved config that loads back to an equal object."""
    def fmt(v):
        if isinstance(v, (tuple, list)):
            return ", ".join(repr(float(x)) for x in v)
        if v is None:
            return "none"
        return repr(v) if isinstance(v, float) else str(v)

    link = asdict(config.link)
    sections = {
        "channel": {"preset": config.link_preset, **link},
        "traffic": asdict(config.traffic),
        "sensing": {k: v for k, v in asdict(config.sensing).items() if k not in ("carrier_hz", "bandwidth_hz")},
        "env": {"weights": (config.env.w1, config.env.w2, config.env.w3),
                "sinr_db_center": config.env.sinr_db_center, "sinr_db_scale": config.env.sinr_db_scale},
        "agent": asdict(config.agent),
        "run": asdict(config.run),
    }
    lines = []
    for name, entries in sections.items():
        lines.append(f"[{name}]")
        lines += [f"{k} = {fmt(v)}" for k, v in entries.items()]
        lines.append("")
    return "\n".join(lines)


def default_config(**run_changes) -> RunConfig:
    config = config_from_sections({})
    return config.with_run(**run_changes) if run_changes else config


__all__ = [
    "ConfigError", "EnvSection", "RunConfig", "RunSection", "check", "config_from_sections",
    "default_config", "dump_config", "load_config", "read_sections",
]
