"""Training and evaluation drivers, metrics aggregation and CSV output."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from ..agents import Agent, PolicyValueNet, RolloutBuffer, load_checkpoint, save_checkpoint
from ..env import MOD_BITS, LinkEnv, MdpAction, StepOutcome
from .config import RunConfig, dump_config
from .rng import make_streams


@dataclass(frozen=True)
class MetricsRow:
    episode: int
    iteration: int
    reward: float
    avg_queue: float
    avg_aou_slots: float
    avg_dropped: float
    avg_delivered_pkts_per_slot: float
    avg_capacity_bps: float
    avg_velocity_rmse_ms: float
    sinr_db: float
    blocking_level: int
    mod_bits: int
    n_frames: int


METRIC_FIELDS = tuple(f.name for f in fields(MetricsRow))
_INT_FIELDS = {"episode", "iteration", "blocking_level", "mod_bits", "n_frames"}


class IntervalMeter:
    """Running sums over one logging interval.

    ``sinr_db`` is the interval mean; blocking level, modulation and frame
    count are snapshots of the interval's last slot.
    """

    _KEYS = ("reward", "q_end", "aou_avg", "dropped", "delivered_rate_pkts", "capacity_bps", "velocity_rmse")

    def __init__(self):
        self._reset()

    def _reset(self):
        self.n = 0
        self.sums = dict.fromkeys(self._KEYS, 0.0)
        self.sinr_db_sum = 0.0
        self.last: StepOutcome | None = None

    def add(self, out: StepOutcome) -> None:
        self.n += 1
        for key in self._KEYS:
            self.sums[key] += getattr(out, key)
        self.sinr_db_sum += 10.0 * math.log10(out.eta)
        self.last = out

    def flush(self, episode: int, iteration: int) -> MetricsRow:
        n, s, last = self.n, self.sums, self.last
        row = MetricsRow(
            episode=episode,
            iteration=iteration,
            reward=s["reward"] / n,
            avg_queue=s["q_end"] / n,
            avg_aou_slots=s["aou_avg"] / n,
            avg_dropped=s["dropped"] / n,
            avg_delivered_pkts_per_slot=s["delivered_rate_pkts"] / n,
            avg_capacity_bps=s["capacity_bps"] / n,
            avg_velocity_rmse_ms=s["velocity_rmse"] / n,
            sinr_db=self.sinr_db_sum / n,
            blocking_level=int(last.blocking),
            mod_bits=last.mod_bits,
            n_frames=last.n_frames,
        )
        self._reset()
        return row


@dataclass
class TrainResult:
    agent: Agent
    rows: list[MetricsRow]
    update_stats: list[dict] = field(default_factory=list)
    checkpoint_path: Path | None = None
    metrics_path: Path | None = None


@dataclass
class EvalResult:
    rows: list[MetricsRow]
    summary: dict[str, float]
    metrics_path: Path | None = None


def build_env(config: RunConfig) -> LinkEnv:
    return LinkEnv(config.link, config.sensing, config.traffic, config.weights,
                   config.env.sinr_db_center, config.env.sinr_db_scale)


def episode_ends(iterations: int, episodes: int) -> set[int]:
    """Iteration counts (1-based) after which the environment is re-randomized."""
    episodes = max(1, min(episodes, iterations))
    return {round(k * iterations / episodes) for k in range(1, episodes + 1)}


def train(config: RunConfig, out_dir=None) -> TrainResult:
    """Interleave rollouts and agent updates for ``run.iterations`` slots.

    The environment restarts (empty buffer, fresh blocking level and PER)
    at every episode boundary. Metrics are raw environment rewards; the
    agent may learn from a rescaled copy.
    """
    run = config.run
    streams = make_streams(run.seed)
    env = build_env(config)
    agent = Agent(run.agent, config.agent, n_frames=config.sensing.n_frames_max,
                  init_rng=streams.init, rng=streams.agent)
    buffer = RolloutBuffer(config.agent.rollout)
    ends = episode_ends(run.iterations, run.episodes)
    meter = IntervalMeter()
    rows: list[MetricsRow] = []
    update_stats: list[dict] = []

    episode = 1
    obs = env.features(env.reset(streams.channel, streams.traffic))
    for it in range(1, run.iterations + 1):
        sample, value = agent.act(obs)
        next_state, out = env.step(sample.action)
        next_obs = env.features(next_state)
        end = it in ends
        buffer.add(obs, sample.mod_idx, sample.frame_idx, sample.log_prob,
                   agent.scale_reward(out.reward, end), value,
                   episode_end=end, cut_value=agent.value(next_obs) if end else 0.0)
        meter.add(out)
        if it % run.log_interval == 0 or it == run.iterations:
            rows.append(meter.flush(episode, it))
        if end and it < run.iterations:
            episode += 1
            next_obs = env.features(env.reset(streams.channel, streams.traffic))
        obs = next_obs
        if buffer.full or it == run.iterations:
            agent.finalize(buffer, agent.value(obs))
            update_stats.append(agent.update(buffer))
            buffer.clear()

    result = TrainResult(agent, rows, update_stats)
    if out_dir is not None:
        out = Path(out_dir)
        result.metrics_path = write_metrics_csv(rows, out / "train_metrics.csv")
        result.checkpoint_path = save_checkpoint(
            agent.net, out / "checkpoint.json",
            metadata={"agent": run.agent, "reward": run.reward, "scenario": run.scenario,
                      "seed": run.seed, "iterations": run.iterations},
        )
        _write_text(out / "config.ini", dump_config(config))
    return result


def greedy_policy(net: PolicyValueNet) -> Callable[[np.ndarray], MdpAction]:
    """Argmax per head; ties go to the lowest index."""
    def policy(obs):
        cache = net.forward(obs)
        return MdpAction.from_indices(int(np.argmax(cache.mod_logits[0])), int(np.argmax(cache.frame_logits[0])))
    return policy


def force_frames(policy: Callable[[np.ndarray], MdpAction], n_frames: int) -> Callable[[np.ndarray], MdpAction]:
    """Keep the policy's modulation but pin the frame count."""
    def forced(obs):
        return MdpAction(policy(obs).mod_bits, n_frames)
    return forced


def evaluate(config: RunConfig, checkpoint=None, policy: Callable[[np.ndarray], MdpAction] | None = None,
             out_dir=None) -> EvalResult:
    """Run a fixed policy for ``eval_iterations`` slots on the evaluation streams.

    ``checkpoint`` is a path or a :class:`PolicyValueNet` evaluated greedily;
    alternatively pass any ``policy(obs) -> MdpAction``.
    """
    if policy is None:
        if checkpoint is None:
            raise ValueError("evaluate needs a checkpoint or a policy")
        net = checkpoint
        if not isinstance(checkpoint, PolicyValueNet):
            net, _ = load_checkpoint(checkpoint, expect={
                "obs_dim": 2, "n_mod": len(MOD_BITS), "n_frames": config.sensing.n_frames_max,
                "hidden": config.agent.hidden})
        policy = greedy_policy(net)

    run = config.run
    iterations = config.eval_iterations
    streams = make_streams(run.seed)
    env = build_env(config)
    ends = episode_ends(iterations, run.episodes)
    meter = IntervalMeter()
    total = IntervalMeter()
    rows: list[MetricsRow] = []
    episode = 1
    obs = env.features(env.reset(streams.eval_channel, streams.eval_traffic))
    for it in range(1, iterations + 1):
        state, out = env.step(policy(obs))
        meter.add(out)
        total.add(out)
        if it % run.log_interval == 0 or it == iterations:
            rows.append(meter.flush(episode, it))
        if it in ends and it < iterations:
            episode += 1
            state = env.reset(streams.eval_channel, streams.eval_traffic)
        obs = env.features(state)

    agg = total.flush(episode, iterations)
    summary = {
        "reward": agg.reward,
        "queue": agg.avg_queue,
        "aou_slots": agg.avg_aou_slots,
        "dropped": agg.avg_dropped,
        "delivered_pkts_per_slot": agg.avg_delivered_pkts_per_slot,
        "delivered_bps": agg.avg_delivered_pkts_per_slot * config.traffic.packet_bytes * 8 / config.link.slot_s,
        "capacity_bps": agg.avg_capacity_bps,
        "velocity_rmse_ms": agg.avg_velocity_rmse_ms,
    }
    result = EvalResult(rows, summary)
    if out_dir is not None:
        result.metrics_path = write_metrics_csv(rows, Path(out_dir) / "eval_metrics.csv")
    return result


# ---------------------------------------------------------------- CSV

def format_value(value) -> str:
    """Integers verbatim; reals positional with 6 significant digits."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite metric {value}")
    if value == 0.0:
        return "0"
    return np.format_float_positional(value, precision=6, unique=False, fractional=False, trim="-")


def write_metrics_csv(rows: Sequence[MetricsRow], path) -> Path:
    if not rows:
        raise ValueError("no metrics collected")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(METRIC_FIELDS)
            for row in rows:
                writer.writerow([format_value(v) for v in astuple(row)])
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc}") from exc
    return path


def read_metrics_csv(path) -> list[dict[str, float]]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            return [{k: (int(v) if k in _INT_FIELDS else float(v)) if k in METRIC_FIELDS else float(v)
                     for k, v in rec.items()} for rec in reader]
    except OSError as exc:
        raise OSError(f"cannot read metrics from {path}: {exc}") from exc


def postprocess(in_path, out_path) -> Path:
    """Append ``normalized_reward``: the reward column min-max scaled over the file."""
    records = read_metrics_csv(in_path)
    if not records:
        raise ValueError(f"{in_path}: no metrics rows")
    rewards = np.array([r["reward"] for r in records])
    lo, hi = rewards.min(), rewards.max()
    norm = np.zeros_like(rewards) if hi == lo else (rewards - lo) / (hi - lo)
    columns = list(records[0]) + ["normalized_reward"]
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with out_path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for rec, n in zip(records, norm):
                writer.writerow([format_value(rec[c]) for c in columns[:-1]] + [format_value(float(n))])
    except OSError as exc:
        raise OSError(f"cannot write {out_path}: {exc}") from exc
    return out_path


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------- replicas

def _train_and_eval(config: RunConfig) -> tuple[list[MetricsRow], dict[str, float]]:
    result = train(config)
    return result.rows, evaluate(config, result.agent.net).summary


def run_replicas(configs: Iterable[RunConfig], workers: int = 1):
    """Train then greedily evaluate each config; each replica owns its streams.

    Returns ``[(train_rows, eval_summary), ...]`` in input order.
    """
    configs = list(configs)
    if workers <= 1:
        return [_train_and_eval(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_train_and_eval, configs))


__all__ = [
    "EvalResult", "IntervalMeter", "METRIC_FIELDS", "MetricsRow", "TrainResult", "build_env",
    "episode_ends", "evaluate", "force_frames", "format_value", "greedy_policy", "postprocess",
    "read_metrics_csv", "run_replicas", "train", "write_metrics_csv"
]
