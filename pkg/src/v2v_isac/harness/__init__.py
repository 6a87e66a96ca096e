from .config import ConfigError, RunConfig, config_from_sections, default_config, dump_config, load_config
from .rng import Streams, make_streams
from .runner import (
    METRIC_FIELDS,
    MetricsRow,
    evaluate,
    force_frames,
    greedy_policy,
    postprocess,
    read_metrics_csv,
    run_replicas,
    train,
    write_metrics_csv,
)
