"""Named, independent random streams derived from one master seed.

Each stream is a counter-based Philox generator seeded from a child of the
master ``SeedSequence``; the child index is fixed per name. Changing how
many numbers the agent consumes therefore never shifts the channel or
traffic realizations.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

STREAM_NAMES = ("channel", "traffic", "agent", "init", "eval_channel", "eval_traffic")


class Streams(NamedTuple):
    channel: np.random.Generator
    traffic: np.random.Generator
    agent: np.random.Generator
    init: np.random.Generator
    eval_channel: np.random.Generator
    eval_traffic: np.random.Generator


def make_streams(seed: int) -> Streams:
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAM_NAMES))
    return Streams(*(np.random.Generator(np.random.Philox(child)) for child in children))
