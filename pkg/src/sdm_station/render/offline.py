"""Deterministic offline rendering of a timed command log to a WAV file."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..schema import SoundCommand
from ..wavio import write_wav
from .engine import BLOCK_SIZE, SAMPLE_RATE, RendererState, apply_command, render_block
from .layout import SpeakerLayout


@dataclass(frozen=True)
class TimedCommand:
    time_s: float
    sound_id: str
    command: SoundCommand


def render_session(command_log: list[TimedCommand], state: RendererState,
                   duration_s: float, block_size: int = BLOCK_SIZE) -> np.ndarray:
    """Replay the log at block granularity; returns (n_channels, n_samples)."""
    log = sorted(command_log, key=lambda c: c.time_s)
    n_blocks = int(np.ceil(duration_s * SAMPLE_RATE / block_size))
    out = np.zeros((state.n_channels, n_blocks * block_size))
    li = 0
    for b in range(n_blocks):
        t = b * block_size / SAMPLE_RATE
        while li < len(log) and log[li].time_s <= t:
            apply_command(state, log[li].sound_id, log[li].command, timestamp_us=0)
            li += 1
        block = render_block(state, block_size)
        out[:, b * block_size:(b + 1) * block_size] = block.channels
    return out[:, :int(duration_s * SAMPLE_RATE)]


def render_session_to_wav(command_log: list[TimedCommand], state: RendererState,
                          duration_s: float, path: str,
                          dtype: str = "float32") -> np.ndarray:
    channels = render_session(command_log, state, duration_s)
    write_wav(path, SAMPLE_RATE, channels, dtype=dtype)
    return channels
