"""Equal-width symbolic discretization and run-length collapsing."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import TimeSeriesInstance

_SYMBOLS = {3: ("L", "M", "H"), 5: ("VL", "L", "M", "H", "VH")}


@dataclass(frozen=True)
class Alphabet:
    size: int = 3

    def __post_init__(self):
        if self.size not in _SYMBOLS:
            raise ValueError(f"alphabet size must be 3 or 5, got {self.size}")

    @property
    def symbols(self) -> tuple[str, ...]:
        return _SYMBOLS[self.size]

    @property
    def edges(self) -> np.ndarray:
        """Interior bin edges; bins are [lo, hi) except the last, [lo, 1]."""
        return np.arange(1, self.size) / self.size

    def code(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValueError(f"symbol {symbol!r} not in alphabet {self.symbols}") from None


@dataclass(frozen=True)
class Run:
    symbol: str
    channel: int
    start: int
    end: int  # inclusive

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class DiscretizedInstance:
    label: str
    channels: tuple[tuple[Run, ...], ...]
    num_frames: int

    @property
    def num_channels(self) -> int:
        return len(self.channels)

    def expand(self) -> list[list[str]]:
        """Per-frame symbols of every channel, rebuilt from the runs."""
        out = []
        for runs in self.channels:
            seq: list[str] = []
            for r in runs:
                seq.extend([r.symbol] * r.length)
            out.append(seq)
        return out


def discretize_codes(signal, alphabet: Alphabet) -> np.ndarray:
    v = np.asarray(signal, dtype=np.float64)
    if v.size and (np.any(v < 0.0) or np.any(v > 1.0) or not np.all(np.isfinite(v))):
        bad = v[(v < 0.0) | (v > 1.0) | ~np.isfinite(v)][0]
        raise ValueError(f"value {bad!r} outside [0, 1]; spatially scale before discretizing")
    return np.searchsorted(alphabet.edges, v, side="right")


def discretize_channel(signal, alphabet: Alphabet) -> list[str]:
    syms = alphabet.symbols
    return [syms[c] for c in discretize_codes(signal, alphabet)]


def collapse_runs(symbols: Sequence, channel: int) -> list[Run]:
    if len(symbols) == 0:
        raise ValueError("cannot collapse an empty symbol sequence")
    runs = []
    start = 0
    for i in range(1, len(symbols) + 1):
        if i == len(symbols) or symbols[i] != symbols[start]:
            runs.append(Run(str(symbols[start]), channel, start, i - 1))
            start = i
    return runs


def discretize_instance(inst: TimeSeriesInstance, alphabet: Alphabet) -> DiscretizedInstance:
    chans = tuple(
        tuple(collapse_runs(discretize_channel(row, alphabet), c)) for c, row in enumerate(inst.matrix)
    )
    return DiscretizedInstance(inst.label, chans, inst.num_frames)


def discretize_dataset(instances, alphabet: Alphabet) -> list[DiscretizedInstance]:
    return [discretize_instance(x, alphabet) for x in instances]
