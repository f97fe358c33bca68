import itertools

import numpy as np
import pytest

from glovespm.core import Plant, SyntheticSpec
from glovespm.discretize import Alphabet, DiscretizedInstance, collapse_runs
from glovespm.miner import Pattern, Relation, State

# every channel carries one high plateau; classes differ in the channel order
PLANTED_ORDERS = [(0, 1, 2, 3), (1, 3, 0, 2), (2, 0, 3, 1), (3, 2, 1, 0), (0, 2, 1, 3)]


def planted_spec(seed=0, instances_per_class=40, noise=0.05, orders=PLANTED_ORDERS):
    plants = tuple(
        tuple(Plant(ch, "high", (2 + 9 * j, 4 + 9 * j), (4, 6)) for j, ch in enumerate(order)) for order in orders
    )
    return SyntheticSpec(len(orders), instances_per_class, 4, 40, plants, noise, seed)


def planted_pattern(order) -> Pattern:
    """The leading cross-channel BEFORE structure planted for one class."""
    return Pattern((State("H", order[0]), State("H", order[1])), (Relation.BEFORE,))


def brute_force_match(p: Pattern, d: DiscretizedInstance, window: int) -> bool:
    """Enumerate every assignment of states to runs and test the relations directly."""
    choices = []
    for st in p.states:
        runs = [r for r in d.channels[st.channel] if r.symbol == st.symbol]
        if not runs:
            return False
        choices.append(runs)
    for combo in itertools.product(*choices):
        ok = True
        for rel, a, b in zip(p.relations, combo, combo[1:]):
            if rel is Relation.BEFORE:
                ok = a.end < b.start and b.start - a.end <= window
            else:
                ok = b.start <= a.end and b.end >= a.start
            if not ok:
                break
        if ok:
            return True
    return False


def random_instance(rng, n_channels, n_frames, alphabet=Alphabet(3), label="a", p_stay=0.6) -> DiscretizedInstance:
    chans = []
    for c in range(n_channels):
        seq = [rng.integers(alphabet.size)]
        for _ in range(n_frames - 1):
            seq.append(seq[-1] if rng.random() < p_stay else rng.integers(alphabet.size))
        chans.append(tuple(collapse_runs([alphabet.symbols[s] for s in seq], c)))
    return DiscretizedInstance(label, tuple(chans), n_frames)


def random_pattern(rng, n_channels, max_len=3, alphabet=Alphabet(3)) -> Pattern:
    k = int(rng.integers(1, max_len + 1))
    states = tuple(State(alphabet.symbols[rng.integers(alphabet.size)], int(rng.integers(n_channels))) for _ in range(k))
    rels = tuple(Relation(int(rng.integers(2))) for _ in range(k - 1))
    return Pattern(states, rels)


def runs_from(spec: dict, n_channels: int, n_frames: int) -> DiscretizedInstance:
    """Build an instance from {channel: [(symbol, start, end), ...]}; gaps are filled with M."""
    chans = []
    for c in range(n_channels):
        seq = ["M"] * n_frames
        for sym, s, e in spec.get(c, []):
            for t in range(s, e + 1):
                seq[t] = sym
        chans.append(tuple(collapse_runs(seq, c)))
    return DiscretizedInstance("a", tuple(chans), n_frames)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
