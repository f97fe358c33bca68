"""Temporal sequential pattern mining over discretized multichannel runs.

Pattern text form is ``SYM:ch`` states joined by ``-b;`` (before) or ``-o;``
(overlap), e.g. ``H:1-b;L:2``.
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._kernels import BEFORE, OVERLAP, RunIndex, match_batch
from .discretize import Alphabet, DiscretizedInstance

log = logging.getLogger(__name__)


class Relation(enum.IntEnum):
    BEFORE = BEFORE
    OVERLAP = OVERLAP

    @property
    def tag(self) -> str:
        return "b" if self is Relation.BEFORE else "o"

    @classmethod
    def from_tag(cls, tag: str) -> "Relation":
        if tag == "b":
            return cls.BEFORE
        if tag == "o":
            return cls.OVERLAP
        raise ValueError(f"unknown relation tag {tag!r}")


@dataclass(frozen=True, order=True)
class State:
    symbol: str
    channel: int

    def __str__(self) -> str:
        return f"{self.symbol}:{self.channel}"


@dataclass(frozen=True)
class Pattern:
    states: tuple[State, ...]
    relations: tuple[Relation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "relations", tuple(Relation(r) for r in self.relations))
        if not self.states:
            raise ValueError("a pattern needs at least one state")
        if len(self.relations) != len(self.states) - 1:
            raise ValueError("a pattern of k states needs k-1 relations")

    def __len__(self) -> int:
        return len(self.states)

    def __str__(self) -> str:
        return self.text

    @property
    def text(self) -> str:
        out = str(self.states[0])
        for rel, st in zip(self.relations, self.states[1:]):
            out += f"-{rel.tag};{st}"
        return out

    @property
    def prefix(self) -> "Pattern":
        return Pattern(self.states[:-1], self.relations[:-1])

    def extend(self, relation: Relation, state: State) -> "Pattern":
        return Pattern(self.states + (state,), self.relations + (Relation(relation),))

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        states, rels = [], []
        rest = text.strip()
        while True:
            head, sep, tail = rest.partition(";")
            if sep:
                if len(head) < 2 or head[-2] != "-":
                    raise ValueError(f"malformed pattern {text!r}")
                rels.append(Relation.from_tag(head[-1]))
                head = head[:-2]
            sym, colon, ch = head.partition(":")
            if not colon or not sym or not ch.isdigit():
                raise ValueError(f"malformed state {head!r} in pattern {text!r}")
            states.append(State(sym, int(ch)))
            if not sep:
                break
            rest = tail
        return cls(tuple(states), tuple(rels))


def sort_key(p: Pattern) -> str:
    return p.text


@dataclass(frozen=True)
class MiningConfig:
    alphabet_size: int = 3
    window: int = 2
    min_support: int = 20
    max_pattern_length: int = 2
    max_patterns: int = 50
    use_derivative: bool = False

    def __post_init__(self):
        if self.alphabet_size not in (3, 5):
            raise ValueError(f"alphabet_size must be 3 or 5, got {self.alphabet_size}")
        if self.window < 0:
            raise ValueError("window must be >= 0")
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")
        if self.max_pattern_length < 1:
            raise ValueError("max_pattern_length must be >= 1")
        if self.max_patterns < 1:
            raise ValueError("max_patterns must be >= 1")

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.alphabet_size)

    def header(self) -> str:
        deriv = "true" if self.use_derivative else "false"
        return (
            f"alphabet_size={self.alphabet_size} window={self.window} min_support={self.min_support} "
            f"max_pattern_length={self.max_pattern_length} max_patterns={self.max_patterns} use_derivative={deriv}"
        )


# ------------------------------------------------------------------- matching


class PatternMatcher:
    """Matches patterns against a fixed list of discretized instances.

    The packed run index is built once; per-pattern results are cached by
    canonical text so repeated scoring of the same pattern is free.
    """

    def __init__(self, instances: Sequence[DiscretizedInstance], alphabet: Alphabet, window: int, backend=None):
        self.instances = list(instances)
        self.alphabet = alphabet
        self.window = int(window)
        self.backend = backend
        self.index = RunIndex(self.instances, alphabet)
        self.labels = tuple(sorted({d.label for d in self.instances}))
        lookup = {lab: i for i, lab in enumerate(self.labels)}
        self.class_ids = np.array([lookup[d.label] for d in self.instances], dtype=np.int64)
        self.class_sizes = np.bincount(self.class_ids, minlength=len(self.labels))
        self._cache: dict[str, np.ndarray] = {}

    def _encode(self, patterns: Sequence[Pattern]):
        n = len(patterns)
        kmax = max((len(p) for p in patterns), default=1)
        bins = np.zeros((n, kmax), dtype=np.int64)
        rels = np.zeros((n, max(kmax - 1, 1)), dtype=np.int64)
        lens = np.zeros(n, dtype=np.int64)
        valid = np.ones(n, dtype=bool)
        codes = {s: i for i, s in enumerate(self.alphabet.symbols)}
        n_ch = self.index.n_channels
        for i, p in enumerate(patterns):
            lens[i] = len(p)
            for j, st in enumerate(p.states):
                if not 0 <= st.channel < n_ch or st.symbol not in codes:
                    valid[i] = False
                    break
                bins[i, j] = st.channel * self.alphabet.size + codes[st.symbol]
            for j, r in enumerate(p.relations):
                rels[i, j] = int(r)
        return bins, rels, lens, valid

    def matches(self, patterns: Sequence[Pattern]) -> np.ndarray:
        """Boolean matrix, one row per pattern, one column per instance."""
        out = np.zeros((len(patterns), len(self.instances)), dtype=bool)
        todo = [i for i, p in enumerate(patterns) if p.text not in self._cache]
        if todo:
            sub = [patterns[i] for i in todo]
            bins, rels, lens, valid = self._encode(sub)
            res = np.zeros((len(sub), len(self.instances)), dtype=bool)
            if valid.any():
                res[valid] = match_batch(self.index, bins[valid], rels[valid], lens[valid], self.window, self.backend)
            for p, row in zip(sub, res):
                row.setflags(write=False)
                self._cache[p.text] = row
        for i, p in enumerate(patterns):
            out[i] = self._cache[p.text]
        return out

    def class_counts(self, patterns: Sequence[Pattern]) -> np.ndarray:
        """Per-pattern, per-class support (patterns x classes)."""
        m = self.matches(patterns)
        out = np.zeros((len(patterns), len(self.labels)), dtype=np.int64)
        for c in range(len(self.labels)):
            out[:, c] = m[:, self.class_ids == c].sum(axis=1)
        return out


def match_pattern(p: Pattern, d: DiscretizedInstance, window: int, alphabet: Alphabet | None = None) -> bool:
    for st in p.states:
        if not 0 <= st.channel < d.num_channels:
            raise ValueError(f"pattern {p.text} references channel {st.channel}; instance has {d.num_channels}")
    if alphabet is None:
        alphabet = _infer_alphabet([d], p)
    return bool(PatternMatcher([d], alphabet, window).matches([p])[0, 0])


def _infer_alphabet(instances: Iterable[DiscretizedInstance], *patterns: Pattern) -> Alphabet:
    seen = {r.symbol for d in instances for runs in d.channels for r in runs}
    seen |= {st.symbol for p in patterns for st in p.states}
    for size in (3, 5):
        if seen <= set(Alphabet(size).symbols):
            return Alphabet(size)
    raise ValueError(f"symbols {sorted(seen)} fit neither the 3- nor the 5-letter alphabet")


def support_counts(p: Pattern, instances: Sequence[DiscretizedInstance], window: int,
                   alphabet: Alphabet | None = None) -> dict[str, int]:
    if not instances:
        return {}
    if alphabet is None:
        alphabet = _infer_alphabet(instances, p)
    m = PatternMatcher(instances, alphabet, window)
    counts = m.class_counts([p])[0]
    return {lab: int(c) for lab, c in zip(m.labels, counts)}


# ----------------------------------------------------------------- candidates


def state_universe(num_channels: int, alphabet: Alphabet) -> list[State]:
    return sorted(State(s, c) for c in range(num_channels) for s in alphabet.symbols)


def generate_candidates(frequent_k: Sequence[Pattern], universe: Sequence[State], k: int | None = None) -> list[Pattern]:
    """Extend each frequent pattern by one (relation, state) pair.

    ``k == 0`` is the base case: every state of ``universe`` as a pattern.
    """
    if k == 0:
        out = {Pattern((s,)) for s in universe}
    else:
        out = {p.extend(r, s) for p in frequent_k for s in universe for r in (Relation.BEFORE, Relation.OVERLAP)}
    return sorted(out, key=sort_key)


def mine_frequent(train: Sequence[DiscretizedInstance], cfg: MiningConfig, backend=None,
                  matcher: PatternMatcher | None = None) -> list[Pattern]:
    """Levelwise mining; a candidate survives if any class supports it ``min_support`` times."""
    if matcher is None:
        matcher = PatternMatcher(train, cfg.alphabet, cfg.window, backend)
    n_ch = matcher.index.n_channels
    frequent: list[Pattern] = []
    level: list[Pattern] = []
    universe = state_universe(n_ch, cfg.alphabet)
    for k in range(cfg.max_pattern_length):
        t0 = time.perf_counter()
        cands = generate_candidates(level, universe, k=k)
        if not cands:
            break
        counts = matcher.class_counts(cands)
        keep = counts.max(axis=1) >= cfg.min_support if counts.size else np.zeros(0, dtype=bool)
        level = [p for p, ok in zip(cands, keep) if ok]
        if k == 0:
            # a frequent extension needs a frequent last state, so later levels only extend by these
            universe = [p.states[0] for p in level]
        log.info("level k=%d: %d candidates, %d frequent, %.3fs", k + 1, len(cands), len(level), time.perf_counter() - t0)
        frequent.extend(level)
        if not level:
            break
    return frequent


# ------------------------------------------------------------------- ranking


def chi_square_from_counts(present: np.ndarray, class_sizes: np.ndarray) -> float:
    present = np.asarray(present, dtype=np.float64)
    sizes = np.asarray(class_sizes, dtype=np.float64)
    if np.count_nonzero(sizes) < 2:
        raise ValueError("chi-square ranking needs at least two classes")
    absent = sizes - present
    total = sizes.sum()
    score = 0.0
    for row in (present, absent):
        row_total = row.sum()
        if row_total == 0:
            return 0.0
        expected = row_total * sizes / total
        nz = expected > 0
        score += float(np.sum((row[nz] - expected[nz]) ** 2 / expected[nz]))
    return score


def chi_square_score(p: Pattern, train: Sequence[DiscretizedInstance], window: int,
                     alphabet: Alphabet | None = None, matcher: PatternMatcher | None = None) -> float:
    if matcher is None:
        if alphabet is None:
            alphabet = _infer_alphabet(train, p)
        matcher = PatternMatcher(train, alphabet, window)
    counts = matcher.class_counts([p])[0]
    return chi_square_from_counts(counts, matcher.class_sizes)


@dataclass(frozen=True)
class RankedPatternSet:
    patterns: tuple[tuple[Pattern, float], ...]
    mining_config: MiningConfig = field(default_factory=MiningConfig)

    def __len__(self) -> int:
        return len(self.patterns)

    @property
    def pattern_list(self) -> list[Pattern]:
        return [p for p, _ in self.patterns]

    def to_text(self) -> str:
        lines = [f"# {self.mining_config.header()}"]
        lines += [f"{p.text}\t{s:.6f}" for p, s in self.patterns]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RankedPatternSet":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ValueError("pattern file must start with a '# key=value ...' header")
        kv = dict(tok.split("=", 1) for tok in lines[0][1:].split())
        cfg = MiningConfig(
            alphabet_size=int(kv["alphabet_size"]),
            window=int(kv["window"]),
            min_support=int(kv["min_support"]),
            max_pattern_length=int(kv["max_pattern_length"]),
            max_patterns=int(kv["max_patterns"]),
            use_derivative=kv["use_derivative"] == "true",
        )
        pats = []
        for line in lines[1:]:
            if not line.strip() or line.startswith("#"):
                continue
            text_p, score = line.split("\t")
            pats.append((Pattern.parse(text_p), float(score)))
        return cls(tuple(pats), cfg)


def select_top(mined: Sequence[Pattern], train: Sequence[DiscretizedInstance], cfg: MiningConfig,
               matcher: PatternMatcher | None = None) -> RankedPatternSet:
    if matcher is None:
        matcher = PatternMatcher(train, cfg.alphabet, cfg.window)
    if not mined:
        return RankedPatternSet((), cfg)
    counts = matcher.class_counts(list(mined))
    scored = [(p, chi_square_from_counts(c, matcher.class_sizes)) for p, c in zip(mined, counts)]
    # round so float noise in otherwise equal scores cannot defeat the tie-break
    scored.sort(key=lambda ps: (-round(ps[1], 9), len(ps[0]), ps[0].text))
    return RankedPatternSet(tuple(scored[: cfg.max_patterns]), cfg)


@dataclass(frozen=True)
class BinaryFeatures:
    values: np.ndarray  # uint8, instances x patterns
    row_labels: tuple[str, ...]
    patterns: tuple[Pattern, ...]


def binarize(instances: Sequence[DiscretizedInstance], ranked: RankedPatternSet, backend=None) -> BinaryFeatures:
    cfg = ranked.mining_config
    pats = ranked.pattern_list
    labels = tuple(d.label for d in instances)
    if not pats or not instances:
        return BinaryFeatures(np.zeros((len(instances), len(pats)), dtype=np.uint8), labels, tuple(pats))
    m = PatternMatcher(instances, cfg.alphabet, cfg.window, backend).matches(pats)
    return BinaryFeatures(m.T.astype(np.uint8), labels, tuple(pats))


def mine_and_rank(train: Sequence[DiscretizedInstance], cfg: MiningConfig, backend=None) -> RankedPatternSet:
    matcher = PatternMatcher(train, cfg.alphabet, cfg.window, backend)
    mined = mine_frequent(train, cfg, matcher=matcher)
    return select_top(mined, train, cfg, matcher=matcher)
