"""Feature-space and hyperparameter analyses: PCA, ablation, coordinate ascent."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import Dataset, DatasetError, split_train_test
from .pipeline import FeatureMode, PipelineSettings, concat_features, run_split  # noqa: F401  (re-export)
from .preprocess import FlatMatrix

log = logging.getLogger(__name__)

PCA_TOL = 1e-10
PCA_MAX_ITERS = 10_000


@dataclass(frozen=True)
class PCAResult:
    projected: np.ndarray  # N x k
    components: np.ndarray  # k x D, orthonormal rows
    explained_variance: np.ndarray  # k
    mean: np.ndarray


def _power_iteration(A, start, basis, tol, max_iters):
    v = start
    for b in basis:
        v = v - (b @ v) * b
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("power iteration start vector collapsed")
    v = v / norm
    for _ in range(max_iters):
        w = A @ v
        for b in basis:
            w = w - (b @ w) * b
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return v  # remaining spectrum is zero; any orthogonal direction will do
        w /= norm
        if w @ v < 0:
            w = -w
        if np.linalg.norm(w - v) < tol:
            return w
        v = w
    return v


def pca_project(X, k: int = 3, seed: int = 0) -> PCAResult:
    """Top-``k`` principal components by power iteration with deflation."""
    values = np.asarray(getattr(X, "values", X), dtype=np.float64)
    n, d = values.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 rows")
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k={k} must lie in [1, min(N-1, D)] = [1, {min(n - 1, d)}]")
    mean = values.mean(axis=0)
    Xc = values - mean
    if not np.any(Xc):
        raise ValueError("all rows are identical; no variance to project")
    cov = Xc.T @ Xc / (n - 1)
    A = cov.copy()
    rng = np.random.default_rng(seed)
    comps, variances = [], []
    for _ in range(k):
        v = _power_iteration(A, rng.standard_normal(d), comps, PCA_TOL, PCA_MAX_ITERS)
        lam = float(v @ cov @ v)
        A = A - lam * np.outer(v, v)
        comps.append(v)
        variances.append(max(lam, 0.0))
    C = np.array(comps)
    flip = np.sign(C[np.arange(k), np.argmax(np.abs(C), axis=1)])
    C *= flip[:, None]
    return PCAResult(Xc @ C.T, C, np.array(variances), mean)


# --------------------------------------------------------------------- ablation


@dataclass(frozen=True)
class AblationSpec:
    """Named channel groups to remove, singly and then cumulatively in order.

    Each group is a list of selectors; a selector is a schema group tag
    (POS/ROT/FINGER/OTHER) or a channel name.
    """

    groups: tuple[tuple[str, tuple[str, ...]], ...]

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Sequence[str]] | Sequence) -> "AblationSpec":
        items = raw.items() if isinstance(raw, Mapping) else raw
        return cls(tuple((str(name), tuple(sel) if not isinstance(sel, str) else (sel,)) for name, sel in items))

    def resolve(self, schema) -> list[tuple[str, list[int]]]:
        out = []
        for name, selectors in self.groups:
            chans: set[int] = set()
            for sel in selectors:
                hit = [i for i, (n, g) in enumerate(zip(schema.names, schema.groups)) if g == sel or n == sel]
                if not hit:
                    raise DatasetError(f"ablation group {name!r}: selector {sel!r} matches no channel or group")
                chans.update(hit)
            out.append((name, sorted(chans)))
        return out


def ablate(ds: Dataset, spec: AblationSpec, settings: PipelineSettings = PipelineSettings(),
           backend=None) -> list[tuple[str, float]]:
    """Rows of (removed groups, test error): baseline, single removals, cumulative removals."""
    settings = replace(settings, feature_mode=FeatureMode.FLAT)
    groups = spec.resolve(ds.schema)
    train_ds, test_ds = split_train_test(ds, settings.train_fraction, settings.split_seed)

    def err(drop: list[int]) -> float:
        tr, te = (train_ds.drop_channels(drop), test_ds.drop_channels(drop)) if drop else (train_ds, test_ds)
        return run_split(tr, te, settings, backend).test_metrics.error

    rows = [("None", err([]))]
    for name, chans in groups:
        rows.append((name, err(chans)))
        log.info("ablation %s: %.4f", name, rows[-1][1])
    # cumulative round starts at two groups and stops before nothing would be left
    removed = [groups[0][0]] if groups else []
    dropped = set(groups[0][1]) if groups else set()
    for name, chans in groups[1:]:
        if len(dropped | set(chans)) >= ds.schema.num_channels:
            break
        removed.append(name)
        dropped.update(chans)
        rows.append((", ".join(removed), err(sorted(dropped))))
    return rows


# ------------------------------------------------------------------- tuning

SWEEP_PARAMS = ("window", "min_support", "max_pattern_length", "max_patterns", "alphabet_size", "use_derivative")


@dataclass(frozen=True)
class SweepSpec:
    candidates: tuple[tuple[str, tuple], ...]  # (parameter, candidate values) in sweep order
    passes: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.passes < 1:
            raise ValueError("passes must be >= 1")
        for name, vals in self.candidates:
            if name not in SWEEP_PARAMS:
                raise ValueError(f"unknown sweep parameter {name!r}")
            if not vals:
                raise ValueError(f"sweep parameter {name!r} has no candidates")

    @classmethod
    def from_mapping(cls, raw: Mapping, passes: int = 2, seed: int = 0) -> "SweepSpec":
        cands = tuple((name, tuple(raw[name])) for name in SWEEP_PARAMS if name in raw)
        unknown = set(raw) - set(SWEEP_PARAMS)
        if unknown:
            raise ValueError(f"unknown sweep parameter(s) {sorted(unknown)}")
        return cls(cands, passes, seed)


def tune_coordinate_ascent(ds: Dataset | None, spec: SweepSpec, settings: PipelineSettings = PipelineSettings(),
                           objective: Callable[[dict], float] | None = None, backend=None):
    """Cycle through the parameters, moving each to its best candidate with the rest held.

    Returns ``(best_config, trace)`` where trace lists every evaluated
    ``(config, accuracy)`` in evaluation order.
    """
    if objective is None:
        base = replace(settings, feature_mode=FeatureMode.SPM)
        train_ds, test_ds = split_train_test(ds, base.train_fraction, spec.seed)

        def objective(cfg: dict) -> float:
            return run_split(train_ds, test_ds, base.with_mining(**cfg), backend).test_metrics.accuracy

    memo: dict[tuple, float] = {}

    def score(cfg: dict) -> float:
        key = tuple(sorted(cfg.items()))
        if key not in memo:
            memo[key] = float(objective(dict(cfg)))
        return memo[key]

    current = {name: vals[0] for name, vals in spec.candidates}
    trace: list[tuple[dict, float]] = []
    for p in range(spec.passes):
        changed = False
        for name, vals in spec.candidates:
            best_val, best_acc = None, -np.inf
            for v in vals:
                cfg = dict(current, **{name: v})
                acc = score(cfg)
                trace.append((cfg, acc))
                if acc > best_acc:
                    best_val, best_acc = v, acc
            if best_val != current[name]:
                changed = True
                current[name] = best_val
            log.info("pass %d: %s=%r (accuracy %.4f)", p + 1, name, best_val, best_acc)
        if not changed:
            break
    return dict(current), trace


# ------------------------------------------------------------------ csv output


def pca_csv(result: PCAResult, labels: Sequence[str]) -> str:
    k = result.projected.shape[1]
    names = ["x", "y", "z"][:k] if k <= 3 else [f"pc{i + 1}" for i in range(k)]
    lines = [",".join(names + ["label"])]
    for row, lab in zip(result.projected, labels):
        lines.append(",".join(f"{v:.10g}" for v in row) + f",{lab}")
    return "\n".join(lines) + "\n"


def ablation_csv(rows: Sequence[tuple[str, float]]) -> str:
    lines = ["removed_groups,test_error"]
    lines += [f'"{name}",{err:.6f}' for name, err in rows]
    return "\n".join(lines) + "\n"


def sweep_csv(trace: Sequence[tuple[dict, float]]) -> str:
    keys = list(trace[0][0]) if trace else []
    lines = [",".join(keys + ["accuracy"])]
    for cfg, acc in trace:
        lines.append(",".join(str(cfg[k]) for k in keys) + f",{acc:.6f}")
    return "\n".join(lines) + "\n"
