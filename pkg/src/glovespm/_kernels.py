"""Pattern-matching kernels: the support-counting hot loop.

Runs of a whole dataset are packed into flat arrays ordered by
(instance, channel, symbol, start).  ``offsets[i * nbins + b]`` is the first run
of bin ``b = channel * n_symbols + symbol`` in instance ``i``.  Within a bin the
runs of one instance are disjoint and sorted, which both kernels rely on.

Patterns are encoded as ``bins`` (one per state) and ``rels`` (0 = before,
1 = overlap; one per consecutive pair).
"""
from __future__ import annotations

import numpy as np

from . import _accel

BEFORE = 0
OVERLAP = 1


class RunIndex:
    """Immutable packed view of discretized instances for matching."""

    def __init__(self, instances, alphabet, num_channels=None):
        self.alphabet = alphabet
        n_sym = alphabet.size
        n_ch = num_channels if num_channels is not None else (instances[0].num_channels if instances else 0)
        self.n_inst = len(instances)
        self.n_channels = n_ch
        self.n_symbols = n_sym
        self.nbins = n_ch * n_sym
        codes = {s: i for i, s in enumerate(alphabet.symbols)}

        inst_ids, bins, starts, ends = [], [], [], []
        max_frame = 0
        for i, d in enumerate(instances):
            if d.num_channels != n_ch:
                raise ValueError(f"instance {i} has {d.num_channels} channels, expected {n_ch}")
            max_frame = max(max_frame, d.num_frames)
            for c, runs in enumerate(d.channels):
                for r in runs:
                    inst_ids.append(i)
                    bins.append(c * n_sym + codes[r.symbol])
                    starts.append(r.start)
                    ends.append(r.end)
        inst_ids = np.asarray(inst_ids, dtype=np.int64)
        bins = np.asarray(bins, dtype=np.int64)
        starts = np.asarray(starts, dtype=np.int64)
        ends = np.asarray(ends, dtype=np.int64)
        order = np.lexsort((starts, bins, inst_ids))
        self.run_inst = inst_ids[order]
        self.run_bin = bins[order]
        self.starts = starts[order]
        self.ends = ends[order]
        flat_bin = self.run_inst * self.nbins + self.run_bin
        counts = np.bincount(flat_bin, minlength=self.n_inst * self.nbins)
        self.offsets = np.zeros(self.n_inst * self.nbins + 1, dtype=np.int64)
        np.cumsum(counts, out=self.offsets[1:])
        self.max_bin_runs = int(counts.max()) if counts.size else 0
        # numpy path: runs of each bin across all instances, still (instance, start)-sorted
        self.bin_runs = [np.flatnonzero(self.run_bin == b) for b in range(self.nbins)]
        self.stride = max_frame + 1
        self.labels = [d.label for d in instances]
        for arr in (self.run_inst, self.run_bin, self.starts, self.ends, self.offsets):
            arr.setflags(write=False)


# ----------------------------------------------------------------- numba path


@_accel.njit
def _match_batch_jit(pat_bins, pat_rels, pat_len, offsets, starts, ends, nbins, n_inst, window, max_bin_runs, out):
    # feasible runs of the previous step, compacted; runs in one bin are disjoint and
    # start-sorted, so their ends are sorted too and a single forward pointer suffices
    fs = np.empty(max(max_bin_runs, 1), dtype=np.int64)
    fe = np.empty(max(max_bin_runs, 1), dtype=np.int64)
    gs = np.empty_like(fs)
    ge = np.empty_like(fe)
    for p in range(pat_bins.shape[0]):
        k = pat_len[p]
        for i in range(n_inst):
            base = i * nbins
            b = pat_bins[p, 0]
            lo = offsets[base + b]
            hi = offsets[base + b + 1]
            nf = hi - lo
            for q in range(nf):
                fs[q] = starts[lo + q]
                fe[q] = ends[lo + q]
            for j in range(1, k):
                if nf == 0:
                    break
                b = pat_bins[p, j]
                lo = offsets[base + b]
                hi = offsets[base + b + 1]
                before = pat_rels[p, j - 1] == 0
                a = 0
                n_new = 0
                for r in range(lo, hi):
                    s = starts[r]
                    e = ends[r]
                    if before:
                        while a < nf and fe[a] < s - window:
                            a += 1
                        ok = a < nf and fe[a] <= s - 1
                    else:
                        while a < nf and fe[a] < s:
                            a += 1
                        ok = a < nf and fs[a] <= e
                    if ok:
                        gs[n_new] = s
                        ge[n_new] = e
                        n_new += 1
                fs, gs = gs, fs
                fe, ge = ge, fe
                nf = n_new
            out[p, i] = nf > 0


def _match_batch_numba(index: RunIndex, bins, rels, lens, window):
    out = np.zeros((bins.shape[0], index.n_inst), dtype=np.bool_)
    if index.n_inst and bins.shape[0]:
        _match_batch_jit(
            bins, rels, lens, index.offsets, index.starts, index.ends,
            index.nbins, index.n_inst, int(window), index.max_bin_runs, out,
        )
    return out


# ----------------------------------------------------------------- numpy path


def _match_one_numpy(index: RunIndex, bins, rels, window) -> np.ndarray:
    out = np.zeros(index.n_inst, dtype=np.bool_)
    sel = index.bin_runs[bins[0]]
    stride = index.stride
    for j in range(1, len(bins)):
        if sel.size == 0:
            return out
        p_inst = index.run_inst[sel]
        key = p_inst * stride + index.ends[sel]
        cand = index.bin_runs[bins[j]]
        c_inst = index.run_inst[cand]
        c_start = index.starts[cand]
        if rels[j - 1] == BEFORE:
            lo = c_inst * stride + np.maximum(c_start - window, 0)
            hi = c_inst * stride + c_start - 1
            ok = np.searchsorted(key, hi, side="right") > np.searchsorted(key, lo, side="left")
        else:
            # first feasible run ending at/after our start; disjointness makes it the only candidate
            q = np.searchsorted(key, c_inst * stride + c_start, side="left")
            found = q < sel.size
            qq = np.minimum(q, sel.size - 1)
            ok = found & (p_inst[qq] == c_inst) & (index.starts[sel[qq]] <= index.ends[cand])
        sel = cand[ok]
    out[index.run_inst[sel]] = True
    return out


def _match_batch_numpy(index: RunIndex, bins, rels, lens, window):
    out = np.zeros((bins.shape[0], index.n_inst), dtype=np.bool_)
    for p in range(bins.shape[0]):
        k = lens[p]
        out[p] = _match_one_numpy(index, bins[p, :k], rels[p, : max(k - 1, 0)], int(window))
    return out


def match_batch(index: RunIndex, bins, rels, lens, window, backend=None) -> np.ndarray:
    """Boolean matrix (patterns x instances) of matches.

    ``backend`` is "numba", "numpy" or None for the process default.
    """
    if backend is None:
        backend = _accel.backend_name()
    bins = np.ascontiguousarray(bins, dtype=np.int64)
    rels = np.ascontiguousarray(rels, dtype=np.int64)
    lens = np.ascontiguousarray(lens, dtype=np.int64)
    if rels.shape[1] == 0:
        rels = np.zeros((bins.shape[0], 1), dtype=np.int64)
    if backend == "numba":
        if not _accel.USE_NUMBA:
            raise RuntimeError("numba backend requested but numba is disabled or missing")
        return _match_batch_numba(index, bins, rels, lens, window)
    if backend == "numpy":
        return _match_batch_numpy(index, bins, rels, lens, window)
    raise ValueError(f"unknown backend {backend!r}")
