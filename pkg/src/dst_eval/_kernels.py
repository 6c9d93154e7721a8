"""Array kernels for corpus-scale evaluation.

Conversations are interned into integer triplet ids and laid out CSR-style:
``gt_ptr[t]:gt_ptr[t + 1]`` slices ``gt_ids`` to the sorted ids of turn
``t``'s ground truth (likewise for predictions), and ``conv_ptr`` slices the
flat turn axis into conversations.

Two interchangeable backends compute the same arrays: numba-compiled loops
and a pure-numpy path. Set ``DST_EVAL_DISABLE_NUMBA=1`` (or run without
numba installed) to select the numpy path.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLE = os.environ.get("DST_EVAL_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLE

# columns of the per-turn stats matrix
EXACT, LOCAL, N_X, N_Y, N_PQ, N_NONEMPTY, N_HIT, N_PRED_NONEMPTY = range(8)
N_STATS = 8

KIND_EXACT, KIND_TYPE1, KIND_TYPE2 = 0, 1, 2
UNBOUNDED_DISTANCE = -1


@dataclass(frozen=True)
class EncodedCorpus:
    conv_ptr: np.ndarray
    gt_ptr: np.ndarray
    gt_ids: np.ndarray
    pred_ptr: np.ndarray
    pred_ids: np.ndarray
    pair_of: np.ndarray
    empty_of: np.ndarray

    @property
    def n_turns(self) -> int:
        return len(self.gt_ptr) - 1

    @property
    def n_conversations(self) -> int:
        return len(self.conv_ptr) - 1


def encode_corpus(conversations, is_empty) -> EncodedCorpus:
    """Intern the triplets of ``conversations`` into an :class:`EncodedCorpus`.

    ``is_empty`` maps a slot value to True when it counts as "no assignment".
    """
    triplet_ids = {}
    pair_ids = {}
    pair_of = []
    empty_of = []

    def intern(state):
        ids = []
        for trip in state:
            tid = triplet_ids.get(trip)
            if tid is None:
                tid = triplet_ids[trip] = len(triplet_ids)
                pair_of.append(pair_ids.setdefault((trip[0], trip[1]), len(pair_ids)))
                empty_of.append(is_empty(trip[2]))
            ids.append(tid)
        ids.sort()
        return ids

    conv_ptr = [0]
    gt_ptr, pred_ptr = [0], [0]
    gt_ids, pred_ids = [], []
    for conv in conversations:
        for turn in conv.turns:
            gt_ids.extend(intern(turn.ground_truth))
            pred_ids.extend(intern(turn.prediction))
            gt_ptr.append(len(gt_ids))
            pred_ptr.append(len(pred_ids))
        conv_ptr.append(len(gt_ptr) - 1)

    return EncodedCorpus(
        conv_ptr=np.asarray(conv_ptr, dtype=np.int64),
        gt_ptr=np.asarray(gt_ptr, dtype=np.int64),
        gt_ids=np.asarray(gt_ids, dtype=np.int64),
        pred_ptr=np.asarray(pred_ptr, dtype=np.int64),
        pred_ids=np.asarray(pred_ids, dtype=np.int64),
        pair_of=np.asarray(pair_of, dtype=np.int64),
        empty_of=np.asarray(empty_of, dtype=np.bool_),
    )


# ---------------------------------------------------------------------------
# pure-numpy backend

def _member(keys, sorted_keys):
    """Boolean mask: which ``keys`` occur in the sorted array ``sorted_keys``."""
    if sorted_keys.size == 0:
        return np.zeros(keys.shape, dtype=np.bool_)
    pos = np.searchsorted(sorted_keys, keys)
    pos[pos == sorted_keys.size] = 0
    return sorted_keys[pos] == keys


def _turn_stats_numpy(conv_ptr, gt_ptr, gt_ids, pred_ptr, pred_ids, pair_of, empty_of):
    # Every (turn, triplet) membership becomes one integer key turn * V + id.
    # Turns are laid out in order and ids are sorted within a turn, so the key
    # arrays come out sorted and membership is a single searchsorted.
    n_turns = len(gt_ptr) - 1
    n_ids = max(len(pair_of), 1)
    n_pairs = int(pair_of.max()) + 1 if len(pair_of) else 1
    turns = np.arange(n_turns, dtype=np.int64)
    gt_turn = np.repeat(turns, np.diff(gt_ptr))
    pred_turn = np.repeat(turns, np.diff(pred_ptr))
    gt_keys = gt_turn * n_ids + gt_ids
    pred_keys = pred_turn * n_ids + pred_ids

    gt_hit = _member(gt_keys, pred_keys)
    pred_hit = _member(pred_keys, gt_keys)
    # previous-turn membership; a conversation's first turn has no history,
    # and its local flag is replaced by the exact flag below anyway
    gt_old = _member(gt_keys - n_ids, gt_keys)
    pred_old = _member(pred_keys - n_ids, pred_keys)

    def per_turn(turn_of, mask):
        return np.bincount(turn_of[mask], minlength=n_turns)

    n_x = per_turn(gt_turn, ~gt_hit)
    n_y = per_turn(pred_turn, ~pred_hit)
    exact = (n_x == 0) & (n_y == 0)
    new_pred_outside = per_turn(pred_turn, ~pred_old & ~pred_hit)
    new_gt_missed = per_turn(gt_turn, ~gt_old & ~gt_hit)
    local = (new_pred_outside == 0) & (new_gt_missed == 0)
    first = np.zeros(n_turns, dtype=np.bool_)
    first[conv_ptr[:-1][conv_ptr[:-1] < n_turns]] = True
    local = np.where(first, exact, local)

    x_pairs = np.unique(gt_turn[~gt_hit] * n_pairs + pair_of[gt_ids[~gt_hit]])
    y_pairs = np.unique(pred_turn[~pred_hit] * n_pairs + pair_of[pred_ids[~pred_hit]])
    shared = np.intersect1d(x_pairs, y_pairs, assume_unique=True) // n_pairs

    gt_full = ~empty_of[gt_ids] if gt_ids.size else np.zeros(0, dtype=np.bool_)
    pred_full = ~empty_of[pred_ids] if pred_ids.size else np.zeros(0, dtype=np.bool_)

    out = np.zeros((n_turns, N_STATS), dtype=np.int64)
    out[:, EXACT] = exact
    out[:, LOCAL] = local
    out[:, N_X] = n_x
    out[:, N_Y] = n_y
    out[:, N_PQ] = np.bincount(shared, minlength=n_turns)
    out[:, N_NONEMPTY] = per_turn(gt_turn, gt_full)
    out[:, N_HIT] = per_turn(gt_turn, gt_full & gt_hit)
    out[:, N_PRED_NONEMPTY] = per_turn(pred_turn, pred_full)
    return out


def _classify_numpy(conv_ptr, exact, local):
    n = exact.shape[0]
    idx = np.arange(n, dtype=np.int64)
    starts = np.repeat(conv_ptr[:-1], np.diff(conv_ptr))
    exact = exact.astype(np.bool_)
    type1 = ~exact & ((idx == starts) | ~local.astype(np.bool_))
    type2 = ~exact & ~type1
    last_err = np.maximum.accumulate(np.where(type1, idx, -1)) if n else idx
    # an error index from a previous conversation does not count
    last_err = np.where(last_err >= starts, last_err, -1)
    kinds = np.full(n, KIND_EXACT, dtype=np.int8)
    kinds[type1] = KIND_TYPE1
    kinds[type2] = KIND_TYPE2
    dist = np.zeros(n, dtype=np.int64)
    dist[type2] = np.where(last_err[type2] >= 0, idx[type2] - last_err[type2], UNBOUNDED_DISTANCE)
    return kinds, dist


# ---------------------------------------------------------------------------
# numba backend

if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)

    @_jit
    def _same(a, b):
        if a.shape[0] != b.shape[0]:
            return False
        for i in range(a.shape[0]):
            if a[i] != b[i]:
                return False
        return True

    @_jit
    def _contains(sorted_arr, value):
        lo = 0
        hi = sorted_arr.shape[0]
        while lo < hi:
            mid = (lo + hi) >> 1
            if sorted_arr[mid] < value:
                lo = mid + 1
            else:
                hi = mid
        return lo < sorted_arr.shape[0] and sorted_arr[lo] == value

    @_jit
    def _new_within(cur, prev, other):
        # every element of cur that is absent from prev must be in other
        j = 0
        for i in range(cur.shape[0]):
            v = cur[i]
            while j < prev.shape[0] and prev[j] < v:
                j += 1
            if j < prev.shape[0] and prev[j] == v:
                continue
            if not _contains(other, v):
                return False
        return True

    @_jit
    def _diff_pairs(a, b, pair_of, out):
        # writes the pairs of a \ b into out, returns how many
        n = 0
        j = 0
        for i in range(a.shape[0]):
            v = a[i]
            while j < b.shape[0] and b[j] < v:
                j += 1
            if j < b.shape[0] and b[j] == v:
                continue
            out[n] = pair_of[v]
            n += 1
        return n

    @_jit
    def _count_shared_pairs(px, nx, py, ny):
        # states are small, so a quadratic scan beats sorting
        n = 0
        for i in range(nx):
            seen = False
            for k in range(i):
                if px[k] == px[i]:
                    seen = True
                    break
            if seen:
                continue
            for k in range(ny):
                if py[k] == px[i]:
                    n += 1
                    break
        return n

    @_jit
    def _turn_stats_numba(conv_ptr, gt_ptr, gt_ids, pred_ptr, pred_ids, pair_of, empty_of):
        n_turns = gt_ptr.shape[0] - 1
        out = np.zeros((n_turns, N_STATS), dtype=np.int64)
        width = 1
        for t in range(n_turns):
            width = max(width, gt_ptr[t + 1] - gt_ptr[t], pred_ptr[t + 1] - pred_ptr[t])
        px = np.empty(width, dtype=np.int64)
        py = np.empty(width, dtype=np.int64)
        for c in range(conv_ptr.shape[0] - 1):
            for t in range(conv_ptr[c], conv_ptr[c + 1]):
                g = gt_ids[gt_ptr[t]:gt_ptr[t + 1]]
                p = pred_ids[pred_ptr[t]:pred_ptr[t + 1]]
                exact = _same(g, p)
                if t == conv_ptr[c]:
                    local = exact
                else:
                    gp = gt_ids[gt_ptr[t - 1]:gt_ptr[t]]
                    pp = pred_ids[pred_ptr[t - 1]:pred_ptr[t]]
                    local = _new_within(p, pp, g) and _new_within(g, gp, p)
                nx = _diff_pairs(g, p, pair_of, px)
                ny = _diff_pairs(p, g, pair_of, py)
                n_full = 0
                n_hit = 0
                for i in range(g.shape[0]):
                    if not empty_of[g[i]]:
                        n_full += 1
                        if _contains(p, g[i]):
                            n_hit += 1
                n_pred_full = 0
                for i in range(p.shape[0]):
                    if not empty_of[p[i]]:
                        n_pred_full += 1
                out[t, EXACT] = exact
                out[t, LOCAL] = local
                out[t, N_X] = nx
                out[t, N_Y] = ny
                out[t, N_PQ] = _count_shared_pairs(px, nx, py, ny)
                out[t, N_NONEMPTY] = n_full
                out[t, N_HIT] = n_hit
                out[t, N_PRED_NONEMPTY] = n_pred_full
        return out

    @_jit
    def _classify_numba(conv_ptr, exact, local):
        n = exact.shape[0]
        kinds = np.zeros(n, dtype=np.int8)
        dist = np.zeros(n, dtype=np.int64)
        for c in range(conv_ptr.shape[0] - 1):
            t_err = -1
            start = conv_ptr[c]
            for t in range(start, conv_ptr[c + 1]):
                if exact[t]:
                    kinds[t] = KIND_EXACT
                elif t == start or not local[t]:
                    kinds[t] = KIND_TYPE1
                    t_err = t
                else:
                    kinds[t] = KIND_TYPE2
                    dist[t] = t - t_err if t_err >= 0 else UNBOUNDED_DISTANCE
        return kinds, dist
else:  # pragma: no cover
    _turn_stats_numba = _classify_numba = None


def _args(enc: EncodedCorpus):
    return (enc.conv_ptr, enc.gt_ptr, enc.gt_ids, enc.pred_ptr, enc.pred_ids, enc.pair_of, enc.empty_of)


def turn_stats(enc: EncodedCorpus, backend: str | None = None) -> np.ndarray:
    """Per-turn integer statistics, one row per turn, columns ``EXACT..N_PRED_NONEMPTY``."""
    if _pick(backend) == "numba":
        return _turn_stats_numba(*_args(enc))
    return _turn_stats_numpy(*_args(enc))


def classify(enc: EncodedCorpus, stats: np.ndarray, backend: str | None = None):
    """Streaming turn classification; returns ``(kinds, distances)`` arrays.

    ``distances`` is 0 except on Type-2 turns, where it holds ``t - t_err``
    or ``UNBOUNDED_DISTANCE`` when no Type-1 turn precedes it.
    """
    exact = np.ascontiguousarray(stats[:, EXACT])
    local = np.ascontiguousarray(stats[:, LOCAL])
    if _pick(backend) == "numba":
        return _classify_numba(enc.conv_ptr, exact, local)
    return _classify_numpy(enc.conv_ptr, exact, local)


def _pick(backend):
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
