"""Compiled training hot path.

The functions here are the single source of truth for the training RNG
(word2vec-style 64-bit LCG) and the table-based sigmoid. The pure-Python
trainer in `trainer.py` calls the same helpers, so the fused kernel and
the reference path consume identical random streams and saturate the same
sigmoid quantization; equivalence between the two routes is asserted in
tests on small corpora.

All kernels run single-threaded per call and release the GIL; hogwild
parallelism is threads calling `train_chunk` concurrently on shared
matrices. Determinism is guaranteed only for a single worker.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LCG_MULT = np.uint64(6364136223846793005)
LCG_ADD = np.uint64(1442695040888963407)
_SHIFT11 = np.uint64(11)
_SHIFT16 = np.uint64(16)
_U53 = 1.0 / 9007199254740992.0  # 2**-53

SIGMOID_TABLE_SIZE = 512
MAX_SIGMOID = 8.0


def build_sigmoid_tables() -> tuple[np.ndarray, np.ndarray]:
    """Sigmoid and log-sigmoid sampled on [-8, 8] at 512 steps (inclusive)."""
    x = np.linspace(-MAX_SIGMOID, MAX_SIGMOID, SIGMOID_TABLE_SIZE + 1)
    sig = 1.0 / (1.0 + np.exp(-x))
    return sig, np.log(sig)


SIG_TABLE, LOGSIG_TABLE = build_sigmoid_tables()

# Arguments beyond +-8 clamp to the table ends; entries are never 0 or 1,
# so the log-sigmoid stays finite.
_SCALE = SIGMOID_TABLE_SIZE / (2.0 * MAX_SIGMOID)


@njit(cache=True, nogil=True)
def sigmoid_index(x: float) -> int:
    i = int((x + MAX_SIGMOID) * _SCALE)
    if i < 0:
        return 0
    if i > SIGMOID_TABLE_SIZE:
        return SIGMOID_TABLE_SIZE
    return i


@njit(cache=True, nogil=True)
def sigmoid_lookup(x: float) -> float:
    return SIG_TABLE[sigmoid_index(x)]


@njit(cache=True, nogil=True)
def log_sigmoid_lookup(x: float) -> float:
    return LOGSIG_TABLE[sigmoid_index(x)]


@njit(cache=True, nogil=True)
def lcg_next(state: np.uint64) -> np.uint64:
    return state * LCG_MULT + LCG_ADD


@njit(cache=True, nogil=True)
def lcg_uniform(state: np.uint64):
    """Advance the state; uniform double in [0, 1) from the top 53 bits."""
    state = lcg_next(state)
    return state, np.float64(state >> _SHIFT11) * _U53


@njit(cache=True, nogil=True)
def draw_window(state: np.uint64, window: int):
    """Advance the state; effective half-window uniform in 1..window."""
    state = lcg_next(state)
    return state, 1 + int(state % np.uint64(window))


@njit(cache=True, nogil=True)
def draw_negative_slot(state: np.uint64, table_len: int):
    state = lcg_next(state)
    return state, int((state >> _SHIFT16) % np.uint64(table_len))


@njit(cache=True, nogil=True)
def _compose(in_mat, row_ids, row_off, wid, hidden):
    # hidden <- mean of the word's input rows, float64 accumulation
    lo, hi = row_off[wid], row_off[wid + 1]
    for c in range(hidden.shape[0]):
        hidden[c] = 0.0
    for r in range(lo, hi):
        row = row_ids[r]
        for c in range(hidden.shape[0]):
            hidden[c] += in_mat[row, c]
    inv = 1.0 / (hi - lo)
    for c in range(hidden.shape[0]):
        hidden[c] *= inv


@njit(cache=True, nogil=True)
def _dot_row(out_mat, row, hidden) -> float:
    acc = 0.0
    for c in range(hidden.shape[0]):
        acc += out_mat[row, c] * hidden[c]
    return acc


@njit(cache=True, nogil=True)
def train_chunk(
    tokens,        # int32[:], word ids of all sentences, flattened
    offsets,       # int64[:], sentence s spans tokens[offsets[s]:offsets[s+1]]
    in_mat,        # float32[:, :]
    out_mat,       # float32[:, :]
    row_ids,       # int64[:]  per-word input rows (word row first), CSR
    row_off,       # int64[:]
    codes,         # uint8[:]  Huffman codes, CSR (hs only; empty for ns)
    paths,         # int32[:]  internal-node rows, CSR parallel to codes
    code_off,      # int64[:]
    neg_table,     # int32[:]  (ns only; empty for hs)
    keep_prob,     # float64[:] per-word keep probability
    sg,            # bool: skipgram vs cbow
    use_ns,        # bool: negative sampling vs hierarchical softmax
    negatives,     # int
    window,        # int
    lr0,           # float
    total_planned, # int64: epochs * total corpus tokens
    progress,      # int64[:], one slot per worker, shared
    slot,          # int: this worker's slot
    state,         # uint64 rng state
    loss_sum,      # float64[:], per-worker loss accumulator
    loss_count,    # int64[:], per-worker update counter
):
    """Run every (subsample, context, update) step for a block of sentences.

    Returns the advanced rng state. Consumption order of the rng stream,
    per sentence: one uniform per token whose keep probability is < 1,
    then per kept position one window draw, then negative-table draws as
    needed. The reference trainer replays the identical order.
    """
    dim = in_mat.shape[1]
    lr_floor = 1e-5 * lr0
    hidden = np.empty(dim, dtype=np.float64)
    neu1e = np.empty(dim, dtype=np.float64)
    wvec = np.empty(dim, dtype=np.float64)
    nrows = np.empty(negatives + 1, dtype=np.int64)
    gs = np.empty(negatives + 1, dtype=np.float64)
    dots = np.empty(negatives + 1, dtype=np.float64)
    max_len = 0
    for s in range(offsets.shape[0] - 1):
        n = offsets[s + 1] - offsets[s]
        if n > max_len:
            max_len = n
    kept = np.empty(max_len if max_len > 0 else 1, dtype=np.int32)

    for s in range(offsets.shape[0] - 1):
        start, end = offsets[s], offsets[s + 1]
        done = np.int64(0)
        for w in range(progress.shape[0]):
            done += progress[w]
        lr = lr0 * (1.0 - done / total_planned)
        if lr < lr_floor:
            lr = lr_floor

        kn = 0
        for t in range(start, end):
            wid = tokens[t]
            kp = keep_prob[wid]
            if kp < 1.0:
                state, u = lcg_uniform(state)
                if u >= kp:
                    continue
            kept[kn] = wid
            kn += 1
        progress[slot] += end - start

        for i in range(kn):
            state, b = draw_window(state, window)
            lo = i - b
            if lo < 0:
                lo = 0
            hi = i + b
            if hi > kn - 1:
                hi = kn - 1

            if sg:
                center = kept[i]
                for j in range(lo, hi + 1):
                    if j == i:
                        continue
                    _compose(in_mat, row_ids, row_off, center, hidden)
                    for c in range(dim):
                        neu1e[c] = 0.0
                    target = kept[j]
                    if use_ns:
                        state = _ns_step(
                            out_mat, neg_table, negatives, target, hidden,
                            neu1e, nrows, gs, dots, lr, state,
                            loss_sum, loss_count, slot,
                        )
                    else:
                        _hs_step(
                            out_mat, codes, paths, code_off, target, hidden,
                            neu1e, lr, loss_sum, loss_count, slot,
                        )
                    for r in range(row_off[center], row_off[center + 1]):
                        row = row_ids[r]
                        for c in range(dim):
                            in_mat[row, c] += neu1e[c]
            else:
                if hi <= lo:
                    continue  # no context words at all
                nctx = 0
                for c in range(dim):
                    hidden[c] = 0.0
                for j in range(lo, hi + 1):
                    if j == i:
                        continue
                    wid = kept[j]
                    wlo, whi = row_off[wid], row_off[wid + 1]
                    # each word contributes its row mean: sum first, scale
                    # once, so rounding matches the single-word composition
                    for c in range(dim):
                        wvec[c] = 0.0
                    for r in range(wlo, whi):
                        row = row_ids[r]
                        for c in range(dim):
                            wvec[c] += in_mat[row, c]
                    inv = 1.0 / (whi - wlo)
                    for c in range(dim):
                        hidden[c] += wvec[c] * inv
                    nctx += 1
                if nctx == 0:
                    continue
                inv = 1.0 / nctx
                for c in range(dim):
                    hidden[c] *= inv
                    neu1e[c] = 0.0
                target = kept[i]
                if use_ns:
                    state = _ns_step(
                        out_mat, neg_table, negatives, target, hidden,
                        neu1e, nrows, gs, dots, lr, state,
                        loss_sum, loss_count, slot,
                    )
                else:
                    _hs_step(
                        out_mat, codes, paths, code_off, target, hidden,
                        neu1e, lr, loss_sum, loss_count, slot,
                    )
                for j in range(lo, hi + 1):
                    if j == i:
                        continue
                    wid = kept[j]
                    for r in range(row_off[wid], row_off[wid + 1]):
                        row = row_ids[r]
                        for c in range(dim):
                            in_mat[row, c] += neu1e[c]
    return state


@njit(cache=True, nogil=True)
def _ns_step(out_mat, neg_table, negatives, target, hidden, neu1e,
             nrows, gs, dots, lr, state, loss_sum, loss_count, slot):
    dim = hidden.shape[0]
    tlen = neg_table.shape[0]
    nrows[0] = target
    dots[0] = _dot_row(out_mat, target, hidden)
    k = 1
    for _ in range(negatives):
        cand = -1
        for _attempt in range(11):  # collision with the target: redraw, then give up
            state, slot_idx = draw_negative_slot(state, tlen)
            if neg_table[slot_idx] != target:
                cand = neg_table[slot_idx]
                break
        if cand < 0:
            continue
        nrows[k] = cand
        dots[k] = _dot_row(out_mat, cand, hidden)
        k += 1
    loss = 0.0
    # read phase: gradients and loss at the initial row values
    for m in range(k):
        f = sigmoid_lookup(dots[m])
        if m == 0:
            gs[m] = lr * (1.0 - f)
            loss -= log_sigmoid_lookup(dots[m])
        else:
            gs[m] = lr * (0.0 - f)
            loss -= log_sigmoid_lookup(-dots[m])
        for c in range(dim):
            neu1e[c] += gs[m] * out_mat[nrows[m], c]
    # write phase
    for m in range(k):
        row = nrows[m]
        for c in range(dim):
            out_mat[row, c] += gs[m] * hidden[c]
    loss_sum[slot] += loss
    loss_count[slot] += 1
    return state


@njit(cache=True, nogil=True)
def _hs_step(out_mat, codes, paths, code_off, target, hidden, neu1e,
             lr, loss_sum, loss_count, slot):
    dim = hidden.shape[0]
    lo, hi = code_off[target], code_off[target + 1]
    loss = 0.0
    for p in range(lo, hi):
        node = paths[p]
        d = _dot_row(out_mat, node, hidden)
        label = 1.0 - codes[p]
        f = sigmoid_lookup(d)
        g = lr * (label - f)
        if codes[p] == 0:
            loss -= log_sigmoid_lookup(d)
        else:
            loss -= log_sigmoid_lookup(-d)
        for c in range(dim):
            neu1e[c] += g * out_mat[node, c]
        for c in range(dim):
            out_mat[node, c] += g * hidden[c]
    loss_sum[slot] += loss
    loss_count[slot] += 1
