"""Minibatch skip-gram with negative sampling over integer token sequences.

Shared by the subword text trainer (tokens composed of a word row plus hashed
n-gram rows) and the node-sequence trainer (identity composition). Follows the
usual word2vec recipe: frequent-token subsampling, dynamic context windows,
noise drawn from the unigram distribution raised to 0.75, and a linearly
decaying learning rate. Batches apply gradients computed at batch-start
parameters; single-threaded and deterministic for a fixed seed.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse


class SgnsError(Exception):
    pass


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    # -softplus(-x), stable on both tails
    return -np.logaddexp(0.0, -x)


def _scatter_add(table: np.ndarray, rows: np.ndarray, grads: np.ndarray) -> None:
    """table[rows] += grads with repeated rows, via sorted segment sums."""
    order = np.argsort(rows, kind="stable")
    rows_sorted = rows[order]
    starts = np.concatenate(([0], np.nonzero(np.diff(rows_sorted))[0] + 1))
    cum = np.cumsum(grads[order], axis=0)
    ends = np.concatenate((starts[1:], [len(rows_sorted)])) - 1
    sums = cum[ends]
    sums[1:] -= cum[ends[:-1]]
    table[rows_sorted[starts]] += sums.astype(table.dtype, copy=False)


def unigram_table(counts: np.ndarray, power: float = 0.75) -> np.ndarray:
    """Cumulative noise distribution (counts^power) for negative sampling."""
    weights = np.asarray(counts, dtype=np.float64) ** power
    total = weights.sum()
    if total <= 0:
        raise SgnsError("empty noise distribution")
    return np.cumsum(weights / total)


def _epoch_pairs(
    sequences: list[np.ndarray],
    window: int,
    keep_prob: np.ndarray | None,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """(center, context) pairs for one epoch: tokens surviving subsampling,
    paired within a per-center window drawn uniformly from 1..window."""
    centers, contexts = [], []
    for seq in sequences:
        if keep_prob is not None:
            seq = seq[rng.random(len(seq)) < keep_prob[seq]]
        n = len(seq)
        if n < 2:
            continue
        spans = rng.integers(1, window + 1, n)
        for offset in range(1, window + 1):
            ok = spans >= offset
            left = ok[offset:]
            if left.any():
                centers.append(seq[offset:][left])
                contexts.append(seq[:-offset][left])
            right = ok[:-offset]
            if right.any():
                centers.append(seq[:-offset][right])
                contexts.append(seq[offset:][right])
    if not centers:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


def subsample_probabilities(counts: np.ndarray, threshold: float) -> np.ndarray | None:
    """Per-token keep probability, word2vec style; None disables subsampling."""
    if threshold <= 0:
        return None
    freq = counts / counts.sum()
    ratio = threshold / np.maximum(freq, 1e-12)
    return np.minimum(1.0, np.sqrt(ratio) + ratio)


def train_sgns(
    sequences: list[np.ndarray],
    n_tokens: int,
    counts: np.ndarray,
    dim: int,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    lr: float = 0.025,
    seed: int = 0,
    subsample: float = 1e-3,
    composition: tuple[np.ndarray, np.ndarray] | None = None,
    n_input_rows: int | None = None,
    batch_pairs: int = 4096,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Train input/output embedding tables; returns (W_in, W_out, per-epoch
    mean pair loss).

    ``composition`` is an optional CSR pair (flat_rows, offsets) mapping each
    token to the input rows whose mean forms its vector; identity when None.
    """
    if not sequences or all(len(s) == 0 for s in sequences):
        raise SgnsError("empty training corpus")
    if dim < 2:
        raise SgnsError("embedding dimension must be >= 2")

    identity = composition is None
    if identity:
        n_input_rows = n_tokens
    else:
        flat_rows, offsets = composition
        if n_input_rows is None:
            raise SgnsError("n_input_rows required with explicit composition")
        lens = (offsets[1:] - offsets[:-1]).astype(np.int64)
        # token -> mean of constituent rows, as one sparse matrix
        comp = sparse.csr_matrix(
            (np.repeat((1.0 / lens).astype(np.float32), lens), flat_rows, offsets),
            shape=(n_tokens, n_input_rows),
        )

    rng = np.random.default_rng(seed)
    w_in = ((rng.random((n_input_rows, dim)) - 0.5) / dim).astype(np.float32)
    w_out = np.zeros((n_tokens, dim), dtype=np.float32)
    cum_noise = unigram_table(counts)
    keep_prob = subsample_probabilities(counts, subsample)

    # pair volume estimate for the lr schedule
    n_stream = sum(len(s) for s in sequences)
    if keep_prob is not None:
        freq = counts / max(counts.sum(), 1)
        n_stream = int(sum(len(s) for s in sequences) * float((freq * keep_prob).sum() / max(freq.sum(), 1e-12)))
    approx_total = max(1, n_stream * (window + 1) * epochs)
    processed = 0
    min_lr = lr * 1e-4
    losses: list[float] = []
    trained_pairs = False

    for epoch in range(1, epochs + 1):
        centers, contexts = _epoch_pairs(sequences, window, keep_prob, rng)
        n_pairs = len(centers)
        epoch_loss = 0.0
        for start in range(0, n_pairs, batch_pairs):
            c = centers[start : start + batch_pairs]
            o = contexts[start : start + batch_pairs]
            b = len(c)
            step_lr = max(min_lr, lr * (1.0 - min(processed / approx_total, 1.0)))
            processed += b

            # compose input vectors: mean over each center's constituent rows
            if identity:
                hidden = w_in[c]
            else:
                comp_batch = comp[c]
                hidden = comp_batch @ w_in

            neg = np.searchsorted(cum_noise, rng.random((b, negatives)))
            # a draw that hits the true context would cancel the positive
            # update; resample a few times, then mask leftovers out
            for _ in range(3):
                clash = neg == o[:, None]
                if not clash.any():
                    break
                neg[clash] = np.searchsorted(cum_noise, rng.random(int(clash.sum())))
            neg_w = (neg != o[:, None]).astype(np.float32)

            v_pos = w_out[o]
            v_neg = w_out[neg]
            x_pos = np.einsum("bd,bd->b", hidden, v_pos)
            x_neg = np.einsum("bd,bkd->bk", hidden, v_neg)
            s_pos = _sigmoid(x_pos)
            s_neg = _sigmoid(x_neg)

            epoch_loss += float(
                -_log_sigmoid(x_pos).sum() - (_log_sigmoid(-x_neg) * neg_w).sum()
            )

            g_pos = s_pos - 1.0  # d loss / d (hidden . v_pos)
            g_neg = s_neg * neg_w
            grad_hidden = g_pos[:, None] * v_pos + np.einsum("bk,bkd->bd", g_neg, v_neg)

            out_rows = np.concatenate([o, neg.ravel()])
            out_grads = np.concatenate(
                [
                    (-step_lr) * g_pos[:, None] * hidden,
                    ((-step_lr) * (g_neg[:, :, None] * hidden[:, None, :])).reshape(-1, dim),
                ]
            )
            _scatter_add(w_out, out_rows, out_grads)
            if identity:
                _scatter_add(w_in, c, (-step_lr) * grad_hidden)
            else:
                # each constituent row receives grad / count, which is exactly
                # the transposed composition map
                w_in += comp_batch.T @ ((-step_lr) * grad_hidden)

        if n_pairs:
            trained_pairs = True
            losses.append(epoch_loss / n_pairs)
            if not np.isfinite(losses[-1]):
                raise SgnsError(f"training diverged at epoch {epoch}")
        else:
            losses.append(0.0)

    if not trained_pairs:
        raise SgnsError("no context pairs (all sequences of length 1)")
    return w_in, w_out, losses
