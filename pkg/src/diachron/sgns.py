"""Skip-gram negative-sampling trainer over venue-trail corpora.

Treats each trail as a sentence and each venue as a word. The published
embedding is the matrix of input vectors. Two training modes:

  * deterministic single-worker: fixed iteration order and RNG stream, two
    runs with the same seed produce bitwise-identical matrices;
  * parallel: worker threads apply unsynchronized updates to the shared
    parameter matrices (the usual lock-free SGD contract for this model
    family: statistically sound, never bitwise reproducible).

Training runs in single precision for throughput; `sgns_pair_step` is the
double-precision reference kernel with exact analytic gradients, used by the
finite-difference checks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .errors import EmptyCorpusError, NumericError
from .walker import TrailCorpus


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 100
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025
    min_lr: float = 1e-4
    seed: int = 0
    subsample: float = 0.0  # frequent-token subsample threshold; 0 disables
    workers: int = 1
    neg_power: float = 0.75

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.negatives < 1:
            raise ValueError("dim, window and negatives must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class Vocabulary:
    """Dense-index bijection over corpus venues plus the negative-sampling table.

    Indices are assigned by descending count, ties broken by venue id.
    """

    venue_ids: np.ndarray          # dense index -> venue id
    counts: np.ndarray             # occurrences per dense index
    neg_probs: np.ndarray          # sampling distribution, proportional to count**neg_power
    neg_cum: np.ndarray            # cumulative distribution for inverse-CDF draws
    index_of: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index_of:
            self.index_of = {int(v): i for i, v in enumerate(self.venue_ids)}

    def __len__(self) -> int:
        return len(self.venue_ids)


@dataclass
class EpochEmbedding:
    """Vocabulary plus dense vector matrices for one epoch.

    `input_vectors` is the published embedding; `output_vectors` is
    training-internal and absent on embeddings loaded from disk.
    """

    venue_ids: np.ndarray
    input_vectors: np.ndarray
    output_vectors: np.ndarray | None = None
    epoch: str = ""
    index_of: dict[int, int] = field(default_factory=dict, repr=False)
    _unit: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.input_vectors.shape[0] != len(self.venue_ids):
            raise ValueError("vector row count does not match vocabulary size")
        if not np.isfinite(self.input_vectors).all():
            raise NumericError(f"epoch {self.epoch}: non-finite entries in input vectors")
        if not self.index_of:
            self.index_of = {int(v): i for i, v in enumerate(self.venue_ids)}

    def __len__(self) -> int:
        return len(self.venue_ids)

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def __contains__(self, venue_id: int) -> bool:
        return int(venue_id) in self.index_of

    def vector(self, venue_id: int) -> np.ndarray:
        return self.input_vectors[self.index_of[int(venue_id)]]

    def unit_vectors(self) -> np.ndarray:
        """Row-normalized float64 copy of the input vectors (cached)."""
        if self._unit is None:
            mat = self.input_vectors.astype(np.float64, copy=False)
            norms = np.linalg.norm(mat, axis=1)
            if (norms == 0).any():
                bad = self.venue_ids[norms == 0][:5]
                raise NumericError(f"epoch {self.epoch}: zero vectors for venues {bad.tolist()}")
            self._unit = mat / norms[:, None]
        return self._unit


@dataclass(frozen=True)
class TrainLogRow:
    epoch: int
    tokens_processed: int
    mean_loss: float
    lr: float


def build_vocab(corpus: TrailCorpus, neg_power: float = 0.75) -> Vocabulary:
    if not corpus.trails:
        raise EmptyCorpusError("cannot build a vocabulary from an empty corpus")
    items = sorted(corpus.token_counts.items())
    ids = np.array([v for v, _ in items], dtype=np.int64)
    counts = np.array([c for _, c in items], dtype=np.int64)
    order = np.lexsort((ids, -counts))
    ids, counts = ids[order], counts[order]
    weights = counts.astype(np.float64) ** neg_power
    probs = weights / weights.sum()
    return Vocabulary(venue_ids=ids, counts=counts, neg_probs=probs, neg_cum=np.cumsum(probs))


def _sigmoid(x: np.ndarray | float):
    return 1.0 / (1.0 + np.exp(-x))


def _softplus(x: np.ndarray | float):
    # log(1 + e^x), overflow-safe
    return np.logaddexp(0.0, x)


def sgns_pair_loss(center: np.ndarray, context: np.ndarray, negatives: np.ndarray) -> float:
    """Loss of one positive pair with sampled negatives:
    -log sigmoid(context . center) - sum_n log sigmoid(-(neg_n . center))."""
    loss = _softplus(-float(np.dot(context, center)))
    for neg in negatives:
        loss += _softplus(float(np.dot(neg, center)))
    return float(loss)


def sgns_pair_step(
    center: np.ndarray,
    context: np.ndarray,
    negatives: np.ndarray,
    lr: float,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """One exact gradient-descent step on a single (center, context) pair.

    Returns the loss at the original parameters and updated copies of all
    vectors. Double precision; this is the reference kernel the training loop
    mirrors in float32.
    """
    center = np.asarray(center, dtype=np.float64)
    context = np.asarray(context, dtype=np.float64)
    negatives = np.asarray(negatives, dtype=np.float64).reshape(-1, center.shape[0])
    if not (np.isfinite(center).all() and np.isfinite(context).all() and np.isfinite(negatives).all()):
        raise NumericError("non-finite input vectors in pair step")

    x_pos = float(np.dot(context, center))
    loss = _softplus(-x_pos)
    g_pos = _sigmoid(x_pos) - 1.0
    grad_center = g_pos * context
    new_context = context - lr * (g_pos * center)

    new_negatives = negatives.copy()
    for i in range(negatives.shape[0]):
        x_neg = float(np.dot(negatives[i], center))
        loss += _softplus(x_neg)
        g_neg = _sigmoid(x_neg)
        grad_center = grad_center + g_neg * negatives[i]
        new_negatives[i] = negatives[i] - lr * (g_neg * center)

    new_center = center - lr * grad_center
    return float(loss), new_center, new_context, new_negatives


def init_vectors(vocab_size: int, dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Input vectors uniform in [-0.5/dim, 0.5/dim), output vectors zero."""
    rng = np.random.default_rng(seed)
    syn0 = (rng.random((vocab_size, dim), dtype=np.float32) - np.float32(0.5)) / np.float32(dim)
    syn1 = np.zeros((vocab_size, dim), dtype=np.float32)
    return syn0, syn1


_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, nogil=True)
def _train_sentences(
    tokens,        # int32, all chunk tokens concatenated
    starts,        # int64, sentence start offsets into tokens
    ends,          # int64, sentence end offsets
    syn0,          # float32 (V, D), mutated in place
    syn1,          # float32 (V, D), mutated in place
    neg_cum,       # float64 cumulative negative-sampling distribution
    keep_prob,     # float64 per-index keep probability (subsampling)
    use_subsample, # bool
    window,        # int
    negatives,     # int
    lr0,           # float: initial learning rate
    min_lr,        # float
    total_tokens,  # float: tokens planned over the whole run (for decay)
    tokens_done,   # int64: tokens already processed before this chunk
    state,         # uint64 RNG state (xorshift64*)
    max_sent,      # int: longest sentence in the chunk
):
    dim = syn0.shape[1]
    buf = np.empty(max_sent, np.int64)
    neu = np.empty(dim, np.float64)
    mask = np.uint64(0xFFFFFFFFFFFFFFFF)
    mult = np.uint64(2685821657736338717)
    loss_sum = 0.0
    pairs = 0
    for s in range(starts.shape[0]):
        frac = tokens_done / (total_tokens + 1.0)
        lr = lr0 * (1.0 - frac)
        if lr < min_lr:
            lr = min_lr
        m = 0
        for p in range(starts[s], ends[s]):
            t = tokens[p]
            if use_subsample:
                state = (state ^ (state >> np.uint64(12))) & mask
                state = (state ^ (state << np.uint64(25))) & mask
                state = (state ^ (state >> np.uint64(27))) & mask
                r = float((state * mult) >> np.uint64(11)) * _INV53
                if r > keep_prob[t]:
                    continue
            buf[m] = t
            m += 1
        tokens_done += ends[s] - starts[s]
        if m < 2:
            continue
        for i in range(m):
            w = buf[i]
            state = (state ^ (state >> np.uint64(12))) & mask
            state = (state ^ (state << np.uint64(25))) & mask
            state = (state ^ (state >> np.uint64(27))) & mask
            u = float((state * mult) >> np.uint64(11)) * _INV53
            b = 1 + int(u * window)
            lo = i - b
            if lo < 0:
                lo = 0
            hi = i + b
            if hi > m - 1:
                hi = m - 1
            for j in range(lo, hi + 1):
                if j == i:
                    continue
                c = buf[j]
                for d in range(dim):
                    neu[d] = 0.0
                # positive pair
                x = 0.0
                for d in range(dim):
                    x += float(syn0[w, d]) * float(syn1[c, d])
                if x > 0.0:
                    loss_sum += math.log1p(math.exp(-x))
                else:
                    loss_sum += -x + math.log1p(math.exp(x))
                g = (1.0 / (1.0 + math.exp(-x)) - 1.0) * lr
                for d in range(dim):
                    neu[d] += g * float(syn1[c, d])
                for d in range(dim):
                    syn1[c, d] -= np.float32(g * float(syn0[w, d]))
                # negatives, drawn from the unigram**power table;
                # draws equal to the positive target are skipped (not redrawn)
                for _ in range(negatives):
                    state = (state ^ (state >> np.uint64(12))) & mask
                    state = (state ^ (state << np.uint64(25))) & mask
                    state = (state ^ (state >> np.uint64(27))) & mask
                    r = float((state * mult) >> np.uint64(11)) * _INV53
                    lo_i = 0
                    hi_i = neg_cum.shape[0]
                    while lo_i < hi_i:
                        mid = (lo_i + hi_i) >> 1
                        if r < neg_cum[mid]:
                            hi_i = mid
                        else:
                            lo_i = mid + 1
                    tgt = lo_i
                    if tgt == c:
                        continue
                    x = 0.0
                    for d in range(dim):
                        x += float(syn0[w, d]) * float(syn1[tgt, d])
                    if x > 0.0:
                        loss_sum += x + math.log1p(math.exp(-x))
                    else:
                        loss_sum += math.log1p(math.exp(x))
                    gn = (1.0 / (1.0 + math.exp(-x))) * lr
                    for d in range(dim):
                        neu[d] += gn * float(syn1[tgt, d])
                    for d in range(dim):
                        syn1[tgt, d] -= np.float32(gn * float(syn0[w, d]))
                for d in range(dim):
                    syn0[w, d] -= np.float32(neu[d])
                pairs += 1
    return loss_sum, pairs, tokens_done, state


def _seed_state(seed: int) -> np.uint64:
    # splitmix64 of the seed; xorshift64* needs a nonzero state
    z = (seed + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    z = z ^ (z >> 31)
    return np.uint64(z if z != 0 else 0x9E3779B97F4A7C15)


def _encode_corpus(corpus: TrailCorpus, vocab: Vocabulary):
    index_of = vocab.index_of
    tokens = np.empty(sum(len(t) for t in corpus.trails), dtype=np.int32)
    starts = np.empty(len(corpus.trails), dtype=np.int64)
    ends = np.empty(len(corpus.trails), dtype=np.int64)
    pos = 0
    for i, trail in enumerate(corpus.trails):
        starts[i] = pos
        for tok in trail:
            tokens[pos] = index_of[tok]
            pos += 1
        ends[i] = pos
    return tokens, starts, ends


def _keep_probabilities(vocab: Vocabulary, threshold: float) -> np.ndarray:
    if threshold <= 0:
        return np.ones(len(vocab), dtype=np.float64)
    freqs = vocab.counts / vocab.counts.sum()
    keep = (np.sqrt(freqs / threshold) + 1.0) * (threshold / freqs)
    return np.minimum(keep, 1.0)


def train(
    corpus: TrailCorpus,
    config: TrainConfig = TrainConfig(),
    epoch_label: str | None = None,
    log: list[TrainLogRow] | None = None,
) -> EpochEmbedding:
    """Train an epoch embedding on a trail corpus.

    With workers == 1 the result is a deterministic function of (corpus,
    config). With workers > 1 sentences are sharded across threads mutating
    the shared matrices without locks. Appends per-segment loss rows to `log`
    when given. Raises NumericError if parameters diverge.
    """
    vocab = build_vocab(corpus, neg_power=config.neg_power)
    label = corpus.epoch if epoch_label is None else epoch_label
    tokens, starts, ends = _encode_corpus(corpus, vocab)
    syn0, syn1 = init_vectors(len(vocab), config.dim, config.seed)
    if config.epochs == 0 or len(tokens) == 0:
        return EpochEmbedding(venue_ids=vocab.venue_ids, input_vectors=syn0,
                              output_vectors=syn1, epoch=label)

    keep_prob = _keep_probabilities(vocab, config.subsample)
    use_sub = config.subsample > 0
    max_sent = int((ends - starts).max())
    total = float(len(tokens)) * config.epochs
    n_sent = len(starts)

    if config.workers == 1:
        state = _seed_state(config.seed)
        done = np.int64(0)
        segments = min(10, n_sent)
        cuts = np.linspace(0, n_sent, segments + 1, dtype=np.int64)
        for ep in range(config.epochs):
            for seg in range(segments):
                lo, hi = cuts[seg], cuts[seg + 1]
                if hi == lo:
                    continue
                loss_sum, pairs, done, state = _train_sentences(
                    tokens, starts[lo:hi], ends[lo:hi], syn0, syn1,
                    vocab.neg_cum, keep_prob, use_sub,
                    config.window, config.negatives, config.lr, config.min_lr,
                    total, done, state, max_sent,
                )
                if log is not None:
                    lr_now = max(config.min_lr, config.lr * (1.0 - float(done) / (total + 1.0)))
                    mean_loss = loss_sum / pairs if pairs else float("nan")
                    log.append(TrainLogRow(ep, int(done), mean_loss, lr_now))
            _check_finite(syn0, syn1, label, ep)
    else:
        cuts = np.linspace(0, n_sent, config.workers + 1, dtype=np.int64)
        for ep in range(config.epochs):
            epoch_loss = 0.0
            epoch_pairs = 0

            def _run_chunk(ci: int):
                lo, hi = cuts[ci], cuts[ci + 1]
                if hi == lo:
                    return 0.0, 0
                before = np.int64(ep * len(tokens) + int(starts[lo]))
                state = _seed_state(_mix(config.seed, ep, ci))
                loss_sum, pairs, _, _ = _train_sentences(
                    tokens, starts[lo:hi], ends[lo:hi], syn0, syn1,
                    vocab.neg_cum, keep_prob, use_sub,
                    config.window, config.negatives, config.lr, config.min_lr,
                    total, before, state, max_sent,
                )
                return loss_sum, pairs

            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                for loss_sum, pairs in pool.map(_run_chunk, range(config.workers)):
                    epoch_loss += loss_sum
                    epoch_pairs += pairs
            if log is not None:
                done_tokens = (ep + 1) * len(tokens)
                lr_now = max(config.min_lr, config.lr * (1.0 - done_tokens / (total + 1.0)))
                mean_loss = epoch_loss / epoch_pairs if epoch_pairs else float("nan")
                log.append(TrainLogRow(ep, done_tokens, mean_loss, lr_now))
            _check_finite(syn0, syn1, label, ep)

    return EpochEmbedding(venue_ids=vocab.venue_ids, input_vectors=syn0,
                          output_vectors=syn1, epoch=label)


def _mix(seed: int, *parts: int) -> int:
    out = seed & 0xFFFFFFFFFFFFFFFF
    for p in parts:
        out = (out * 6364136223846793005 + p + 1442695040888963407) & 0xFFFFFFFFFFFFFFFF
    return out


def _check_finite(syn0: np.ndarray, syn1: np.ndarray, label: str, ep: int) -> None:
    if not np.isfinite(syn0).all() or not np.isfinite(syn1).all():
        n_bad = int((~np.isfinite(syn0)).sum() + (~np.isfinite(syn1)).sum())
        raise NumericError(
            f"epoch {label}: training diverged during pass {ep} "
            f"({n_bad} non-finite parameters; lower the learning rate)"
        )


def write_train_log(rows: Sequence[TrainLogRow], path) -> None:
    from .util import write_tsv

    write_tsv(path, ["epoch", "tokens_processed", "mean_loss", "lr"],
              [(r.epoch, r.tokens_processed, r.mean_loss, r.lr) for r in rows])
