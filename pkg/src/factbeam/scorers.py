"""Reference scorers: deterministic next-token distributions for testing decoders.

Every scorer satisfies the same contract: ``next_log_probs(context, prefix)``
returns a vocabulary-sized vector of log-probabilities that exponentiates
and sums to 1, and identical inputs always produce bitwise-identical
output. None of these aim at extraction quality; they exist so the
constrained decoder can be exercised without a neural model.
"""

from __future__ import annotations

import hashlib
import math
from typing import Iterable, Mapping, Sequence

import numpy as np

from .tokens import ByteTokenizer, Tokenizer


class UniformScorer:
    """Assigns log(1/V) to every token regardless of context or prefix."""

    __slots__ = ("vocab_size", "_table")

    def __init__(self, vocab_size: int) -> None:
        if vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        self.vocab_size = vocab_size
        self._table = np.full(vocab_size, -math.log(vocab_size))
        self._table.flags.writeable = False

    def next_log_probs(self, context: str, prefix: Sequence[int]) -> np.ndarray:
        return self._table


def uniform_scorer(vocab_size: int) -> UniformScorer:
    return UniformScorer(vocab_size)


class OracleScorer:
    """Concentrates probability along one target sequence.

    While the prefix matches the target, the next target token receives
    `mass` and the remainder is spread uniformly over the other tokens.
    Off-target prefixes (or prefixes past the target's end) fall back to
    a uniform distribution.
    """

    __slots__ = ("target", "mass", "vocab_size", "_uniform", "_on", "_off")

    def __init__(self, target: Sequence[int], vocab_size: int, mass: float = 0.99) -> None:
        if not target:
            raise ValueError("target must be non-empty")
        if not 0.0 < mass < 1.0:
            raise ValueError("mass must lie in (0, 1)")
        if vocab_size < 2:
            raise ValueError("vocab_size must be >= 2 to spread residual mass")
        if any(not 0 <= t < vocab_size for t in target):
            raise ValueError("target token outside vocabulary")
        self.target = tuple(target)
        self.mass = mass
        self.vocab_size = vocab_size
        self._uniform = np.full(vocab_size, -math.log(vocab_size))
        self._uniform.flags.writeable = False
        self._on = math.log(mass)
        self._off = math.log((1.0 - mass) / (vocab_size - 1))

    def next_log_probs(self, context: str, prefix: Sequence[int]) -> np.ndarray:
        n = len(prefix)
        if n >= len(self.target) or tuple(prefix) != self.target[:n]:
            return self._uniform
        out = np.full(self.vocab_size, self._off)
        out[self.target[n]] = self._on
        return out


def oracle_scorer(target: Sequence[int], vocab_size: int, mass: float = 0.99) -> OracleScorer:
    return OracleScorer(target, vocab_size, mass)


class TableScorer:
    """Looks up a stored log-prob table per prefix; uniform fallback.

    Tables are keyed by the prefix token tuple. Each table must already
    be normalized (exp-sum 1 within 1e-6); construction validates this.
    """

    __slots__ = ("vocab_size", "_tables", "_uniform")

    def __init__(self, tables: Mapping[tuple[int, ...], np.ndarray], vocab_size: int) -> None:
        self.vocab_size = vocab_size
        self._uniform = np.full(vocab_size, -math.log(vocab_size))
        self._uniform.flags.writeable = False
        frozen: dict[tuple[int, ...], np.ndarray] = {}
        for key, table in tables.items():
            arr = np.asarray(table, dtype=float)
            if arr.shape != (vocab_size,):
                raise ValueError(f"table for {key} has shape {arr.shape}")
            total = float(np.exp(arr).sum())
            if abs(total - 1.0) > 1e-6:
                raise ValueError(f"table for {key} sums to {total}, not 1")
            arr = arr.copy()
            arr.flags.writeable = False
            frozen[tuple(key)] = arr
        self._tables = frozen

    def next_log_probs(self, context: str, prefix: Sequence[int]) -> np.ndarray:
        return self._tables.get(tuple(prefix), self._uniform)


class RandomScorer:
    """Deterministic pseudo-random distributions, one per (context, prefix).

    The distribution is derived by hashing (seed, context, prefix) into
    an RNG stream, so repeated calls agree bitwise and different
    prefixes get independent-looking tables. Used for fuzzing.
    """

    __slots__ = ("seed", "vocab_size")

    def __init__(self, seed: int, vocab_size: int) -> None:
        if vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        self.seed = seed
        self.vocab_size = vocab_size

    def next_log_probs(self, context: str, prefix: Sequence[int]) -> np.ndarray:
        h = hashlib.blake2b(digest_size=16)
        h.update(self.seed.to_bytes(8, "little", signed=True))
        h.update(context.encode("utf-8"))
        h.update(b"\x00")
        h.update(np.asarray(prefix, dtype=np.int64).tobytes())
        rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
        weights = rng.exponential(1.0, self.vocab_size)
        return np.log(weights / weights.sum())


class NGramScorer:
    """Add-one-smoothed n-gram model over token sequences.

    Counts are kept for every history length 0..n-1; a query uses the
    longest history available, so order 1 is prefix-independent and the
    start of a sequence is still informed. The input context is encoded
    and prepended to the prefix, giving a crude conditional p(y|x).
    """

    __slots__ = ("n", "vocab_size", "tokenizer", "_counts", "_totals")

    def __init__(self, n: int, tokenizer: Tokenizer) -> None:
        if n < 1:
            raise ValueError("order must be >= 1")
        self.n = n
        self.tokenizer = tokenizer
        self.vocab_size = tokenizer.vocab_size
        self._counts: dict[tuple[int, ...], np.ndarray] = {}
        self._totals: dict[tuple[int, ...], int] = {}

    def _observe(self, seq: Sequence[int]) -> None:
        for i, tok in enumerate(seq):
            if not 0 <= tok < self.vocab_size:
                raise ValueError(f"token {tok} outside vocabulary")
            for m in range(min(self.n - 1, i) + 1):
                hist = tuple(seq[i - m : i])
                table = self._counts.get(hist)
                if table is None:
                    table = self._counts[hist] = np.zeros(self.vocab_size, dtype=np.int64)
                table[tok] += 1
                self._totals[hist] = self._totals.get(hist, 0) + 1

    def next_log_probs(self, context: str, prefix: Sequence[int]) -> np.ndarray:
        full = self.tokenizer.encode(context) + list(prefix)
        m = min(self.n - 1, len(full))
        hist = tuple(full[len(full) - m :])
        counts = self._counts.get(hist)
        total = self._totals.get(hist, 0)
        if counts is None:
            counts = np.zeros(self.vocab_size, dtype=np.int64)
        # add-one smoothing: (c(h,t) + 1) / (c(h) + V)
        return np.log(counts + 1.0) - math.log(total + self.vocab_size)


def train_ngram(
    corpus: Iterable[Sequence[int]], n: int = 3, tokenizer: Tokenizer | None = None
) -> NGramScorer:
    """Fit an NGramScorer on token sequences (add-one smoothing).

    The corpus must be non-empty. Sequences should already include any
    context tokens the caller wants the model conditioned on.
    """
    scorer = NGramScorer(n, tokenizer if tokenizer is not None else ByteTokenizer())
    seen = False
    for seq in corpus:
        seen = True
        scorer._observe(seq)
    if not seen:
        raise ValueError("corpus must be non-empty")
    return scorer
