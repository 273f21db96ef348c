"""Shared test fixtures: random-instance generators and independent
oracles (brute-force or rational-arithmetic re-implementations that the
library code is checked against)."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction
from typing import Sequence

from factbeam import (
    Catalog,
    EvalPair,
    MentionedTriplet,
    Triplet,
    build_catalog,
    linearize,
    order_triplets,
)
from factbeam.tokens import EOS, Tokenizer

ALPHABET = "abcdefghijklmnopqrstuvwxyz "


# --- random instance generators --------------------------------------------


def rand_names(rng: random.Random, count: int, min_len: int = 1, max_len: int = 6,
               alphabet: str = ALPHABET) -> list[str]:
    """`count` distinct non-blank names."""
    out: set[str] = set()
    while len(out) < count:
        n = rng.randint(min_len, max_len)
        name = "".join(rng.choice(alphabet) for _ in range(n))
        if name.strip():
            out.add(name)
    return sorted(out)


def rand_catalog(rng: random.Random, max_entities: int, max_relations: int,
                 min_name: int = 1, max_name: int = 6) -> Catalog:
    n_e = rng.randint(1, max_entities)
    n_r = rng.randint(1, max_relations)
    names = rand_names(rng, n_e + n_r, min_name, max_name)
    rng.shuffle(names)
    return build_catalog(names[:n_e], names[n_e:])


def rand_triplet(rng: random.Random, cat: Catalog) -> Triplet:
    return Triplet(
        rng.randrange(cat.num_entities),
        rng.randrange(cat.num_relations),
        rng.randrange(cat.num_entities),
    )


def rand_triplet_set(rng: random.Random, cat: Catalog, max_size: int = 5) -> frozenset[Triplet]:
    return frozenset(rand_triplet(rng, cat) for _ in range(rng.randint(0, max_size)))


def rand_eval_pairs(rng: random.Random, cat: Catalog, n_docs: int,
                    max_size: int = 5, overlap: float = 0.5) -> list[EvalPair]:
    """Pairs whose predictions share roughly `overlap` of the gold set."""
    pairs = []
    for d in range(n_docs):
        gold = rand_triplet_set(rng, cat, max_size)
        kept = frozenset(t for t in gold if rng.random() < overlap)
        pred = kept | rand_triplet_set(rng, cat, max_size)
        pairs.append(EvalPair(f"doc{d}", pred, gold))
    return pairs


# --- trie oracles -----------------------------------------------------------


def oracle_allowed_next(
    names_with_ids: Sequence[tuple[int, str]], tok: Tokenizer, prefix: Sequence[int]
) -> tuple[set[int], int | None] | None:
    """Brute-force prefix filter over the raw name list.

    Returns None when the prefix is not a prefix of any name (the trie
    must raise InvalidPrefix), else (continuation tokens, completed id).
    """
    prefix = list(prefix)
    continuations: set[int] = set()
    completed: int | None = None
    hit = False
    for ident, name in names_with_ids:
        enc = tok.encode(name)
        if enc[: len(prefix)] != prefix:
            continue
        hit = True
        if len(enc) > len(prefix):
            continuations.add(enc[len(prefix)])
        else:
            completed = ident
    if not hit:
        return None
    return continuations, completed


# --- exhaustive decode oracle -------------------------------------------------


class CachingScorer:
    """Memoizes another scorer's tables per (context, prefix).

    Lets the enumeration oracle and the beam share one set of
    distributions without recomputing; determinism is preserved.
    """

    def __init__(self, inner) -> None:
        self.inner = inner
        self.vocab_size = inner.vocab_size
        self._cache: dict[tuple[str, tuple[int, ...]], object] = {}

    def next_log_probs(self, context: str, prefix: Sequence[int]):
        key = (context, tuple(prefix))
        table = self._cache.get(key)
        if table is None:
            table = self._cache[key] = self.inner.next_log_probs(context, prefix)
        return table

    def score_sequence(self, context: str, seq: Sequence[int]) -> float:
        total = 0.0
        for i, t in enumerate(seq):
            total += float(self.next_log_probs(context, seq[:i])[t])
        return total


def all_valid_sequences(
    cat: Catalog, tok: Tokenizer, max_triplets: int, max_len: int,
    allow_empty_set: bool = True,
) -> list[tuple[int, ...]]:
    """Every linearization of at most max_triplets blocks (repeats and
    all block orders included), capped at max_len tokens."""
    blocks = []
    for s, r, o in itertools.product(
        range(cat.num_entities), range(cat.num_relations), range(cat.num_entities)
    ):
        blocks.append(tuple(linearize([Triplet(s, r, o)], cat, tok)[:-1]))  # strip <eos>
    out: list[tuple[int, ...]] = []
    if allow_empty_set:
        out.append(tuple(linearize([], cat, tok)))
    for n in range(1, max_triplets + 1):
        for combo in itertools.product(blocks, repeat=n):
            seq = tuple(itertools.chain.from_iterable(combo)) + (EOS,)
            if len(seq) <= max_len:
                out.append(seq)
    return out


def oracle_best_sequence(
    sequences: Sequence[tuple[int, ...]], scorer: CachingScorer, context: str
) -> tuple[tuple[int, ...], float]:
    """Argmax by (score, lexicographically smaller sequence)."""
    best_seq: tuple[int, ...] | None = None
    best_score = float("-inf")
    for seq in sequences:
        score = scorer.score_sequence(context, seq)
        if score > best_score or (score == best_score and (best_seq is None or seq < best_seq)):
            best_seq, best_score = seq, score
    assert best_seq is not None
    return best_seq, best_score


# --- metric oracles (exact rational arithmetic) ------------------------------


def oracle_micro(pairs: Sequence[EvalPair]) -> tuple[Fraction, Fraction, Fraction]:
    num = sum(len(p.predicted & p.gold) for p in pairs)
    n_pred = sum(len(p.predicted) for p in pairs)
    n_gold = sum(len(p.gold) for p in pairs)
    p = Fraction(num, n_pred) if n_pred else Fraction(0)
    r = Fraction(num, n_gold) if n_gold else Fraction(0)
    f1 = 2 * p * r / (p + r) if p + r else Fraction(0)
    return p, r, f1


def oracle_per_relation(pairs: Sequence[EvalPair]) -> dict[int, tuple[Fraction, Fraction, Fraction]]:
    rels = {t.relation for p in pairs for t in p.predicted | p.gold}
    out = {}
    for rel in rels:
        sub = [
            EvalPair(
                p.doc_id,
                frozenset(t for t in p.predicted if t.relation == rel),
                frozenset(t for t in p.gold if t.relation == rel),
            )
            for p in pairs
        ]
        out[rel] = oracle_micro(sub)
    return out


def oracle_macro(pairs: Sequence[EvalPair]) -> tuple[Fraction, Fraction, Fraction]:
    per_rel = oracle_per_relation(pairs)
    if not per_rel:
        return Fraction(0), Fraction(0), Fraction(0)
    p = sum(v[0] for v in per_rel.values()) / len(per_rel)
    r = sum(v[1] for v in per_rel.values()) / len(per_rel)
    f1 = 2 * p * r / (p + r) if p + r else Fraction(0)
    return p, r, f1


# --- attribution oracles ------------------------------------------------------

# independent weight table keyed by (subject equal, object equal, relation equal)
ORACLE_WEIGHTS = {
    (True, True, True): 1,
    (True, False, True): 2,
    (False, True, True): 2,
    (True, True, False): 3,
    (True, False, False): 4,
    (False, True, False): 4,
    (False, False, True): 5,
    (False, False, False): 6,
}


def oracle_edge_weight(gold: Triplet, pred: Triplet) -> int:
    return ORACLE_WEIGHTS[
        (gold.subject == pred.subject, gold.object == pred.object, gold.relation == pred.relation)
    ]


def oracle_match(gold: frozenset[Triplet], pred: frozenset[Triplet]) -> dict[Triplet, tuple[Triplet | None, int]]:
    """Greedy matcher re-implemented with repeated linear scans."""
    key = lambda t: (t.subject, t.relation, t.object)
    remaining_gold = sorted(gold, key=key)
    remaining_pred = sorted(pred, key=key)
    out: dict[Triplet, tuple[Triplet | None, int]] = {}
    while remaining_gold and remaining_pred:
        best = None
        for g in remaining_gold:
            for p in remaining_pred:
                cand = (oracle_edge_weight(g, p), key(g), key(p), g, p)
                if best is None or cand[:3] < best[:3]:
                    best = cand
        w, _, _, g, p = best
        out[g] = (p, w)
        remaining_gold.remove(g)
        remaining_pred.remove(p)
    for g in remaining_gold:
        out[g] = (None, 6)
    return out


def mentioned(s: int, r: int, o: int, ss=None, os_=None) -> MentionedTriplet:
    return MentionedTriplet(
        Triplet(s, r, o),
        tuple(ss) if ss is not None else None,
        tuple(os_) if os_ is not None else None,
    )


def spanned_set(rng: random.Random, cat: Catalog, max_size: int = 4,
                text_len: int = 200) -> list[MentionedTriplet]:
    """Random triplets with random non-degenerate mention spans."""
    out = []
    for _ in range(rng.randint(0, max_size)):
        t = rand_triplet(rng, cat)
        spans = []
        for _ in range(2):
            start = rng.randrange(text_len - 2)
            spans.append((start, start + rng.randint(1, 10)))
        out.append(MentionedTriplet(t, spans[0], spans[1]))
    return out


def weights_one_to_six_pairs() -> list[EvalPair]:
    """One document whose greedy matching hits each weight 1..6 exactly once.

    Disjoint id namespaces per (gold, pred) pair push every cross-pair
    edge to weight 6, so the matcher stays on the diagonal.
    """
    gold, pred = [], []
    specs = [
        lambda b, r: (Triplet(b, r, b + 1), Triplet(b, r, b + 1)),           # 1
        lambda b, r: (Triplet(b, r, b + 1), Triplet(b, r, b + 2)),           # 2
        lambda b, r: (Triplet(b, r, b + 1), Triplet(b, 90 + r, b + 1)),      # 3
        lambda b, r: (Triplet(b, r, b + 1), Triplet(b, 90 + r, b + 2)),      # 4
        lambda b, r: (Triplet(b, r, b + 1), Triplet(b + 2, r, b + 3)),       # 5
        lambda b, r: (Triplet(b, r, b + 1), Triplet(b + 2, 90 + r, b + 3)),  # 6
    ]
    for i, spec in enumerate(specs):
        g, p = spec(10 * (i + 1), i)
        gold.append(g)
        pred.append(p)
    return [EvalPair("fixture", frozenset(pred), frozenset(gold))]
