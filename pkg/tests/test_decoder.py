import random

import pytest

from factbeam import (
    DecodeConfig,
    Hypothesis,
    NoCompleteHypothesis,
    Phase,
    RandomScorer,
    Triplet,
    allowed_tokens,
    beam_search,
    build_catalog,
    build_trie,
    decode,
    linearize,
    oracle_scorer,
    parse,
    uniform_scorer,
)
from factbeam.tokens import EOS, ET, OBJ, REL, SUB, ByteTokenizer

from helpers import (
    CachingScorer,
    all_valid_sequences,
    oracle_best_sequence,
    rand_catalog,
)

TOK = ByteTokenizer()
V = TOK.vocab_size


def make_tries(cat):
    return (
        build_trie(list(enumerate(cat.entity_names)), TOK),
        build_trie(list(enumerate(cat.relation_names)), TOK),
    )


CAT = build_catalog(["Rome", "Romeo"], ["born in"])
TRIES = make_tries(CAT)


# --- allowed_tokens ------------------------------------------------------------


def test_fresh_boundary_offers_sub_and_eos():
    cfg = DecodeConfig(beam_size=1)
    assert allowed_tokens(Hypothesis(), TRIES, cfg) == {SUB, EOS}


def test_fresh_boundary_without_empty_set():
    cfg = DecodeConfig(beam_size=1, allow_empty_set=False)
    assert allowed_tokens(Hypothesis(), TRIES, cfg) == {SUB}


def test_boundary_after_triplet_offers_both():
    cfg = DecodeConfig(beam_size=1, allow_empty_set=False)
    h = Hypothesis(tokens=(SUB,), phase=Phase.BOUNDARY, n_triplets=1)
    assert allowed_tokens(h, TRIES, cfg) == {SUB, EOS}


def test_max_triplets_blocks_new_block():
    cfg = DecodeConfig(beam_size=1, max_triplets=1)
    h = Hypothesis(tokens=(SUB,), phase=Phase.BOUNDARY, n_triplets=1)
    assert allowed_tokens(h, TRIES, cfg) == {EOS}


def test_empty_catalog_boundary_offers_only_eos():
    empty = build_trie([], TOK)
    cfg = DecodeConfig(beam_size=1)
    assert allowed_tokens(Hypothesis(), (empty, TRIES[1]), cfg) == {EOS}
    assert allowed_tokens(Hypothesis(), (TRIES[0], empty), cfg) == {EOS}


def test_subject_terminal_offers_continuation_and_closer():
    # cursor at "Rome" in trie over {"Rome", "Romeo"}
    node = TRIES[0].walk(TOK.encode("Rome"))
    h = Hypothesis(tokens=(SUB, *TOK.encode("Rome")), phase=Phase.SUBJECT, cursor=node)
    assert allowed_tokens(h, TRIES, DecodeConfig(beam_size=1)) == {
        TOK.encode("o")[0],
        REL,
    }


def test_object_leaf_offers_only_closer():
    node = TRIES[0].walk(TOK.encode("Romeo"))
    h = Hypothesis(tokens=(), phase=Phase.OBJECT, cursor=node)
    assert allowed_tokens(h, TRIES, DecodeConfig(beam_size=1)) == {ET}


def test_relation_terminal_offers_obj():
    node = TRIES[1].walk(TOK.encode("born in"))
    h = Hypothesis(tokens=(), phase=Phase.RELATION, cursor=node)
    assert allowed_tokens(h, TRIES, DecodeConfig(beam_size=1)) == {OBJ}


def test_mid_name_offers_trie_continuations_only():
    node = TRIES[0].walk(TOK.encode("Ro"))
    h = Hypothesis(tokens=(), phase=Phase.SUBJECT, cursor=node)
    assert allowed_tokens(h, TRIES, DecodeConfig(beam_size=1)) == {TOK.encode("m")[0]}


def test_finished_hypothesis_cannot_extend():
    with pytest.raises(ValueError):
        allowed_tokens(Hypothesis(finished=True), TRIES, DecodeConfig(beam_size=1))


def test_allowed_never_empty_for_live_fuzz():
    rng = random.Random(31)
    cfg = DecodeConfig(beam_size=3, max_len=64)
    for _ in range(40):
        cat = rand_catalog(rng, 8, 3, 1, 4)
        tries = make_tries(cat)
        scorer = RandomScorer(rng.randrange(1 << 30), V)
        for h in beam_search("t", scorer, tries, cfg):
            # replay the sequence, asserting non-empty allowed sets throughout
            cur = Hypothesis()
            for t in h.tokens:
                allowed = allowed_tokens(cur, tries, cfg)
                assert allowed, f"empty allowed set at {cur.tokens}"
                assert t in allowed
                cur = _extend_public(cur, t, tries)


def _extend_public(h, t, tries):
    from factbeam.decoder import _extend

    return _extend(h, t, 0.0, tries)


# --- decode ---------------------------------------------------------------------


def test_oracle_target_is_top1():
    target_set = frozenset({Triplet(1, 0, 0)})
    target = linearize(sorted(target_set), CAT, TOK)
    scorer = oracle_scorer(target, vocab_size=V)
    results = decode("", scorer, CAT, TRIES, DecodeConfig(beam_size=3), TOK)
    assert results[0][0] == target_set


def test_invalid_oracle_target_still_yields_valid_output():
    # grammar-violating target: two <sub> in a row
    scorer = oracle_scorer([SUB, SUB, EOS], vocab_size=V)
    for h in beam_search("", scorer, TRIES, DecodeConfig(beam_size=4, max_len=32)):
        assert parse(h.tokens, CAT, TOK).ok


def test_uniform_ranking_is_length_then_lex():
    cat = build_catalog(["aa", "ab"], ["r"])
    tries = make_tries(cat)
    hyps = beam_search("", uniform_scorer(V), tries, DecodeConfig(beam_size=6, max_len=30, max_triplets=1))
    seqs = [h.tokens for h in hyps]
    # empty set shortest, then the four equal-length single triplets in lex order
    assert seqs[0] == (EOS,)
    lex_sorted = sorted(seqs[1:])
    assert list(seqs[1:]) == lex_sorted
    assert len({len(s) for s in seqs[1:]}) == 1


def test_scores_non_increasing():
    rng = random.Random(43)
    for _ in range(20):
        cat = rand_catalog(rng, 6, 3, 1, 4)
        scorer = RandomScorer(rng.randrange(1 << 30), V)
        results = decode("d", scorer, cat, make_tries(cat), DecodeConfig(beam_size=5, max_len=64, max_triplets=2), TOK)
        scores = [lp for _, lp in results]
        assert scores == sorted(scores, reverse=True)


def test_score_additivity():
    rng = random.Random(47)
    cat = rand_catalog(rng, 5, 2, 1, 4)
    scorer = CachingScorer(RandomScorer(9, V))
    for h in beam_search("ctx", scorer, make_tries(cat), DecodeConfig(beam_size=4, max_len=64, max_triplets=2)):
        assert h.log_prob == pytest.approx(
            scorer.score_sequence("ctx", h.tokens), abs=1e-9
        )


def test_every_result_parses_with_zero_diagnostics():
    rng = random.Random(53)
    for _ in range(50):
        cat = rand_catalog(rng, 10, 4, 1, 5)
        tries = make_tries(cat)
        scorer = RandomScorer(rng.randrange(1 << 30), V)
        for h in beam_search("x", scorer, tries, DecodeConfig(beam_size=3, max_len=80, max_triplets=2)):
            result = parse(h.tokens, cat, TOK)
            assert result.ok
            assert all(
                t.subject < cat.num_entities
                and t.object < cat.num_entities
                and t.relation < cat.num_relations
                for t in result.triplets
            )


def test_brute_force_argmax_small_instance():
    rng = random.Random(59)
    cat = rand_catalog(rng, 3, 2, 1, 2)
    tries = make_tries(cat)
    scorer = CachingScorer(RandomScorer(123, V))
    sequences = all_valid_sequences(cat, TOK, max_triplets=1, max_len=60)
    best_seq, best_score = oracle_best_sequence(sequences, scorer, "ctx")
    cfg = DecodeConfig(beam_size=len(sequences), max_len=60, max_triplets=1)
    top = beam_search("ctx", scorer, tries, cfg)[0]
    assert top.tokens == best_seq
    assert top.log_prob == pytest.approx(best_score, abs=1e-9)


def test_constraint_non_interference():
    # catalog-valid oracle target: constrained top-1 equals the target,
    # which is also the unconstrained argmax over the enumeration space
    rng = random.Random(61)
    for _ in range(10):
        cat = rand_catalog(rng, 3, 2, 1, 3)
        tries = make_tries(cat)
        t = Triplet(
            rng.randrange(cat.num_entities),
            rng.randrange(cat.num_relations),
            rng.randrange(cat.num_entities),
        )
        target = tuple(linearize([t], cat, TOK))
        scorer = CachingScorer(oracle_scorer(target, vocab_size=V))
        sequences = all_valid_sequences(cat, TOK, max_triplets=1, max_len=len(target) + 20)
        best_seq, _ = oracle_best_sequence(sequences, scorer, "")
        assert best_seq == target
        top = beam_search("", scorer, tries, DecodeConfig(beam_size=8, max_len=len(target) + 20, max_triplets=1))[0]
        assert top.tokens == target


def test_empty_set_only_for_empty_catalog():
    empty = build_trie([], TOK)
    results = decode("", uniform_scorer(V), CAT, (empty, empty), DecodeConfig(beam_size=2), TOK)
    assert results == [(frozenset(), pytest.approx(-float(__import__("math").log(V))))]


def test_no_complete_hypothesis_carries_best_partial():
    with pytest.raises(NoCompleteHypothesis) as exc_info:
        beam_search("", uniform_scorer(V), TRIES, DecodeConfig(beam_size=2, max_len=3, allow_empty_set=False))
    partial = exc_info.value.best_partial
    assert partial is not None
    assert not partial.finished
    assert len(partial.tokens) == 3


def test_duplicate_sets_can_appear_in_results():
    cat = build_catalog(["a"], ["r"])
    tries = make_tries(cat)
    cfg = DecodeConfig(beam_size=12, max_len=40, max_triplets=2, allow_empty_set=False)
    results = decode("", uniform_scorer(V), cat, tries, cfg, TOK)
    sets = [ts for ts, _ in results]
    only = frozenset({Triplet(0, 0, 0)})
    # the single block and the duplicated block both linearize to {only}
    assert sets.count(only) == 2


def test_max_triplets_respected():
    rng = random.Random(67)
    cat = rand_catalog(rng, 4, 2, 1, 3)
    tries = make_tries(cat)
    for h in beam_search("", RandomScorer(5, V), tries, DecodeConfig(beam_size=6, max_len=100, max_triplets=2)):
        assert h.tokens.count(ET) <= 2


def test_decode_deterministic():
    cat = rand_catalog(random.Random(71), 8, 3, 1, 4)
    tries = make_tries(cat)
    cfg = DecodeConfig(beam_size=4, max_len=64, max_triplets=2)
    a = decode("same", RandomScorer(2, V), cat, tries, cfg, TOK)
    b = decode("same", RandomScorer(2, V), cat, tries, cfg, TOK)
    assert a == b


def test_config_validation():
    with pytest.raises(ValueError):
        DecodeConfig(beam_size=0)
    with pytest.raises(ValueError):
        DecodeConfig(beam_size=1, max_len=1)
    with pytest.raises(ValueError):
        DecodeConfig(beam_size=1, length_alpha=-0.1)


def test_length_alpha_changes_ranking():
    # with heavy normalization longer sequences can outrank the empty set
    cat = build_catalog(["a"], ["r"])
    tries = make_tries(cat)
    raw = beam_search("", uniform_scorer(V), tries, DecodeConfig(beam_size=3, max_len=30, max_triplets=1))
    norm = beam_search("", uniform_scorer(V), tries, DecodeConfig(beam_size=3, max_len=30, max_triplets=1, length_alpha=1.0))
    assert raw[0].tokens == (EOS,)
    assert all(h.score(1.0) == pytest.approx(raw[0].score(1.0)) for h in norm)
