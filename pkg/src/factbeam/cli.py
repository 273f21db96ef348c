"""Command-line front end: build-trie, decode, evaluate, buckets, attribute.

Every subcommand is deterministic given (inputs, flags, seed), records a
run manifest next to its outputs, and removes partial outputs on
failure so exit code 0 means "everything written".
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import __version__
from .attribution import ner_error, nel_rc_errors, recall_error
from .catalog import Catalog, CatalogError, build_catalog, build_trie
from .decoder import DecodeConfig, NoCompleteHypothesis, Scorer, decode
from .fileio import (
    Document,
    load_catalog,
    read_counts,
    read_documents,
    read_jsonl,
    read_mentions,
    read_prediction_sets,
    save_trie,
    load_trie,
    sha256_file,
    triplet_to_json,
    write_json,
    write_jsonl,
)
from .linearize import MentionedTriplet, linearize, order_triplets
from .metrics import EvalPair, PRF, bootstrap_ci, bucketed_f1, macro_scores, micro_scores, per_relation_scores
from .scorers import RandomScorer, oracle_scorer, train_ngram, uniform_scorer
from .tokens import ByteTokenizer


@contextmanager
def _transaction():
    """Collects output paths; on any failure every recorded file is removed."""
    written: list[Path] = []
    try:
        yield written
    except BaseException:
        for p in written:
            Path(p).unlink(missing_ok=True)
        raise


def _write_manifest(
    path: Path,
    written: list[Path],
    subcommand: str,
    config: Mapping,
    inputs: Mapping[str, str | Path],
    seed: int,
) -> None:
    manifest = {
        "tool": "factbeam",
        "version": __version__,
        "subcommand": subcommand,
        "seed": seed,
        "config": {k: (str(v) if isinstance(v, Path) else v) for k, v in config.items()},
        "inputs": {
            label: {"path": str(p), "sha256": sha256_file(p)} for label, p in inputs.items()
        },
    }
    written.append(path)
    write_json(path, manifest)


def _manifest_path(args: argparse.Namespace, default: Path) -> Path:
    return Path(args.manifest_out) if args.manifest_out else default


# --- build-trie -------------------------------------------------------------


def cmd_build_trie(args: argparse.Namespace) -> int:
    tok = ByteTokenizer()
    cat = load_catalog(args.entities, args.relations)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats: dict = {}
    tries: dict[str, object] = {}
    for kind, names in (("entity", cat.entity_names), ("relation", cat.relation_names)):
        start = time.perf_counter()
        trie = build_trie(enumerate(names), tok)
        stats[kind] = {
            "names": len(names),
            "nodes": trie.node_count,
            "bytes": trie.approx_bytes(),
            "build_seconds": time.perf_counter() - start,
        }
        tries[kind] = trie
    with _transaction() as written:
        for kind, trie in tries.items():
            path = out_dir / f"{kind}.trie"
            written.append(path)
            save_trie(trie, path)  # type: ignore[arg-type]
            stats[kind]["sha256"] = sha256_file(path)
        stats_path = out_dir / "stats.json"
        written.append(stats_path)
        write_json(stats_path, stats)
        _write_manifest(
            _manifest_path(args, out_dir / "manifest.json"),
            written,
            "build-trie",
            {"out_dir": str(out_dir)},
            {"entities": args.entities, "relations": args.relations},
            args.seed,
        )
    return 0


# --- decode -----------------------------------------------------------------


def _scorer_factory(
    spec: str, args: argparse.Namespace, cat: Catalog, tok: ByteTokenizer
) -> Callable[[Document], Scorer]:
    """Resolve a scorer spec: uniform | random | oracle:FILE | ngram:FILE."""
    if spec == "uniform":
        scorer = uniform_scorer(tok.vocab_size)
        return lambda doc: scorer
    if spec == "random":
        scorer = RandomScorer(args.seed, tok.vocab_size)
        return lambda doc: scorer
    kind, sep, path = spec.partition(":")
    if not sep or not path or kind not in ("oracle", "ngram"):
        raise ValueError(
            f"unknown scorer spec {spec!r}; expected uniform, random, oracle:FILE or ngram:FILE"
        )
    docs = read_documents(path, cat)
    if kind == "oracle":
        targets = {
            doc.doc_id: linearize(order_triplets(doc.triplets), cat, tok) for doc in docs
        }

        def for_doc(doc: Document) -> Scorer:
            target = targets.get(doc.doc_id)
            if target is None:
                raise ValueError(f"oracle file has no record for document {doc.doc_id!r}")
            return oracle_scorer(target, tok.vocab_size)

        return for_doc
    corpus = [
        tok.encode(doc.text) + linearize(order_triplets(doc.triplets), cat, tok)
        for doc in docs
    ]
    scorer = train_ngram(corpus, n=args.ngram_order, tokenizer=tok)
    return lambda doc: scorer


def cmd_decode(args: argparse.Namespace) -> int:
    tok = ByteTokenizer()
    cat = load_catalog(args.entities, args.relations)
    if args.tries:
        tries = (load_trie(Path(args.tries) / "entity.trie"), load_trie(Path(args.tries) / "relation.trie"))
    else:
        tries = (
            build_trie(enumerate(cat.entity_names), tok),
            build_trie(enumerate(cat.relation_names), tok),
        )
    cfg = DecodeConfig(
        beam_size=args.beam_size,
        max_len=args.max_len,
        length_alpha=args.length_alpha,
        allow_empty_set=not args.no_empty_set,
        max_triplets=args.max_triplets,
    )
    docs = read_documents(args.input, cat)
    for_doc = _scorer_factory(args.scorer, args, cat, tok)

    def run(doc: Document) -> dict:
        record: dict = {"id": doc.doc_id}
        try:
            ranked = decode(doc.text, for_doc(doc), cat, tries, cfg, tok)
        except NoCompleteHypothesis as exc:
            record["candidates"] = []
            record["error"] = str(exc)
            return record
        record["candidates"] = [
            {
                "rank": rank,
                "log_prob": lp,
                # decoded sets are order-free; emit in id order for stable files
                "triplets": [
                    triplet_to_json(MentionedTriplet(t), cat)
                    for t in sorted(ts, key=lambda t: (t.subject, t.relation, t.object))
                ],
            }
            for rank, (ts, lp) in enumerate(ranked, 1)
        ]
        return record

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(run, docs))
    else:
        records = [run(doc) for doc in docs]
    out = Path(args.out)
    with _transaction() as written:
        written.append(out)
        write_jsonl(out, records)
        _write_manifest(
            _manifest_path(args, out.with_name(out.name + ".manifest.json")),
            written,
            "decode",
            {
                "scorer": args.scorer,
                "beam_size": args.beam_size,
                "max_len": args.max_len,
                "length_alpha": args.length_alpha,
                "allow_empty_set": not args.no_empty_set,
                "max_triplets": args.max_triplets,
                "ngram_order": args.ngram_order,
                "jobs": args.jobs,
            },
            _decode_inputs(args),
            args.seed,
        )
    return 0


def _decode_inputs(args: argparse.Namespace) -> dict[str, str]:
    inputs = {"input": args.input, "entities": args.entities, "relations": args.relations}
    _, sep, path = args.scorer.partition(":")
    if sep and path:
        inputs["scorer_data"] = path
    return inputs


# --- evaluate / buckets -----------------------------------------------------


def _eval_pairs(args: argparse.Namespace, cat: Catalog) -> list[EvalPair]:
    gold_docs = read_documents(args.gold, cat)
    pred_sets = read_prediction_sets(args.pred, cat)
    pairs = []
    known = set()
    for doc in gold_docs:
        known.add(doc.doc_id)
        predicted = pred_sets.get(doc.doc_id, frozenset())
        pairs.append(EvalPair(doc.doc_id, predicted, doc.triplet_set()))
    extra = set(pred_sets) - known
    if extra:
        print(
            f"warning: {len(extra)} predicted document(s) absent from gold, ignored",
            file=sys.stderr,
        )
    return pairs


def _prf_json(prf: PRF) -> dict:
    return {"p": prf.p, "r": prf.r, "f1": prf.f1, "flags": sorted(prf.flags)}


def _bucket_rows(pairs: list[EvalPair], counts: dict[int, int]) -> list[dict]:
    rows = []
    for bucket, (f1, n_relations) in sorted(bucketed_f1(pairs, counts).items()):
        low, high = (2**bucket, 2 ** (bucket + 1) - 1) if bucket >= 0 else (0, 0)
        rows.append(
            {
                "bucket": bucket,
                "count_low": low,
                "count_high": high,
                "f1": f1,
                "n_relations": n_relations,
            }
        )
    return rows


def _write_bucket_table(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bucket\tcount_low\tcount_high\tf1\tn_relations\n")
        for row in rows:
            fh.write(
                f"{row['bucket']}\t{row['count_low']}\t{row['count_high']}"
                f"\t{row['f1']:.6f}\t{row['n_relations']}\n"
            )


def cmd_evaluate(args: argparse.Namespace) -> int:
    cat = load_catalog(args.entities, args.relations)
    pairs = _eval_pairs(args, cat)
    micro = micro_scores(pairs)
    macro = macro_scores(pairs, cat, args.macro_mode)
    report: dict = {
        "n_documents": len(pairs),
        "micro": _prf_json(micro),
        "macro": _prf_json(macro),
        "per_relation": {
            cat.relation_name(rel): {
                "p": s.p,
                "r": s.r,
                "f1": s.f1,
                "support": s.support,
                "flags": sorted(s.flags),
            }
            for rel, s in per_relation_scores(pairs, cat).items()
        },
    }
    if args.bootstrap and pairs:
        report["bootstrap"] = {
            "B": args.bootstrap,
            "level": 0.95,
            "micro_f1": list(
                bootstrap_ci(pairs, lambda ps: micro_scores(ps).f1, args.bootstrap, seed=args.seed)
            ),
            "macro_f1": list(
                bootstrap_ci(
                    pairs,
                    lambda ps: macro_scores(ps, cat, args.macro_mode).f1,
                    args.bootstrap,
                    seed=args.seed,
                )
            ),
        }
    inputs = {"gold": args.gold, "pred": args.pred, "entities": args.entities, "relations": args.relations}
    bucket_rows = None
    if args.buckets:
        if not args.counts:
            raise ValueError("--buckets requires --counts")
        counts = read_counts(args.counts, cat)
        bucket_rows = _bucket_rows(pairs, counts)
        inputs["counts"] = args.counts
    out = Path(args.out)
    with _transaction() as written:
        written.append(out)
        write_json(out, report)
        if bucket_rows is not None:
            table = Path(args.bucket_table) if args.bucket_table else out.with_suffix(".buckets.tsv")
            written.append(table)
            _write_bucket_table(table, bucket_rows)
        _write_manifest(
            _manifest_path(args, out.with_name(out.name + ".manifest.json")),
            written,
            "evaluate",
            {
                "macro_mode": args.macro_mode,
                "bootstrap": args.bootstrap,
                "buckets": args.buckets,
            },
            inputs,
            args.seed,
        )
    return 0


def cmd_buckets(args: argparse.Namespace) -> int:
    cat = load_catalog(args.entities, args.relations)
    pairs = _eval_pairs(args, cat)
    counts = read_counts(args.counts, cat)
    rows = _bucket_rows(pairs, counts)
    out = Path(args.out)
    with _transaction() as written:
        written.append(out)
        _write_bucket_table(out, rows)
        _write_manifest(
            _manifest_path(args, out.with_name(out.name + ".manifest.json")),
            written,
            "buckets",
            {},
            {
                "gold": args.gold,
                "pred": args.pred,
                "entities": args.entities,
                "relations": args.relations,
                "counts": args.counts,
            },
            args.seed,
        )
    return 0


# --- attribute ----------------------------------------------------------------


def _implicit_catalog(gold_path: str, pred_path: str) -> Catalog:
    """Catalog built from every name in the gold and prediction files.

    Attribution compares triplets by identity only, so any consistent
    name -> id assignment works when no catalog files are given.
    """
    entities: dict[str, None] = {}
    relations: dict[str, None] = {}
    for path in (gold_path, pred_path):
        for record in read_jsonl(path):
            candidates = record.get("candidates")
            if candidates:
                triplet_lists = [c.get("triplets", ()) for c in candidates]
            else:
                triplet_lists = [record.get("triplets", ())]
            for triplets in triplet_lists:
                for obj in triplets:
                    entities.setdefault(str(obj.get("sub")), None)
                    entities.setdefault(str(obj.get("obj")), None)
                    relations.setdefault(str(obj.get("rel")), None)
    return build_catalog(list(entities), list(relations))


def cmd_attribute(args: argparse.Namespace) -> int:
    if args.entities and args.relations:
        cat = load_catalog(args.entities, args.relations)
    else:
        cat = _implicit_catalog(args.gold, args.pred)
    gold_docs = read_documents(args.gold, cat)
    pred_sets = read_prediction_sets(args.pred, cat)
    pairs = [
        EvalPair(doc.doc_id, pred_sets.get(doc.doc_id, frozenset()), doc.triplet_set())
        for doc in gold_docs
    ]
    nel, rc = nel_rc_errors(pairs)
    report: dict = {
        "n_gold_triplets": sum(len(p.gold) for p in pairs),
        "nel_error": nel,
        "rc_error": rc,
        "overall_recall_error": recall_error(pairs),
    }
    inputs = {"gold": args.gold, "pred": args.pred}
    if args.mentions:
        mentions = read_mentions(args.mentions)
        report[f"ner_{args.mode}"] = ner_error(
            [doc.triplets for doc in gold_docs],
            [mentions.get(doc.doc_id, []) for doc in gold_docs],
            args.mode,
        )
        inputs["mentions"] = args.mentions
    out = Path(args.out)
    with _transaction() as written:
        written.append(out)
        write_json(out, report)
        _write_manifest(
            _manifest_path(args, out.with_name(out.name + ".manifest.json")),
            written,
            "attribute",
            {"mode": args.mode if args.mentions else None},
            inputs,
            args.seed,
        )
    return 0


# --- argument parsing ---------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--jobs", type=int, default=1, help="worker threads (decode only)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed, recorded in the manifest")
    p.add_argument("--manifest-out", help="manifest path (default: next to the output)")


def _add_catalog_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--entities", required=required, help="entity catalog TSV")
    p.add_argument("--relations", required=required, help="relation catalog TSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factbeam",
        description="Constrained triplet decoding and evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"factbeam {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("build-trie", help="build and serialize catalog tries")
    _add_catalog_flags(p)
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_build_trie)

    p = sub.add_parser("decode", help="constrained beam decode of input documents")
    p.add_argument("--input", required=True, help="documents JSONL ({id, input})")
    _add_catalog_flags(p)
    p.add_argument("--tries", help="directory with prebuilt entity.trie/relation.trie")
    p.add_argument(
        "--scorer",
        required=True,
        help="uniform | random | oracle:FILE | ngram:FILE",
    )
    p.add_argument("-k", "--beam-size", type=int, default=10)
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--length-alpha", type=float, default=0.0)
    p.add_argument("--max-triplets", type=int, default=None)
    p.add_argument("--no-empty-set", action="store_true", help="forbid the empty prediction")
    p.add_argument("--ngram-order", type=int, default=3)
    p.add_argument("--out", required=True, help="predictions JSONL")
    _add_common(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="micro/macro scores for predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    _add_catalog_flags(p)
    p.add_argument("--counts", help="relation occurrence TSV (training split)")
    p.add_argument("--buckets", action="store_true", help="also write the per-bucket table")
    p.add_argument("--bucket-table", help="bucket table path (default: <out>.buckets.tsv)")
    p.add_argument("--bootstrap", type=int, default=0, metavar="B")
    p.add_argument("--macro-mode", choices=("zero", "exclude"), default="zero")
    p.add_argument("--out", required=True, help="report JSON")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("buckets", help="per-occurrence-bucket F1 table")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    _add_catalog_flags(p)
    p.add_argument("--counts", required=True)
    p.add_argument("--out", required=True, help="bucket table TSV")
    _add_common(p)
    p.set_defaults(func=cmd_buckets)

    p = sub.add_parser("attribute", help="NER/NEL/RC recall-error decomposition")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    _add_catalog_flags(p, required=False)
    p.add_argument("--mentions", help="predicted mention spans JSONL ({id, spans})")
    p.add_argument("--mode", choices=("exact", "partial"), default="exact")
    p.add_argument("--out", required=True, help="report JSON")
    _add_common(p)
    p.set_defaults(func=cmd_attribute)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, CatalogError, json.JSONDecodeError) as exc:
        print(f"factbeam: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
