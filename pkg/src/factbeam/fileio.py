"""File formats: catalog TSV, occurrence-count TSV, document/prediction
JSON Lines, and the versioned binary trie artifact.

All text files are UTF-8 with LF line endings. The trie format is tool
private: readers refuse artifacts written by an incompatible version.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .catalog import Catalog, CatalogError, TokenTrie, build_catalog
from .linearize import MentionedTriplet, Triplet

log = logging.getLogger("factbeam")

TRIE_MAGIC = b"FBTRIE01"  # bump the trailing digits on format changes


class TrieFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    triplets: tuple[MentionedTriplet, ...]

    def triplet_set(self) -> frozenset[Triplet]:
        return frozenset(mt.triplet for mt in self.triplets)


# --- catalog TSV: id<TAB>name[<TAB>external_id] ---------------------------


def read_catalog_rows(path: str | Path) -> tuple[list[str], list[str | None] | None]:
    """Read one catalog class file; rows may be in any id order.

    Ids must be exactly 0..N-1. Returns (names ordered by id, external
    ids or None if no row carried one).
    """
    rows: dict[int, tuple[str, str | None]] = {}
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise CatalogError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields")
            try:
                ident = int(parts[0])
            except ValueError:
                raise CatalogError(f"{path}:{lineno}: non-integer id {parts[0]!r}") from None
            if ident in rows:
                raise CatalogError(f"{path}:{lineno}: duplicate id {ident}")
            rows[ident] = (parts[1], parts[2] if len(parts) == 3 else None)
    if sorted(rows) != list(range(len(rows))):
        raise CatalogError(f"{path}: ids are not dense 0..{len(rows) - 1}")
    names = [rows[i][0] for i in range(len(rows))]
    externals = [rows[i][1] for i in range(len(rows))]
    return names, externals if any(e is not None for e in externals) else None


def write_catalog_rows(
    path: str | Path, names: Sequence[str], external_ids: Sequence[str | None] | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, name in enumerate(names):
            if "\t" in name or "\n" in name:
                raise CatalogError(f"name {name!r} contains a tab or newline")
            ext = external_ids[i] if external_ids is not None else None
            fh.write(f"{i}\t{name}\t{ext}\n" if ext is not None else f"{i}\t{name}\n")


def load_catalog(entity_file: str | Path, relation_file: str | Path) -> Catalog:
    entity_names, entity_ext = read_catalog_rows(entity_file)
    relation_names, relation_ext = read_catalog_rows(relation_file)
    return build_catalog(entity_names, relation_names, entity_ext, relation_ext)


# --- occurrence counts TSV: relation_name<TAB>count ------------------------


def read_counts(path: str | Path, cat: Catalog) -> dict[int, int]:
    """Relation occurrence counts keyed by catalog relation id.

    Rows naming relations outside the catalog are skipped with a
    warning; they cannot affect triplets grounded in the catalog.
    """
    out: dict[int, int] = {}
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            name, _, raw = line.partition("\t")
            try:
                count = int(raw)
            except ValueError:
                raise CatalogError(f"{path}:{lineno}: non-integer count {raw!r}") from None
            if count < 0:
                raise CatalogError(f"{path}:{lineno}: negative count")
            rel = cat.relation_ids.get(name)
            if rel is None:
                log.warning("%s:%d: relation %r not in catalog, skipped", path, lineno, name)
                continue
            out[rel] = count
    return out


def write_counts(path: str | Path, counts: Mapping[int, int], cat: Catalog) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rel in sorted(counts):
            fh.write(f"{cat.relation_name(rel)}\t{counts[rel]}\n")


# --- documents / predictions JSONL -----------------------------------------


def _span(raw, doc_id: str) -> tuple[int, int] | None:
    if raw is None:
        return None
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ValueError(f"doc {doc_id!r}: span must be a [start, end] pair")
    return int(raw[0]), int(raw[1])


def triplet_from_json(obj: Mapping, cat: Catalog, doc_id: str) -> MentionedTriplet:
    names = []
    for key, table, kind in (
        ("sub", cat.entity_ids, "entity"),
        ("rel", cat.relation_ids, "relation"),
        ("obj", cat.entity_ids, "entity"),
    ):
        name = obj.get(key)
        if not isinstance(name, str):
            raise ValueError(f"doc {doc_id!r}: triplet missing {key!r}")
        ident = table.get(name)
        if ident is None:
            raise ValueError(f"doc {doc_id!r}: {kind} {name!r} not in catalog")
        names.append(ident)
    return MentionedTriplet(
        Triplet(names[0], names[1], names[2]),
        _span(obj.get("sub_span"), doc_id),
        _span(obj.get("obj_span"), doc_id),
    )


def triplet_to_json(mt: MentionedTriplet, cat: Catalog) -> dict:
    t = mt.triplet
    out: dict = {
        "sub": cat.entity_name(t.subject),
        "rel": cat.relation_name(t.relation),
        "obj": cat.entity_name(t.object),
    }
    if mt.subject_span is not None:
        out["sub_span"] = list(mt.subject_span)
    if mt.object_span is not None:
        out["obj_span"] = list(mt.object_span)
    return out


def read_documents(path: str | Path, cat: Catalog) -> list[Document]:
    docs: list[Document] = []
    for record in read_jsonl(path):
        doc_id = str(record.get("id"))
        triplets = tuple(
            triplet_from_json(obj, cat, doc_id) for obj in record.get("triplets", ())
        )
        docs.append(Document(doc_id, record.get("input", ""), triplets))
    return docs


def read_prediction_sets(path: str | Path, cat: Catalog) -> dict[str, frozenset[Triplet]]:
    """Rank-1 triplet set per document id.

    Accepts decoder output (records with ranked "candidates") as well as
    plain dataset records (a bare "triplets" list).
    """
    out: dict[str, frozenset[Triplet]] = {}
    for record in read_jsonl(path):
        doc_id = str(record.get("id"))
        if "candidates" in record:
            candidates = record["candidates"]
            chosen = min(candidates, key=lambda c: c["rank"]) if candidates else None
            raw = chosen["triplets"] if chosen else ()
        else:
            raw = record.get("triplets", ())
        out[doc_id] = frozenset(
            triplet_from_json(obj, cat, doc_id).triplet for obj in raw
        )
    return out


def read_mentions(path: str | Path) -> dict[str, list[tuple[int, int]]]:
    """Predicted mention spans per document: {"id", "spans": [[s, e], ...]}."""
    out: dict[str, list[tuple[int, int]]] = {}
    for record in read_jsonl(path):
        doc_id = str(record.get("id"))
        spans = [_span(s, doc_id) for s in record.get("spans", ())]
        out[doc_id] = [s for s in spans if s is not None]
    return out


def read_jsonl(path: str | Path) -> list[dict]:
    out: list[dict] = []
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from None
    return out


def write_jsonl(path: str | Path, records: Iterable[Mapping]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def write_json(path: str | Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


# --- binary trie artifact ---------------------------------------------------


def save_trie(trie: TokenTrie, path: str | Path) -> None:
    """Write a byte-deterministic artifact: same trie, same bytes."""
    n = trie.node_count
    offsets = np.zeros(n + 1, dtype=np.int64)
    tokens: list[int] = []
    targets: list[int] = []
    terminal = np.full(n, -1, dtype=np.int64)
    for node in range(n):
        for token, target in trie.children_of(node).items():
            tokens.append(token)
            targets.append(target)
        offsets[node + 1] = len(tokens)
        t = trie.terminal_id(node)
        if t is not None:
            terminal[node] = t
    with open(path, "wb") as fh:
        fh.write(TRIE_MAGIC)
        fh.write(struct.pack("<qq", n, len(tokens)))
        fh.write(offsets.tobytes())
        fh.write(np.asarray(tokens, dtype=np.int32).tobytes())
        fh.write(np.asarray(targets, dtype=np.int32).tobytes())
        fh.write(terminal.tobytes())


def load_trie(path: str | Path) -> TokenTrie:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(TRIE_MAGIC)] != TRIE_MAGIC:
        raise TrieFormatError(
            f"{path}: not a trie artifact of this tool version "
            f"(expected header {TRIE_MAGIC!r})"
        )
    pos = len(TRIE_MAGIC)
    n, n_edges = struct.unpack_from("<qq", data, pos)
    pos += 16

    def take(count: int, dtype) -> np.ndarray:
        nonlocal pos
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        pos += arr.nbytes
        return arr

    offsets = take(n + 1, np.int64)
    tokens = take(n_edges, np.int32)
    targets = take(n_edges, np.int32)
    terminal = take(n, np.int64)
    if pos != len(data):
        raise TrieFormatError(f"{path}: trailing bytes in trie artifact")
    children: list[dict[int, int]] = []
    for node in range(n):
        lo, hi = int(offsets[node]), int(offsets[node + 1])
        children.append(
            {int(tokens[i]): int(targets[i]) for i in range(lo, hi)}
        )
    return TokenTrie(children, [None if t < 0 else int(t) for t in terminal])


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
