"""Entity/relation catalogs and the prefix tries built over their names.

A Catalog assigns dense integer ids to unique entity and relation names.
A TokenTrie indexes the tokenized names and answers "which tokens may
follow this prefix", the query at the heart of constrained decoding.
Both structures are immutable once built and safe to share across
concurrent decoders.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .tokens import Tokenizer


class CatalogError(ValueError):
    pass


class EmptyName(CatalogError):
    pass


class DuplicateName(CatalogError):
    def __init__(self, name: str, kind: str):
        super().__init__(f"duplicate {kind} name: {name!r}")
        self.name = name
        self.kind = kind


class InvalidPrefix(CatalogError):
    """Raised when a prefix walks off the trie."""


@dataclass(frozen=True)
class Catalog:
    """Immutable registry of entity and relation names with dense ids.

    Ids are 0..N-1 in each class, assigned in ingest order. External
    identifiers (e.g. KB item ids) are carried as opaque metadata and
    play no role in lookups.
    """

    entity_names: tuple[str, ...]
    relation_names: tuple[str, ...]
    entity_external_ids: tuple[str | None, ...] | None = None
    relation_external_ids: tuple[str | None, ...] | None = None

    @cached_property
    def entity_ids(self) -> Mapping[str, int]:
        return {name: i for i, name in enumerate(self.entity_names)}

    @cached_property
    def relation_ids(self) -> Mapping[str, int]:
        return {name: i for i, name in enumerate(self.relation_names)}

    @property
    def num_entities(self) -> int:
        return len(self.entity_names)

    @property
    def num_relations(self) -> int:
        return len(self.relation_names)

    def entity_name(self, entity_id: int) -> str:
        if not 0 <= entity_id < len(self.entity_names):
            raise KeyError(f"unknown entity id {entity_id}")
        return self.entity_names[entity_id]

    def relation_name(self, relation_id: int) -> str:
        if not 0 <= relation_id < len(self.relation_names):
            raise KeyError(f"unknown relation id {relation_id}")
        return self.relation_names[relation_id]


def _validated(names: Iterable[str], kind: str) -> tuple[str, ...]:
    seen: set[str] = set()
    out: list[str] = []
    for name in names:
        if not name.strip():
            raise EmptyName(f"blank {kind} name at position {len(out)}")
        if name in seen:
            raise DuplicateName(name, kind)
        seen.add(name)
        out.append(name)
    return tuple(out)


def build_catalog(
    entity_names: Iterable[str],
    relation_names: Iterable[str],
    entity_external_ids: Sequence[str | None] | None = None,
    relation_external_ids: Sequence[str | None] | None = None,
) -> Catalog:
    """Assemble a Catalog, assigning dense ids in input order.

    Raises EmptyName for blank entries and DuplicateName for repeats
    within a class.
    """
    entities = _validated(entity_names, "entity")
    relations = _validated(relation_names, "relation")
    if entity_external_ids is not None and len(entity_external_ids) != len(entities):
        raise CatalogError("entity external id column length mismatch")
    if relation_external_ids is not None and len(relation_external_ids) != len(relations):
        raise CatalogError("relation external id column length mismatch")
    return Catalog(
        entities,
        relations,
        tuple(entity_external_ids) if entity_external_ids is not None else None,
        tuple(relation_external_ids) if relation_external_ids is not None else None,
    )


class TokenTrie:
    """Immutable prefix trie keyed by token ids.

    Nodes are integer indices into parallel arrays; node 0 is the root.
    A node's terminal marker holds the catalog id of the name whose full
    token sequence ends there (at most one, names being unique).
    """

    __slots__ = ("_children", "_terminal")

    ROOT = 0

    def __init__(self, children: list[dict[int, int]], terminal: list[int | None]):
        self._children = children
        self._terminal = terminal

    @property
    def node_count(self) -> int:
        return len(self._children)

    def __len__(self) -> int:
        return sum(1 for t in self._terminal if t is not None)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TokenTrie):
            return NotImplemented
        return self._children == other._children and self._terminal == other._terminal

    def child(self, node: int, token: int) -> int | None:
        return self._children[node].get(token)

    def children_of(self, node: int) -> Mapping[int, int]:
        return self._children[node]

    def terminal_id(self, node: int) -> int | None:
        return self._terminal[node]

    def walk(self, prefix: Sequence[int]) -> int:
        """Follow prefix from the root, returning the node index.

        Raises InvalidPrefix if any step has no matching edge.
        """
        node = self.ROOT
        for depth, token in enumerate(prefix):
            nxt = self._children[node].get(token)
            if nxt is None:
                raise InvalidPrefix(
                    f"token {token} at position {depth} leaves the trie"
                )
            node = nxt
        return node

    def approx_bytes(self) -> int:
        """Estimated in-memory footprint of the node arrays."""
        total = sys.getsizeof(self._children) + sys.getsizeof(self._terminal)
        for d in self._children:
            total += sys.getsizeof(d)
        return total


def build_trie(names_with_ids: Iterable[tuple[int, str]], tok: Tokenizer) -> TokenTrie:
    """Insert every (id, name) pair; names must tokenize uniquely.

    Node count never exceeds the total token count over all names plus
    one (the root). Nodes are renumbered in depth-first sorted-edge
    order, so the structure depends only on the (id, name) set, never on
    insertion order.
    """
    children: list[dict[int, int]] = [{}]
    terminal: list[int | None] = [None]
    for catalog_id, name in names_with_ids:
        node = 0
        for token in tok.encode(name):
            ch = children[node]
            nxt = ch.get(token)
            if nxt is None:
                nxt = len(children)
                ch[token] = nxt
                children.append({})
                terminal.append(None)
            node = nxt
        if terminal[node] is not None:
            raise DuplicateName(name, "trie")
        terminal[node] = catalog_id
    order = [0] * len(children)  # old index -> canonical index
    new_children: list[dict[int, int]] = []
    new_terminal: list[int | None] = []
    stack = [0]
    while stack:
        old = stack.pop()
        order[old] = len(new_children)
        new_children.append(children[old])
        new_terminal.append(terminal[old])
        for token in sorted(children[old], reverse=True):  # smaller tokens pop first
            stack.append(children[old][token])
    for i, ch in enumerate(new_children):
        new_children[i] = {t: order[n] for t, n in sorted(ch.items())}
    return TokenTrie(new_children, new_terminal)


def allowed_next(
    trie: TokenTrie, prefix: Sequence[int]
) -> tuple[set[int], int | None]:
    """Continuation tokens and completed catalog id for a name prefix.

    Returns the set of child tokens at the node reached by prefix, plus
    the terminal marker there if the prefix spells out a complete name.
    Raises InvalidPrefix if the prefix is not a path from the root.
    """
    node = trie.walk(prefix)
    return set(trie.children_of(node).keys()), trie.terminal_id(node)


def restrict_relations(
    cat: Catalog, occurrence_counts: Mapping[int, int], top_n: int
) -> tuple[Catalog, dict[int, int]]:
    """Keep only the top_n relations by occurrence count.

    Ties break toward the smaller original id; relations missing from
    occurrence_counts count as 0. Kept relations are re-densified in
    original id order, so top_n >= |R| returns an identity mapping.
    Entities are untouched. Returns (new catalog, old id -> new id).
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    n = cat.num_relations
    if top_n >= n:
        return cat, {i: i for i in range(n)}
    ranked = sorted(range(n), key=lambda r: (-occurrence_counts.get(r, 0), r))
    kept = sorted(ranked[:top_n])
    mapping = {old: new for new, old in enumerate(kept)}
    ext = cat.relation_external_ids
    restricted = Catalog(
        cat.entity_names,
        tuple(cat.relation_names[old] for old in kept),
        cat.entity_external_ids,
        tuple(ext[old] for old in kept) if ext is not None else None,
    )
    return restricted, mapping
