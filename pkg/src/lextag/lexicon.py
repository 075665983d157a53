"""Categorized lexicon stored as a prefix trie over subword ids.

The trie is generation-stamped copy-on-write: taking a snapshot freezes the
current structure for readers, and later mutations copy only the nodes they
touch.  One writer at a time (guarded by a lock); any number of concurrent
readers may keep matching against their snapshots without blocking.
"""

from __future__ import annotations

import threading
from collections import Counter
from typing import Iterable, Iterator, Optional, Sequence


class LexiconError(ValueError):
    pass


class CategoryNotRegistered(LexiconError):
    pass


class EmptyEntryError(LexiconError):
    pass


PAD_TAG = "<pad>"


class TagVocabulary:
    """BIO tag ids over a fixed, ordered category set.

    Tag id 0 is O; each category contributes a B- and an I- id in
    registration order; the padding tag comes last.  Ids never change when
    lexicon entries are added or removed — only ``register`` (a new
    category) reshapes the space.  The degenerate mode has no categories
    and exactly the tags {O, B, I, <pad>} for boundary-only lexicons.
    """

    def __init__(self, categories: Iterable[str] = (), degenerate: bool = False):
        self.degenerate = degenerate
        self.categories: tuple[str, ...] = tuple(dict.fromkeys(categories))
        if degenerate and self.categories:
            raise LexiconError("a degenerate tag vocabulary takes no categories")
        self._category_ids = {c: i for i, c in enumerate(self.categories)}
        self._rebuild()

    def _rebuild(self) -> None:
        self.tag_ids: dict[str, int] = {"O": 0}
        if self.degenerate:
            self.tag_ids["B"] = 1
            self.tag_ids["I"] = 2
        else:
            for i, c in enumerate(self.categories):
                self.tag_ids[f"B-{c}"] = 1 + 2 * i
                self.tag_ids[f"I-{c}"] = 2 + 2 * i
        self.tag_ids[PAD_TAG] = len(self.tag_ids)
        self._names = [name for name, _ in sorted(self.tag_ids.items(), key=lambda kv: kv[1])]

    @property
    def o_id(self) -> int:
        return 0

    @property
    def pad_id(self) -> int:
        return self.tag_ids[PAD_TAG]

    @property
    def size(self) -> int:
        return len(self.tag_ids)

    def b_id(self, category_id: int) -> int:
        return 1 if self.degenerate else 1 + 2 * category_id

    def i_id(self, category_id: int) -> int:
        return 2 if self.degenerate else 2 + 2 * category_id

    def category_id(self, category: str) -> int:
        if self.degenerate:
            if category:
                raise CategoryNotRegistered(
                    f"degenerate vocabulary has no categories (got {category!r})"
                )
            return 0
        try:
            return self._category_ids[category]
        except KeyError:
            raise CategoryNotRegistered(f"category not registered: {category!r}") from None

    def category_name(self, category_id: int) -> str:
        return "" if self.degenerate else self.categories[category_id]

    def register(self, category: str) -> int:
        """Register a new category (idempotent); reshapes B/I/<pad> ids."""
        if self.degenerate:
            raise LexiconError("cannot register categories on a degenerate vocabulary")
        if not category:
            raise LexiconError("category name must be non-empty")
        if category in self._category_ids:
            return self._category_ids[category]
        self.categories = self.categories + (category,)
        self._category_ids[category] = len(self.categories) - 1
        self._rebuild()
        return self._category_ids[category]

    def encode_label(self, label: str) -> int:
        try:
            return self.tag_ids[label]
        except KeyError:
            raise CategoryNotRegistered(f"unknown tag label: {label!r}") from None

    def tag_name(self, tag_id: int) -> str:
        return self._names[tag_id]


class _Node:
    __slots__ = ("children", "categories", "gen")

    def __init__(self, gen: int, children=None, categories=None):
        self.children: Optional[dict[int, "_Node"]] = children
        self.categories: Optional[set[int]] = categories
        self.gen = gen


class TrieSnapshot:
    """An immutable view of the trie; later writes never alter it."""

    __slots__ = ("_root",)

    def __init__(self, root: _Node):
        self._root = root

    def match_at(self, tokens: Sequence[int], start: int) -> list[tuple[int, int]]:
        """All (end, category_id) with tokens[start:end] a stored entry.

        Results come in ascending end order (category id ascending within
        one end); a single trie walk, O(longest match from start).
        """
        if not 0 <= start < len(tokens):
            raise IndexError(f"start {start} out of range for {len(tokens)} tokens")
        out: list[tuple[int, int]] = []
        node = self._root
        for pos in range(start, len(tokens)):
            children = node.children
            if not children:
                break
            node = children.get(tokens[pos])
            if node is None:
                break
            if node.categories:
                for cid in sorted(node.categories):
                    out.append((pos + 1, cid))
        return out


class TrieLexicon:
    """Mutable lexicon store bound to one tokenizer and one tag vocabulary.

    Entries are tokenized at insertion with the bound tokenizer, so lexicon
    paths and sentence pieces always share one segmentation.
    """

    def __init__(self, tokenizer, tag_vocab: TagVocabulary):
        self.tokenizer = tokenizer
        self.tag_vocab = tag_vocab
        self._gen = 0
        self._root = _Node(0)
        self._entries: dict[tuple[str, int], tuple[int, ...]] = {}
        self._path_refs: Counter[tuple[tuple[int, ...], int]] = Counter()
        self._lock = threading.Lock()

    # -- keys ---------------------------------------------------------------

    def _canon(self, surface: str) -> str:
        canon = " ".join(surface.split())
        return canon.lower() if self.tokenizer.lowercase else canon

    def _resolve(self, surface: str, category: Optional[str]) -> tuple[str, int, tuple[int, ...]]:
        cid = self.tag_vocab.category_id(category or "")
        canon = self._canon(surface)
        pieces = tuple(self.tokenizer.encode_text(canon))
        return canon, cid, pieces

    # -- mutation -----------------------------------------------------------

    def insert_entry(self, surface: str, category: Optional[str] = None) -> None:
        """Insert one (surface, category) entry; duplicate inserts are no-ops."""
        canon, cid, pieces = self._resolve(surface, category)
        if not pieces:
            raise EmptyEntryError(f"surface tokenizes to nothing: {surface!r}")
        with self._lock:
            key = (canon, cid)
            if key in self._entries:
                return
            self._entries[key] = pieces
            self._path_refs[(pieces, cid)] += 1
            if self._path_refs[(pieces, cid)] == 1:
                self._trie_add(pieces, cid)

    def remove_entry(self, surface: str, category: Optional[str] = None) -> bool:
        """Remove one entry; returns False (and changes nothing) if absent."""
        try:
            canon, cid, pieces = self._resolve(surface, category)
        except CategoryNotRegistered:
            return False
        with self._lock:
            key = (canon, cid)
            if key not in self._entries:
                return False
            del self._entries[key]
            self._path_refs[(pieces, cid)] -= 1
            if self._path_refs[(pieces, cid)] == 0:
                del self._path_refs[(pieces, cid)]
                self._trie_remove(pieces, cid)
            return True

    def snapshot(self) -> TrieSnapshot:
        """Freeze the current trie for readers; cheap, O(1)."""
        with self._lock:
            snap = TrieSnapshot(self._root)
            self._gen += 1
            return snap

    # -- copy-on-write plumbing (callers hold the lock) ----------------------

    def _writable(self, node: _Node) -> _Node:
        if node.gen == self._gen:
            return node
        return _Node(
            self._gen,
            dict(node.children) if node.children else None,
            set(node.categories) if node.categories else None,
        )

    def _writable_root(self) -> _Node:
        root = self._writable(self._root)
        self._root = root
        return root

    def _trie_add(self, pieces: tuple[int, ...], cid: int) -> None:
        node = self._writable_root()
        for p in pieces:
            if node.children is None:
                node.children = {}
            child = node.children.get(p)
            if child is None:
                child = _Node(self._gen)
            else:
                child = self._writable(child)
            node.children[p] = child
            node = child
        if node.categories is None:
            node.categories = set()
        node.categories.add(cid)

    def _trie_remove(self, pieces: tuple[int, ...], cid: int) -> None:
        path: list[tuple[_Node, int]] = []
        node = self._writable_root()
        for p in pieces:
            child = self._writable(node.children[p])
            node.children[p] = child
            path.append((node, p))
            node = child
        node.categories.discard(cid)
        if not node.categories:
            node.categories = None
        while path:
            parent, key = path.pop()
            child = parent.children[key]
            if child.categories or child.children:
                break
            del parent.children[key]
            if not parent.children:
                parent.children = None

    # -- persistence ----------------------------------------------------------

    def load_tsv(self, path, auto_register: bool = False) -> int:
        """Insert all ``surface<TAB>category`` rows from a UTF-8 file.

        Returns the number of rows read.  Unknown categories raise unless
        ``auto_register`` is set; malformed rows raise with their line number.
        """
        rows = 0
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0].strip():
                    if len(parts) == 1 and self.tag_vocab.degenerate and parts[0].strip():
                        parts = [parts[0], ""]
                    else:
                        raise LexiconError(
                            f"{path}:{lineno}: expected 'surface<TAB>category', got {line!r}"
                        )
                surface, category = parts[0], parts[1].strip()
                if category and auto_register and not self.tag_vocab.degenerate:
                    self.tag_vocab.register(category)
                try:
                    self.insert_entry(surface, category)
                except LexiconError as err:
                    raise type(err)(f"{path}:{lineno}: {err}") from None
                rows += 1
        return rows

    def save_tsv(self, path) -> None:
        """Write one row per entry, sorted by (surface, category), LF endings."""
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for surface, category in self.entries():
                f.write(f"{surface}\t{category}\n")

    # -- inspection -----------------------------------------------------------

    def entries(self) -> Iterator[tuple[str, str]]:
        items = [
            (surface, self.tag_vocab.category_name(cid)) for surface, cid in self._entries
        ]
        return iter(sorted(items))

    def __contains__(self, entry: tuple[str, Optional[str]]) -> bool:
        surface, category = entry
        try:
            canon, cid, _ = self._resolve(surface, category)
        except CategoryNotRegistered:
            return False
        return (canon, cid) in self._entries

    @property
    def entry_count(self) -> int:
        return len(self._entries)

    def category_histogram(self) -> dict[str, int]:
        hist: Counter[str] = Counter()
        for _, cid in self._entries:
            hist[self.tag_vocab.category_name(cid)] += 1
        return dict(sorted(hist.items()))

    def max_entry_pieces(self) -> int:
        return max((len(p) for p in self._entries.values()), default=0)
