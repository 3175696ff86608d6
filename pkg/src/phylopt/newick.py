"""Newick trees, per-branch bootstrap supports, and canonical topologies.

Supports are read from internal-node labels (the convention of standard
maximum-likelihood bootstrap output).  Topology identity is defined through
the set of non-trivial bipartitions of the unrooted tree, so re-rooting,
child order, branch lengths and support values never change a topology key.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional


class NewickParseError(ValueError):
    """Malformed Newick input; carries the character offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


# Characters that end an unquoted label.
_LABEL_TERMINATORS = set("(),:;")
_NEEDS_QUOTING = set("(),:;'[] \t\n\r")


class Node:
    """One tree node.  Leaves carry a taxon name; internal nodes may carry a
    bootstrap support label.  Branch length is the length of the edge above."""

    __slots__ = ("name", "children", "length", "support")

    def __init__(
        self,
        name: Optional[str] = None,
        children: Optional[list["Node"]] = None,
        length: Optional[float] = None,
        support: Optional[int] = None,
    ):
        self.name = name
        self.children = children if children is not None else []
        self.length = length
        self.support = support

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["Node"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


class Tree:
    """A rooted phylogeny with unique leaf names.

    Multifurcations are accepted; every internal node must have at least two
    children and supports, when present, must lie in [0, 100].
    """

    def __init__(self, root: Node):
        self.root = root
        names: list[str] = []
        for node in root.walk():
            if node.is_leaf:
                if not node.name:
                    raise ValueError("leaf with empty name")
                names.append(node.name)
            else:
                if len(node.children) < 2:
                    raise ValueError("internal node with fewer than 2 children")
                if node.support is not None and not 0 <= node.support <= 100:
                    raise ValueError(f"support {node.support} out of range [0, 100]")
            if node.length is not None and node.length < 0:
                raise ValueError(f"negative branch length {node.length}")
        if len(set(names)) != len(names):
            dupes = sorted({x for x in names if names.count(x) > 1})
            raise ValueError(f"duplicate taxon name(s): {', '.join(dupes)}")
        self.taxa: frozenset[str] = frozenset(names)

    def leaves(self) -> Iterator[Node]:
        return (n for n in self.root.walk() if n.is_leaf)

    def internal_nodes(self) -> Iterator[Node]:
        return (n for n in self.root.walk() if not n.is_leaf)

    def __str__(self) -> str:
        return serialize_newick(self)


@dataclass(frozen=True)
class Bipartition:
    """A non-trivial split of the taxon set, keyed by its smaller side.

    ``side`` is the canonical half (fewer taxa; ties broken by sorted order)
    and ``taxa`` the full taxon set, so splits from different studies never
    compare equal by accident.
    """

    side: frozenset[str]
    taxa: frozenset[str]

    def __post_init__(self):
        if not self.side or not self.side < self.taxa:
            raise ValueError("side must be a non-empty proper subset of taxa")
        other = self.taxa - self.side
        if len(self.side) < 2 or len(other) < 2:
            raise ValueError("trivial split (singleton or complement-singleton)")
        canonical = _canonical_side(self.side, self.taxa)
        if canonical != self.side:
            object.__setattr__(self, "side", canonical)

    @property
    def sorted_side(self) -> tuple[str, ...]:
        return tuple(sorted(self.side))

    def __repr__(self) -> str:
        return f"Bipartition({'|'.join(self.sorted_side)})"


def _canonical_side(side: frozenset[str], taxa: frozenset[str]) -> frozenset[str]:
    other = taxa - side
    if len(side) < len(other):
        return side
    if len(other) < len(side):
        return other
    return side if tuple(sorted(side)) <= tuple(sorted(other)) else other


# ── parsing ──────────────────────────────────────────────────────────────


class _Parser:
    def __init__(self, text: str, pos: int = 0):
        self.text = text
        self.pos = pos

    def error(self, message: str) -> NewickParseError:
        return NewickParseError(message, self.pos)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str) -> None:
        if self.peek() != char:
            raise self.error(f"expected {char!r}, found {self.peek()!r}")
        self.pos += 1

    def parse_tree(self) -> Node:
        self.skip_ws()
        node = self.parse_subtree()
        self.skip_ws()
        self.expect(";")
        return node

    def parse_subtree(self) -> Node:
        self.skip_ws()
        if self.peek() == "(":
            return self.parse_internal()
        return self.parse_leaf()

    def parse_internal(self) -> Node:
        self.expect("(")
        children = [self.parse_subtree()]
        self.skip_ws()
        while self.peek() == ",":
            self.pos += 1
            children.append(self.parse_subtree())
            self.skip_ws()
        self.expect(")")
        label_offset = self.pos
        label = self.parse_label(optional=True)
        support = self.parse_support(label, label_offset)
        length = self.parse_length()
        return Node(children=children, support=support, length=length)

    def parse_leaf(self) -> Node:
        offset = self.pos
        name = self.parse_label(optional=False)
        if name == "":
            raise NewickParseError("empty leaf name", offset)
        length = self.parse_length()
        return Node(name=name, length=length)

    def parse_support(self, label: Optional[str], offset: int) -> Optional[int]:
        """Internal-node labels are support values; non-integer labels are
        floored.  Anything non-numeric or out of [0, 100] is rejected."""
        if label is None or label == "":
            return None
        try:
            value = float(label)
        except ValueError:
            raise NewickParseError(f"internal-node label {label!r} is not a support value", offset)
        if not math.isfinite(value):
            raise NewickParseError(f"non-finite support {label!r}", offset)
        support = math.floor(value)
        if not 0 <= support <= 100:
            raise NewickParseError(f"support {label!r} out of range [0, 100]", offset)
        return support

    def parse_length(self) -> Optional[float]:
        self.skip_ws()
        if self.peek() != ":":
            return None
        self.pos += 1
        self.skip_ws()
        start = self.pos
        while self.peek() and self.peek() not in _LABEL_TERMINATORS and self.peek() not in " \t\r\n":
            self.pos += 1
        token = self.text[start : self.pos]
        try:
            length = float(token)
        except ValueError:
            raise NewickParseError(f"bad branch length {token!r}", start)
        if length < 0 or not math.isfinite(length):
            raise NewickParseError(f"bad branch length {token!r}", start)
        return length

    def parse_label(self, optional: bool) -> Optional[str]:
        self.skip_ws()
        ch = self.peek()
        if ch in "[]":
            raise self.error(f"unsupported character {ch!r}")
        if ch == "'":
            return self.parse_quoted()
        start = self.pos
        while self.peek() and self.peek() not in _LABEL_TERMINATORS and self.peek() not in " \t\r\n'[]":
            self.pos += 1
        label = self.text[start : self.pos]
        # Whitespace inside unquoted names is a parse error: after a label and
        # whitespace, another label character cannot legally follow.
        if label:
            mark = self.pos
            self.skip_ws()
            nxt = self.peek()
            if mark != self.pos and nxt and nxt not in _LABEL_TERMINATORS:
                raise self.error("whitespace inside unquoted name")
        if label == "" and not optional:
            raise self.error("expected a name")
        return label if label or optional else None

    def parse_quoted(self) -> str:
        self.expect("'")
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self.error("unterminated quoted label")
            ch = self.text[self.pos]
            self.pos += 1
            if ch == "'":
                if self.peek() == "'":  # '' escapes a quote
                    out.append("'")
                    self.pos += 1
                else:
                    return "".join(out)
            else:
                out.append(ch)


def parse_newick(text: str) -> Tree:
    """Parse a single ';'-terminated Newick statement."""
    parser = _Parser(text)
    root = parser.parse_tree()
    parser.skip_ws()
    if parser.pos != len(text):
        raise parser.error("trailing garbage after ';'")
    try:
        return Tree(root)
    except ValueError as exc:
        raise NewickParseError(str(exc), 0) from exc


def parse_forest(text: str) -> list[Tree]:
    """Parse any number of statements (one per file or one per line)."""
    trees: list[Tree] = []
    parser = _Parser(text)
    parser.skip_ws()
    while parser.pos < len(text):
        root = parser.parse_tree()
        try:
            trees.append(Tree(root))
        except ValueError as exc:
            raise NewickParseError(str(exc), parser.pos) from exc
        parser.skip_ws()
    return trees


def read_newick_file(path: str | Path) -> list[Tree]:
    return parse_forest(Path(path).read_text(encoding="utf-8"))


# ── serialization ────────────────────────────────────────────────────────


def _format_name(name: str) -> str:
    if name and not (set(name) & _NEEDS_QUOTING):
        return name
    return "'" + name.replace("'", "''") + "'"


def _serialize_node(node: Node, out: list[str]) -> None:
    if node.is_leaf:
        out.append(_format_name(node.name))
    else:
        out.append("(")
        for i, child in enumerate(node.children):
            if i:
                out.append(",")
            _serialize_node(child, out)
        out.append(")")
        if node.support is not None:
            out.append(str(node.support))
    if node.length is not None:
        out.append(":" + repr(node.length))


def serialize_newick(tree: Tree) -> str:
    out: list[str] = []
    _serialize_node(tree.root, out)
    out.append(";")
    return "".join(out)


# ── bipartitions, topology, supports ─────────────────────────────────────


def _leafsets(tree: Tree) -> list[tuple[Node, frozenset[str]]]:
    """(node, leaves below node) for every non-root internal node."""
    result: list[tuple[Node, frozenset[str]]] = []

    def below(node: Node) -> frozenset[str]:
        if node.is_leaf:
            return frozenset((node.name,))
        leaves = frozenset().union(*(below(c) for c in node.children))
        if node is not tree.root:
            result.append((node, leaves))
        return leaves

    below(tree.root)
    return result


def bipartitions(tree: Tree) -> frozenset[Bipartition]:
    """All non-trivial splits of the unrooted tree, one per internal edge.

    The two root edges of a rooted binary tree induce the same unrooted
    split and collapse to a single bipartition here.
    """
    splits = set()
    taxa = tree.taxa
    for _node, leaves in _leafsets(tree):
        if 2 <= len(leaves) <= len(taxa) - 2:
            splits.add(Bipartition(leaves, taxa))
    return frozenset(splits)


def split_supports(tree: Tree) -> dict[Bipartition, int]:
    """Support per non-trivial unrooted split; unlabeled edges are absent.

    If two rooted edges map to one unrooted split (a labeled binary root),
    the smaller label wins, keeping ``lowest_support`` consistent with the
    per-split view.
    """
    supports: dict[Bipartition, int] = {}
    taxa = tree.taxa
    for node, leaves in _leafsets(tree):
        if node.support is None or not 2 <= len(leaves) <= len(taxa) - 2:
            continue
        split = Bipartition(leaves, taxa)
        if split not in supports or node.support < supports[split]:
            supports[split] = node.support
    return supports


def topology_key(tree: Tree) -> str:
    """Canonical digest of the unrooted leaf-labeled topology.

    Equal keys iff equal taxon sets and equal non-trivial bipartition sets;
    rooting, child order, lengths and supports are all ignored.
    """
    payload = {
        "taxa": sorted(tree.taxa),
        "splits": sorted(sorted(b.side) for b in bipartitions(tree)),
    }
    blob = json.dumps(payload, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def lowest_support(tree: Tree) -> int:
    """Minimum support over all labeled non-trivial internal edges."""
    taxa = tree.taxa
    labels = [
        node.support
        for node, leaves in _leafsets(tree)
        if node.support is not None and 2 <= len(leaves) <= len(taxa) - 2
    ]
    if not labels:
        raise ValueError("tree has no labeled non-trivial internal edge")
    return min(labels)


def branch_support(tree: Tree, split: Bipartition) -> Optional[int]:
    """Support of the edge inducing ``split``, or None if the topology lacks it."""
    if split.taxa != tree.taxa:
        raise ValueError("bipartition is over a different taxon set")
    return split_supports(tree).get(split)
