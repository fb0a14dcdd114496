"""Bracketed constituency trees: reading, layer traversal, subtree removal,
and detokenized re-rendering.

Depth convention: the root sits at depth 1 and token nodes count as nodes
one level below their preterminal, so leaves are traversable candidates for
the compression search.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

from .errors import DepthError, EmptyError, RootRemovalError, UnbalancedError

SYNTHETIC_ROOT_LABEL = "TOP"

PTB_ESCAPES = {
    "-LRB-": "(",
    "-RRB-": ")",
    "-LSB-": "[",
    "-RSB-": "]",
    "-LCB-": "{",
    "-RCB-": "}",
}

# tokens that glue to the preceding word when detokenizing
_ATTACH_LEFT = set(".,;:!?')]%") | {"'s", "n't", "'re", "'ve", "'ll", "'d", "'m"}
_ATTACH_RIGHT = set("([$")


@dataclass(frozen=True)
class ParseNode:
    id: int
    label: str
    depth: int
    children: tuple["ParseNode", ...] = ()
    token: str | None = None  # literal form, escapes resolved (leaves only)
    raw: str | None = None  # original token text as read (leaves only)

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    def leaves(self) -> list["ParseNode"]:
        if self.is_leaf:
            return [self]
        out = []
        for child in self.children:
            out.extend(child.leaves())
        return out


@dataclass(frozen=True)
class ParseTree:
    root: ParseNode

    @cached_property
    def _index(self) -> dict[int, ParseNode]:
        index = {}
        stack = [self.root]
        while stack:
            node = stack.pop()
            index[node.id] = node
            stack.extend(node.children)
        return index

    def node(self, node_id: int) -> ParseNode:
        from .errors import UnknownNodeError

        try:
            return self._index[node_id]
        except KeyError:
            raise UnknownNodeError(f"no node with id {node_id}")

    def __contains__(self, node_id: int) -> bool:
        return node_id in self._index

    def leaves(self) -> list[ParseNode]:
        return self.root.leaves()

    @property
    def source_tokens(self) -> list[str]:
        return [leaf.token for leaf in self.leaves()]

    @property
    def depth(self) -> int:
        return max(node.depth for node in self._index.values())


_LEXER = re.compile(r"\(|\)|[^\s()]+")


def parse_bracketed(text: str) -> ParseTree:
    """Read a Penn-Treebank-style bracketed expression.

    Multiple top-level trees are joined under a synthetic TOP node. PTB
    escape tokens (-LRB- etc.) are mapped to literal brackets in the token
    value; the raw form is kept for bracketed re-serialization.
    """
    tokens = [(m.group(0), m.start()) for m in _LEXER.finditer(text)]
    if not tokens:
        raise EmptyError("no tree in input")

    pos = 0
    counter = 0

    def next_id() -> int:
        nonlocal counter
        counter += 1
        return counter - 1

    def parse_node(depth: int) -> ParseNode:
        nonlocal pos
        tok, at = tokens[pos]
        if tok != "(":
            raise UnbalancedError(f"expected '(' at offset {at}", position=at)
        pos += 1
        if pos >= len(tokens) or tokens[pos][0] in "()":
            at = tokens[pos][1] if pos < len(tokens) else len(text)
            raise UnbalancedError(f"expected a constituent label at offset {at}", position=at)
        node_id = next_id()
        label = tokens[pos][0]
        pos += 1
        children = []
        while pos < len(tokens) and tokens[pos][0] != ")":
            if tokens[pos][0] == "(":
                children.append(parse_node(depth + 1))
            else:
                raw, _ = tokens[pos]
                pos += 1
                children.append(
                    ParseNode(
                        id=next_id(),
                        label=raw,
                        depth=depth + 1,
                        token=PTB_ESCAPES.get(raw, raw),
                        raw=raw,
                    )
                )
        if pos >= len(tokens):
            raise UnbalancedError(f"unclosed '(' opened at offset {at}", position=at)
        pos += 1  # consume ')'
        return ParseNode(id=node_id, label=label, depth=depth, children=tuple(children))

    # reserve id 0 for a potential synthetic root: parse once to count roots
    roots: list[ParseNode] = []
    counter = 1  # id 0 kept for the synthetic/actual root slot
    first = True
    while pos < len(tokens):
        tok, at = tokens[pos]
        if tok == ")":
            raise UnbalancedError(f"unmatched ')' at offset {at}", position=at)
        if tok != "(":
            raise UnbalancedError(f"stray token {tok!r} at offset {at}", position=at)
        roots.append(parse_node(2))
        first = False
    if len(roots) == 1:
        root = _shift_depth(roots[0], -1)
        root = ParseNode(id=0, label=root.label, depth=1, children=root.children, token=root.token, raw=root.raw)
    else:
        root = ParseNode(id=0, label=SYNTHETIC_ROOT_LABEL, depth=1, children=tuple(roots))
    return ParseTree(root=root)


def _shift_depth(node: ParseNode, delta: int) -> ParseNode:
    return ParseNode(
        id=node.id,
        label=node.label,
        depth=node.depth + delta,
        children=tuple(_shift_depth(c, delta) for c in node.children),
        token=node.token,
        raw=node.raw,
    )


def nodes_at_depth(tree: ParseTree, d: int) -> list[int]:
    """Node ids at layer d, in left-to-right span order."""
    if d < 1 or d > tree.depth:
        raise DepthError(f"depth {d} outside 1..{tree.depth}")
    out: list[int] = []

    def walk(node: ParseNode):
        if node.depth == d:
            out.append(node.id)
            return
        for child in node.children:
            walk(child)

    walk(tree.root)
    return out


def remove_subtree(tree: ParseTree, node_id: int) -> ParseTree:
    """Return a new tree without the given node's subtree.

    Internal nodes left with no leaf descendants are pruned; surviving nodes
    keep their ids and depths. The original tree is unchanged.
    """
    target = tree.node(node_id)  # raises UnknownNodeError
    if target.id == tree.root.id:
        raise RootRemovalError("cannot remove the root node")

    def rebuild(node: ParseNode) -> ParseNode | None:
        if node.id == node_id:
            return None
        if node.is_leaf:
            return node
        children = tuple(c for c in (rebuild(child) for child in node.children) if c is not None)
        if not children and node.id != tree.root.id:
            return None  # emptied internal node
        return ParseNode(
            id=node.id, label=node.label, depth=node.depth, children=children,
            token=node.token, raw=node.raw,
        )

    new_root = rebuild(tree.root)
    assert new_root is not None
    return ParseTree(root=new_root)


def detokenize(tokens: list[str]) -> str:
    """Join tokens with spaces, attaching punctuation and contraction pieces."""
    out: list[str] = []
    glue_next = False
    for tok in tokens:
        if not out or glue_next or tok in _ATTACH_LEFT:
            out.append(tok)
        else:
            out.append(" " + tok)
        glue_next = tok in _ATTACH_RIGHT
    return "".join(out)


def render(tree: ParseTree) -> str:
    """Detokenized text of the tree's leaves; empty tree renders ''."""
    return detokenize(tree.source_tokens)


def to_bracketed(tree: ParseTree) -> str:
    """Serialize back to bracketed notation using raw (escaped) token forms."""

    def fmt(node: ParseNode) -> str:
        if node.is_leaf:
            return node.raw if node.raw is not None else node.token
        inner = " ".join(fmt(c) for c in node.children)
        return f"({node.label} {inner})" if inner else f"({node.label})"

    return fmt(tree.root)
