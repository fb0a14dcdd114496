import random

import pytest

from defkit.errors import (
    DepthError,
    EmptyError,
    RootRemovalError,
    UnbalancedError,
    UnknownNodeError,
)
from defkit.parse import (
    ParseTree,
    detokenize,
    nodes_at_depth,
    parse_bracketed,
    remove_subtree,
    render,
    to_bracketed,
)

from conftest import FOX_TREE_TEXT

CAT_TREE = "(S (NP (DT the) (NN cat)) (VP (VBD sat)))"


class TestParseBracketed:
    def test_leaves(self):
        tree = parse_bracketed(CAT_TREE)
        assert tree.source_tokens == ["the", "cat", "sat"]

    def test_unbalanced(self):
        with pytest.raises(UnbalancedError):
            parse_bracketed("((A a)")
        with pytest.raises(UnbalancedError):
            parse_bracketed("(A a))")

    def test_empty(self):
        with pytest.raises(EmptyError):
            parse_bracketed("   ")

    def test_ptb_escapes(self):
        tree = parse_bracketed("(NP (-LRB- -LRB-) (NN x) (-RRB- -RRB-))")
        assert tree.source_tokens == ["(", "x", ")"]

    def test_multiple_roots_joined_under_top(self):
        tree = parse_bracketed("(S (NN a)) (S (NN b))")
        assert tree.root.label == "TOP"
        assert tree.source_tokens == ["a", "b"]

    def test_depth_convention(self):
        tree = parse_bracketed(CAT_TREE)
        assert tree.root.depth == 1
        # token nodes count as nodes one level below their preterminal
        assert tree.depth == 4


class TestNodesAtDepth:
    def test_layers(self):
        tree = parse_bracketed(CAT_TREE)
        assert [tree.node(i).label for i in nodes_at_depth(tree, 1)] == ["S"]
        assert [tree.node(i).label for i in nodes_at_depth(tree, 2)] == ["NP", "VP"]
        assert [tree.node(i).label for i in nodes_at_depth(tree, 3)] == ["DT", "NN", "VBD"]
        leaves = nodes_at_depth(tree, 4)
        assert [tree.node(i).token for i in leaves] == ["the", "cat", "sat"]

    def test_depth_error(self):
        tree = parse_bracketed(CAT_TREE)
        with pytest.raises(DepthError):
            nodes_at_depth(tree, 0)
        with pytest.raises(DepthError):
            nodes_at_depth(tree, 5)

    def test_layers_partition_nodes(self):
        tree = parse_bracketed(FOX_TREE_TEXT)
        seen = []
        for d in range(1, tree.depth + 1):
            seen.extend(nodes_at_depth(tree, d))
        assert sorted(seen) == sorted(tree._index)
        assert len(seen) == len(set(seen))


class TestRemoveSubtree:
    def test_remove_np(self):
        tree = parse_bracketed(CAT_TREE)
        np_id = nodes_at_depth(tree, 2)[0]
        pruned = remove_subtree(tree, np_id)
        assert pruned.source_tokens == ["sat"]
        # original unchanged
        assert tree.source_tokens == ["the", "cat", "sat"]

    def test_remove_leaf_token(self):
        tree = parse_bracketed(CAT_TREE)
        leaf_id = nodes_at_depth(tree, 4)[0]
        pruned = remove_subtree(tree, leaf_id)
        assert pruned.source_tokens == ["cat", "sat"]

    def test_remove_root_error(self):
        tree = parse_bracketed(CAT_TREE)
        with pytest.raises(RootRemovalError):
            remove_subtree(tree, tree.root.id)

    def test_unknown_node(self):
        tree = parse_bracketed(CAT_TREE)
        with pytest.raises(UnknownNodeError):
            remove_subtree(tree, 9999)

    def test_token_accounting(self):
        tree = parse_bracketed(FOX_TREE_TEXT)
        before = len(tree.source_tokens)
        for node_id in sorted(tree._index):
            if node_id == tree.root.id:
                continue
            removed_leaves = len(tree.node(node_id).leaves())
            pruned = remove_subtree(tree, node_id)
            assert len(pruned.source_tokens) == before - removed_leaves


class TestRender:
    def test_full(self):
        assert render(parse_bracketed(CAT_TREE)) == "the cat sat"

    def test_after_removal(self):
        tree = parse_bracketed(CAT_TREE)
        assert render(remove_subtree(tree, nodes_at_depth(tree, 2)[0])) == "sat"

    def test_contraction(self):
        assert detokenize(["do", "n't", "stop"]) == "don't stop"

    def test_punctuation(self):
        assert detokenize(["hello", ",", "world", "!"]) == "hello, world!"
        assert detokenize(["(", "a", ")"]) == "(a)"

    def test_empty(self):
        assert detokenize([]) == ""


TAGS = ["S", "NP", "VP", "PP", "ADJP"]
WORDS = ["cat", "dog", "runs", "blue", "fast", "tree", "x1", "y2"]


def random_tree_text(rng, max_depth=6, max_leaves=40):
    budget = [rng.randint(1, max_leaves)]

    def gen(depth):
        if depth >= max_depth or budget[0] <= 0 or rng.random() < 0.3:
            budget[0] -= 1
            return f"({rng.choice(TAGS)} {rng.choice(WORDS)})"
        n_children = rng.randint(1, 3)
        children = " ".join(gen(depth + 1) for _ in range(n_children))
        return f"({rng.choice(TAGS)} {children})"

    return gen(1)


def test_random_roundtrip():
    rng = random.Random(42)
    for _ in range(100):
        text = random_tree_text(rng)
        tree = parse_bracketed(text)
        again = parse_bracketed(to_bracketed(tree))
        assert again.source_tokens == tree.source_tokens
