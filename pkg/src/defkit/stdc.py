"""Syntax-guided greedy compression of task definitions over their
constituency parse trees, plus holdout evaluation and category-level
retention accounting."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .ablation import compression_ratio
from .annotations import AnnotationSet, ContentCategory, validate_annotation
from .corpus import DEFAULT_TEMPLATE, ExampleSet, Task
from .errors import EmptyResultError, InvariantError, ScorerError, ValidationError
from .metrics import normalize
from .parse import ParseNode, ParseTree, nodes_at_depth, remove_subtree, render
from .scorer import Backend, GenerationParams, ScoreCache, score

BASELINE_CURRENT = "current"
BASELINE_PAPER_LITERAL = "paper"

UNANNOTATED = "unannotated"


@dataclass(frozen=True)
class StdcConfig:
    baseline_mode: str = BASELINE_CURRENT  # "current" or "paper"
    epsilon: float = 0.0
    allow_empty_result: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvariantError("epsilon must be >= 0")
        if self.baseline_mode not in (BASELINE_CURRENT, BASELINE_PAPER_LITERAL):
            raise InvariantError(f"unknown baseline mode {self.baseline_mode!r}")


@dataclass(frozen=True)
class Step:
    node_id: int
    label: str
    leaves_removed: tuple[str, ...]
    candidate_score: float
    accepted: bool

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "label": self.label,
            "leaves_removed": list(self.leaves_removed),
            "candidate_score": self.candidate_score,
            "accepted": self.accepted,
        }


@dataclass(frozen=True)
class CompressionResult:
    task_id: str
    full_definition: str
    compressed_definition: str
    ratio: float
    fit_score_before: float
    fit_score_after: float
    steps: tuple[Step, ...]

    def accepted_node_ids(self) -> list[int]:
        return [s.node_id for s in self.steps if s.accepted]

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "full_definition": self.full_definition,
            "compressed_definition": self.compressed_definition,
            "ratio": self.ratio,
            "fit_score_before": self.fit_score_before,
            "fit_score_after": self.fit_score_after,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CompressionResult":
        return cls(
            task_id=data["task_id"],
            full_definition=data["full_definition"],
            compressed_definition=data["compressed_definition"],
            ratio=data["ratio"],
            fit_score_before=data["fit_score_before"],
            fit_score_after=data["fit_score_after"],
            steps=tuple(
                Step(
                    node_id=s["node_id"],
                    label=s["label"],
                    leaves_removed=tuple(s["leaves_removed"]),
                    candidate_score=s["candidate_score"],
                    accepted=s["accepted"],
                )
                for s in data["steps"]
            ),
        )


@dataclass(frozen=True)
class HoldoutReport:
    before: float
    after: float
    coverage: float

    def to_dict(self) -> dict:
        return {"before": self.before, "after": self.after, "coverage": self.coverage}


def _subtree_ids(node: ParseNode) -> set[int]:
    ids = {node.id}
    for child in node.children:
        ids |= _subtree_ids(child)
    return ids


def compress(
    task: Task,
    tree: ParseTree,
    fit: ExampleSet,
    backend: Backend,
    params: GenerationParams = GenerationParams(),
    cfg: StdcConfig = StdcConfig(),
    cache: ScoreCache | None = None,
    template: str = DEFAULT_TEMPLATE,
) -> CompressionResult:
    """Greedy top-down, layer-ordered removal of parse-tree subtrees.

    Traverses depths 2..Dep(T); within a depth, surviving nodes left to
    right. A candidate removal is accepted when its score is >= baseline -
    epsilon, where the baseline is the running compressed score ("current"
    mode) or the original full-definition score ("paper" mode). Accepted
    subtrees are skipped thereafter; the search stops after all leaf-node
    removals have been attempted.
    """
    if not fit.instance_ids:
        raise InvariantError("fit set must be non-empty")
    full_text = render(tree)
    if normalize(full_text) != normalize(task.definition):
        raise InvariantError(
            f"task {task.id}: rendered tree does not token-equal the definition"
        )

    def f(definition: str) -> float:
        return score(definition, task, fit, backend, params, cache, template).mean_score

    full_score = f(full_text)
    baseline = full_score
    current = tree
    removed_ids: set[int] = set()
    removed_leaf_ids: set[int] = set()
    steps: list[Step] = []

    for depth in range(2, tree.depth + 1):
        for node_id in nodes_at_depth(tree, depth):
            if node_id in removed_ids:
                continue
            node = tree.node(node_id)
            surviving_leaves = [lf for lf in node.leaves() if lf.id not in removed_leaf_ids]
            if not surviving_leaves:
                continue  # emptied by earlier removals; nothing left to try
            if cfg.baseline_mode == BASELINE_CURRENT:
                candidate_tree = remove_subtree(current, node_id)
            else:
                candidate_tree = remove_subtree(tree, node_id)
            candidate_score = f(render(candidate_tree))
            accepted = candidate_score >= baseline - cfg.epsilon
            steps.append(
                Step(
                    node_id=node_id,
                    label=node.label,
                    leaves_removed=tuple(lf.token for lf in surviving_leaves),
                    candidate_score=candidate_score,
                    accepted=accepted,
                )
            )
            if accepted:
                current = remove_subtree(current, node_id)
                removed_ids |= _subtree_ids(node)
                removed_leaf_ids |= {lf.id for lf in node.leaves()}
                if cfg.baseline_mode == BASELINE_CURRENT:
                    baseline = candidate_score

    compressed = render(current)
    if not compressed.strip() and not cfg.allow_empty_result:
        raise EmptyResultError(f"task {task.id}: compression emptied the definition")
    ratio = compression_ratio(full_text, compressed)
    return CompressionResult(
        task_id=task.id,
        full_definition=full_text,
        compressed_definition=compressed,
        ratio=ratio,
        fit_score_before=full_score,
        fit_score_after=f(compressed),
        steps=tuple(steps),
    )


def replay_removals(tree: ParseTree, accepted_node_ids: list[int]) -> str:
    """Re-apply an accepted removal list to the original tree."""
    current = tree
    for node_id in accepted_node_ids:
        current = remove_subtree(current, node_id)
    return render(current)


def evaluate_holdout(
    task: Task,
    result: CompressionResult,
    holdout: ExampleSet,
    backend: Backend,
    params: GenerationParams = GenerationParams(),
    cache: ScoreCache | None = None,
    template: str = DEFAULT_TEMPLATE,
    strict: bool = True,
) -> HoldoutReport:
    """Before/after means on the holdout set plus coverage: the fraction of
    instances whose per-instance score increases under compression
    (strictly, unless strict=False)."""
    before = score(result.full_definition, task, holdout, backend, params, cache, template)
    after = score(result.compressed_definition, task, holdout, backend, params, cache, template)
    pairs = list(zip(before.per_instance, after.per_instance))
    if strict:
        improved = sum(1 for b, a in pairs if a > b)
    else:
        improved = sum(1 for b, a in pairs if a >= b)
    return HoldoutReport(
        before=before.mean_score,
        after=after.mean_score,
        coverage=improved / len(pairs) if pairs else 0.0,
    )


_WORD = re.compile(r"[a-z0-9]+")


def _tokens_with_offsets(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(0), m.start(), m.end()) for m in _WORD.finditer(text.lower())]


def category_retention(
    task: Task,
    result: CompressionResult,
    ann: AnnotationSet,
) -> dict[str, tuple[int, int, float]]:
    """Per content category: (tokens before, tokens after, kept fraction).

    Tokens inside no annotated span are reported under the "unannotated"
    bucket. Only categories with at least one token are included.
    """
    report = validate_annotation(task, ann)
    if not report.ok:
        raise ValidationError("; ".join(report.problems))
    def_tokens = _tokens_with_offsets(task.definition)
    full_tokens = normalize(result.full_definition)
    if [t for t, _, _ in def_tokens] != full_tokens:
        raise InvariantError(
            f"task {task.id}: full definition does not token-align with the task definition"
        )
    # greedy subsequence alignment of the compressed tokens into the full stream
    compressed_tokens = normalize(result.compressed_definition)
    kept = [False] * len(full_tokens)
    pos = 0
    for tok in compressed_tokens:
        while pos < len(full_tokens) and full_tokens[pos] != tok:
            pos += 1
        if pos >= len(full_tokens):
            raise InvariantError(
                f"task {task.id}: compressed text is not a token subsequence of the full text"
            )
        kept[pos] = True
        pos += 1

    counts: dict[str, list[int]] = {}
    for i, (_, start, end) in enumerate(def_tokens):
        buckets = [
            span.category.value
            for span in ann.spans
            if span.start < end and start < span.end
        ]
        if not buckets:
            buckets = [UNANNOTATED]
        for bucket in set(buckets):
            before_n, after_n = counts.setdefault(bucket, [0, 0])
            counts[bucket][0] = before_n + 1
            counts[bucket][1] = after_n + (1 if kept[i] else 0)
    return {
        bucket: (before_n, after_n, after_n / before_n)
        for bucket, (before_n, after_n) in counts.items()
    }


def unannotated_share(task: Task, ann: AnnotationSet) -> float:
    """Fraction of definition tokens lying in no annotated span."""
    def_tokens = _tokens_with_offsets(task.definition)
    if not def_tokens:
        return 0.0
    uncovered = sum(
        1
        for _, start, end in def_tokens
        if not any(span.start < end and start < span.end for span in ann.spans)
    )
    return uncovered / len(def_tokens)
