"""Annotated-ablation variants and the Shuffled/Metadata baseline definitions."""

from __future__ import annotations

import enum
import logging
import random
import re
from dataclasses import dataclass

from .annotations import AnnotationSet, ContentCategory, validate_annotation
from .corpus import Task, TaskKind
from .errors import EmptyDefinitionError, InvariantError, ValidationError

logger = logging.getLogger(__name__)


class AblationName(enum.Enum):
    INPUT_ADD = "input_add"
    OUTPUT_ADD = "output_add"
    ALL_ADD = "all_add"
    LABEL_LIST = "label_list"
    LABEL_DESC = "label_desc"
    ALL_LABEL = "all_label"
    ALL_OUTPUT = "all_output"
    ALL_INPUT = "all_input"


REMOVED_CATEGORIES: dict[AblationName, frozenset[ContentCategory]] = {
    AblationName.INPUT_ADD: frozenset({ContentCategory.ADDITIONAL_INPUT_DETAILS}),
    AblationName.OUTPUT_ADD: frozenset({ContentCategory.ADDITIONAL_OUTPUT_DETAILS}),
    AblationName.ALL_ADD: frozenset(
        {ContentCategory.ADDITIONAL_INPUT_DETAILS, ContentCategory.ADDITIONAL_OUTPUT_DETAILS}
    ),
    AblationName.LABEL_LIST: frozenset({ContentCategory.LABEL_LIST}),
    AblationName.LABEL_DESC: frozenset({ContentCategory.LABEL_DEFINITION}),
    AblationName.ALL_LABEL: frozenset(
        {ContentCategory.LABEL_LIST, ContentCategory.LABEL_DEFINITION}
    ),
    AblationName.ALL_OUTPUT: frozenset(
        {
            ContentCategory.OUTPUT_CONTENT,
            ContentCategory.ADDITIONAL_OUTPUT_DETAILS,
            ContentCategory.LABEL_LIST,
            ContentCategory.LABEL_DEFINITION,
        }
    ),
    AblationName.ALL_INPUT: frozenset(
        {ContentCategory.INPUT_CONTENT, ContentCategory.ADDITIONAL_INPUT_DETAILS}
    ),
}


@dataclass(frozen=True)
class AblationSpec:
    name: AblationName

    @property
    def removed_categories(self) -> frozenset[ContentCategory]:
        return REMOVED_CATEGORIES[self.name]


@dataclass(frozen=True)
class AblatedDefinition:
    task_id: str
    spec_name: str
    text: str
    tokens_kept: int
    tokens_full: int

    @property
    def ratio(self) -> float:
        return self.tokens_kept / self.tokens_full if self.tokens_full else 0.0


def apply_ablation(task: Task, ann: AnnotationSet, spec: AblationSpec) -> AblatedDefinition:
    """Delete every annotated span of the spec's categories from the definition.

    InputMention spans are deleted only when their enclosing ActionContent
    span is deleted. Whitespace is collapsed afterwards; token counts are
    over whitespace tokens of the raw text.
    """
    report = validate_annotation(task, ann)
    if not report.ok:
        raise ValidationError("; ".join(report.problems))
    removed = spec.removed_categories
    delete: list[tuple[int, int]] = []
    deleted_actions = []
    for span in ann.spans:
        if span.category in removed and span.category is not ContentCategory.INPUT_MENTION:
            delete.append((span.start, span.end))
            if span.category is ContentCategory.ACTION_CONTENT:
                deleted_actions.append(span)
    if ContentCategory.INPUT_MENTION in removed:
        for span in ann.by_category(ContentCategory.INPUT_MENTION):
            if any(a.start <= span.start and span.end <= a.end for a in deleted_actions):
                delete.append((span.start, span.end))

    text = task.definition
    deleted_mask = [False] * len(text)
    for start, end in delete:
        for i in range(start, end):
            deleted_mask[i] = True
    kept_raw = "".join(c for i, c in enumerate(text) if not deleted_mask[i])
    kept = re.sub(r"\s+", " ", kept_raw).strip()
    return AblatedDefinition(
        task_id=task.id,
        spec_name=spec.name.value,
        text=kept,
        tokens_kept=len(kept.split()),
        tokens_full=len(text.split()),
    )


def shuffle_definition(text: str, seed: int) -> str:
    """Seeded Fisher-Yates shuffle of whitespace tokens."""
    tokens = text.split()
    rng = random.Random(seed)
    for i in range(len(tokens) - 1, 0, -1):
        j = rng.randrange(i + 1)
        tokens[i], tokens[j] = tokens[j], tokens[i]
    return " ".join(tokens)


def build_metadata_definition(task: Task) -> str:
    """Fixed metadata template replacing the definition.

    The label slot becomes "generate free text" for generation tasks.
    """
    if task.kind is TaskKind.CLASSIFICATION and not task.label_list:
        raise InvariantError(f"task {task.id}: classification without label_list")
    for slot, value in (("reasoning type", task.reasoning_types), ("domain", task.domains)):
        if not value:
            logger.warning("task %s: empty %s slot in metadata definition", task.id, slot)
    if not task.category:
        logger.warning("task %s: empty category slot in metadata definition", task.id)
    labels = (
        "generate free text"
        if task.kind is TaskKind.GENERATION
        else ", ".join(task.label_list)
    )
    return (
        f"Category: {task.category}. "
        f"Reasoning type: {', '.join(task.reasoning_types)}. "
        f"Domain: {', '.join(task.domains)}. "
        f"Label list: {labels}"
    )


def compression_ratio(full_text: str, kept_text: str) -> float:
    """Fraction of whitespace tokens of the full definition that remain."""
    n_full = len(full_text.split())
    n_kept = len(kept_text.split())
    if n_full == 0:
        raise EmptyDefinitionError("full definition has no tokens")
    if n_kept > n_full:
        raise InvariantError(f"kept tokens ({n_kept}) exceed full tokens ({n_full})")
    return n_kept / n_full
