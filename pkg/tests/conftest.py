import json

import pytest

from defkit.annotations import AnnotationSet, ContentCategory, Span
from defkit.corpus import Demonstration, Instance, Task, TaskKind
from defkit.parse import parse_bracketed


def make_task(
    task_id="task000",
    definition="Classify the text.",
    kind=TaskKind.CLASSIFICATION,
    label_list=("Yes", "No"),
    n_instances=3,
    references=None,
    inputs=None,
    category="Text Categorization",
    domains=("News",),
    reasoning_types=("Deductive",),
):
    demos = (
        Demonstration(input="demo input one", output="demo output one"),
        Demonstration(input="demo input two", output="demo output two"),
    )
    instances = []
    for i in range(n_instances):
        refs = references[i] if references is not None else [f"ref {i}"]
        instances.append(
            Instance(
                id=f"inst{i}",
                input=inputs[i] if inputs is not None else f"input {i}",
                references=tuple(refs),
            )
        )
    return Task(
        id=task_id,
        name=task_id,
        definition=definition,
        category=category,
        domains=tuple(domains),
        reasoning_types=tuple(reasoning_types),
        kind=kind,
        label_list=tuple(label_list) if label_list is not None else None,
        demonstrations=demos,
        instances=tuple(instances),
    )


REVIEW_DEFINITION = "You are given a review. Classify it. The labels are positive and negative."


@pytest.fixture
def review_task():
    return make_task(
        task_id="task_review",
        definition=REVIEW_DEFINITION,
        kind=TaskKind.CLASSIFICATION,
        label_list=("positive", "negative"),
    )


@pytest.fixture
def review_annotation():
    # "You are given a review." / "Classify it." / "The labels are positive and negative."
    assert REVIEW_DEFINITION[0:23] == "You are given a review."
    assert REVIEW_DEFINITION[24:36] == "Classify it."
    assert REVIEW_DEFINITION[37:74] == "The labels are positive and negative."
    return AnnotationSet(
        task_id="task_review",
        annotator="a1",
        spans=(
            Span(0, 23, ContentCategory.INPUT_CONTENT),
            Span(24, 36, ContentCategory.ACTION_CONTENT),
            Span(37, 74, ContentCategory.LABEL_LIST),
        ),
    )


FOX_TREE_TEXT = (
    "(S (NP (DT the) (JJ quick) (NN fox)) "
    "(VP (VBZ classifies) (NP (NNS reviews))))"
)


@pytest.fixture
def fox_tree():
    return parse_bracketed(FOX_TREE_TEXT)


@pytest.fixture
def fox_task():
    return make_task(
        task_id="task_fox",
        definition="the quick fox classifies reviews",
        kind=TaskKind.GENERATION,
        label_list=None,
        n_instances=4,
        references=[["review summary one"], ["review summary two"], ["three"], ["four"]],
    )


def write_task_file(path, task):
    path.write_text(json.dumps(task.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path
