import pytest

from defkit.annotations import AnnotationSet, ContentCategory, Span
from defkit.corpus import TaskKind
from defkit.errors import InvariantError, MissingSpanError
from defkit.parse import parse_bracketed
from defkit.triplet import (
    MetaTag,
    TripletDefinition,
    build_triplet,
    meta_tuning_instances,
    render_triplet,
)

from conftest import make_task

TASK6_DEF = "Given a statement, generate a question such that the answer is contained in that statement."
TASK6_TREE = (
    "(S (PP (VBN Given) (NP (DT a) (NN statement))) (, ,) "
    "(VP (VB generate) (NP (NP (DT a) (NN question)) "
    "(SBAR (JJ such) (IN that) (S (NP (DT the) (NN answer)) "
    "(VP (VBZ is) (VP (VBN contained) (PP (IN in) (NP (DT that) (NN statement))))))))) (. .))"
)

TASK1_DEF = (
    'You are given a review about a place. You need to provide a rating from '
    '"1 star" to "5 stars" for this place.'
)
TASK1_TREE = (
    "(S (NP (PRP You)) (VP (VBP are) (VP (VBN given) "
    "(NP (NP (DT a) (NN review)) (PP (IN about) (NP (DT a) (NN place)))))) (. .)) "
    "(S (NP (PRP You)) (VP (VBP need) (S (VP (TO to) (VP (VB provide) "
    "(NP (DT a) (NN rating) (PP (IN from) (NP (`` \") (CD 1) (NN star) ('' \"))) "
    "(PP (TO to) (NP (`` \") (CD 5) (NNS stars) ('' \")))) "
    "(PP (IN for) (NP (DT this) (NN place))))))) (. .))"
)


def task6():
    return make_task(
        task_id="task1580",
        definition=TASK6_DEF,
        kind=TaskKind.GENERATION,
        label_list=None,
    )


def task6_annotation():
    split = TASK6_DEF.index(",") + 1
    return AnnotationSet(
        "task1580",
        (
            Span(0, split, ContentCategory.INPUT_CONTENT),
            Span(split + 1, len(TASK6_DEF), ContentCategory.ACTION_CONTENT),
        ),
        "a1",
    )


class TestBuildTriplet:
    def test_task6_generation(self):
        trip = build_triplet(task6(), task6_annotation(), parse_bracketed(TASK6_TREE))
        assert trip.input_entry == "a statement"
        assert trip.action_entry == (
            "generate a question such that the answer is contained in that statement"
        )
        assert trip.output_entry == ("a question",)
        assert not trip.needs_review

    def test_task1_rating_phrase(self):
        task = make_task(
            task_id="task1292",
            definition=TASK1_DEF,
            kind=TaskKind.GENERATION,
            label_list=None,
        )
        boundary = TASK1_DEF.index(". ") + 1
        ann = AnnotationSet(
            "task1292",
            (
                Span(0, boundary, ContentCategory.INPUT_CONTENT),
                Span(boundary + 1, len(TASK1_DEF), ContentCategory.ACTION_CONTENT),
            ),
            "a1",
        )
        trip = build_triplet(task, ann, parse_bracketed(TASK1_TREE))
        assert trip.input_entry == "a review about a place"
        assert trip.output_entry == ('a rating from "1 star" to "5 stars"',)

    def test_classification_labels_first(self, review_task, review_annotation):
        # add a label-definition span over the final sentence
        tree = parse_bracketed(
            "(S (NP (PRP You)) (VP (VBP are) (VP (VBN given) (NP (DT a) (NN review)))) (. .)) "
            "(S (VP (VB Classify) (NP (PRP it))) (. .)) "
            "(S (NP (DT The) (NNS labels)) (VP (VBP are) (ADJP (JJ positive) (CC and) (JJ negative))) (. .))"
        )
        spans = review_annotation.spans + (
            Span(37, 74, ContentCategory.LABEL_DEFINITION),
        )
        # replace the original label_list span to avoid a cross-category overlap
        ann = AnnotationSet(
            review_task.id,
            (review_annotation.spans[0], review_annotation.spans[1], spans[-1]),
            "a1",
        )
        trip = build_triplet(review_task, ann, tree)
        assert trip.output_entry[0] == "positive, negative"
        assert trip.output_entry[1] == "The labels are positive and negative"

    def test_missing_action_span(self):
        task = task6()
        ann = AnnotationSet(task.id, (Span(0, 18, ContentCategory.INPUT_CONTENT),), "a1")
        with pytest.raises(MissingSpanError):
            build_triplet(task, ann, parse_bracketed(TASK6_TREE))

    def test_unalignable_tree_falls_back(self):
        task = task6()
        wrong_tree = parse_bracketed("(S (NN zebra) (NN xylophone))")
        trip = build_triplet(task, task6_annotation(), wrong_tree)
        assert trip.needs_review
        assert trip.input_entry == "Given a statement,"

    def test_no_token_invented(self):
        trip = build_triplet(task6(), task6_annotation(), parse_bracketed(TASK6_TREE))
        for entry in (trip.input_entry, trip.action_entry, *trip.output_entry):
            for token in entry.split():
                assert token in TASK6_DEF


class TestRenderTriplet:
    def test_task6_frame(self):
        trip = build_triplet(task6(), task6_annotation(), parse_bracketed(TASK6_TREE))
        assert render_triplet(trip) == (
            "Task input: a statement. "
            "Task action: generate a question such that the answer is contained in that statement. "
            "Task output: a question"
        )

    def test_singleton_output_join(self):
        trip = TripletDefinition("t", "x", "do y", ("Yes, No",))
        assert render_triplet(trip).endswith("Task output: Yes, No")

    def test_round_trip_markers(self):
        trip = TripletDefinition("t", "an input", "an action", ("out a", "out b"))
        rendered = render_triplet(trip)
        for marker in ("Task input: ", "Task action: ", "Task output: "):
            assert rendered.count(marker) == 1
        head, rest = rendered.split(". Task action: ")
        action, output = rest.split(". Task output: ")
        assert head == "Task input: an input"
        assert action == "an action"
        assert output == "out a; out b"


class TestMetaTuning:
    def test_three_instances_with_targets(self):
        task = task6()
        trip = build_triplet(task, task6_annotation(), parse_bracketed(TASK6_TREE))
        instances = meta_tuning_instances(task, trip)
        assert len(instances) == 3
        assert [i.tag for i in instances] == [
            MetaTag.TASK_INPUT,
            MetaTag.TASK_ACTION,
            MetaTag.TASK_OUTPUT,
        ]
        assert instances[0].target == "a statement"
        rendered = render_triplet(trip)
        assert all(i.target in rendered for i in instances)

    def test_source_frame(self):
        task = task6()
        trip = TripletDefinition(task.id, "a", "b", ("c",))
        inst = meta_tuning_instances(task, trip)[0]
        assert inst.source == (
            "Generate segments of task definitions based on the tag and two examples. "
            "<Task input>. "
            "Input: demo input one Output: demo output one. "
            "Input: demo input two Output: demo output two"
        )

    def test_split_outputs_flag(self):
        task = task6()
        trip = TripletDefinition(task.id, "a", "b", ("c", "d"))
        joined = meta_tuning_instances(task, trip)
        assert joined[-1].target == "c; d"
        split = meta_tuning_instances(task, trip, split_outputs=True)
        assert [i.target for i in split if i.tag is MetaTag.TASK_OUTPUT] == ["c", "d"]

    def test_tags_balanced_across_tasks(self):
        task = task6()
        trip = TripletDefinition(task.id, "a", "b", ("c",))
        instances = meta_tuning_instances(task, trip) + meta_tuning_instances(task, trip)
        counts = {tag: sum(1 for i in instances if i.tag is tag) for tag in MetaTag}
        assert counts == {MetaTag.TASK_INPUT: 2, MetaTag.TASK_ACTION: 2, MetaTag.TASK_OUTPUT: 2}
