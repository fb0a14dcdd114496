"""Rouge-L scoring, All/Cls./Gen. aggregation, and the heuristic baseline."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Instance, Task, TaskKind
from .errors import EmptyReferenceListError

_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def normalize(text: str) -> list[str]:
    """Lowercase, map every non-alphanumeric character to a space, split."""
    return _NON_ALNUM.sub(" ", text.lower()).split()


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence of two token sequences."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, references: Sequence[str]) -> float:
    """Rouge-L F1 of a candidate against references; max over references.

    Per reference: P = LCS/|cand|, R = LCS/|ref|, F1 = 2PR/(P+R), with 0
    when either side is empty or P+R = 0.
    """
    if not references:
        raise EmptyReferenceListError("rouge_l: references must be non-empty")
    cand = normalize(candidate)
    best = 0.0
    for reference in references:
        ref = normalize(reference)
        if not cand or not ref:
            continue
        lcs = lcs_length(cand, ref)
        p = lcs / len(cand)
        r = lcs / len(ref)
        if p + r > 0:
            best = max(best, 2 * p * r / (p + r))
    return best


@dataclass(frozen=True)
class ScoreReport:
    per_task: dict[str, float]
    n_instances: dict[str, int]
    overall: float
    cls_mean: float
    gen_mean: float
    micro: float

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "cls": self.cls_mean,
            "gen": self.gen_mean,
            "per_task": dict(self.per_task),
            "n_instances": dict(self.n_instances),
        }


def aggregate(rows: Iterable[tuple[str, TaskKind, float]]) -> ScoreReport:
    """Per-task instance means, then unweighted macro means over tasks.

    Classification tasks feed cls_mean only, generation tasks gen_mean only.
    The micro mean (over all instances) is carried along for verbose output.
    """
    scores: dict[str, list[float]] = {}
    kinds: dict[str, TaskKind] = {}
    all_scores: list[float] = []
    for task_id, kind, score in rows:
        scores.setdefault(task_id, []).append(score)
        kinds[task_id] = kind
        all_scores.append(score)
    per_task = {tid: sum(v) / len(v) for tid, v in scores.items()}
    n_instances = {tid: len(v) for tid, v in scores.items()}
    means = list(per_task.values())
    cls = [per_task[t] for t in per_task if kinds[t] is TaskKind.CLASSIFICATION]
    gen = [per_task[t] for t in per_task if kinds[t] is TaskKind.GENERATION]
    return ScoreReport(
        per_task=per_task,
        n_instances=n_instances,
        overall=sum(means) / len(means) if means else 0.0,
        cls_mean=sum(cls) / len(cls) if cls else 0.0,
        gen_mean=sum(gen) / len(gen) if gen else 0.0,
        micro=sum(all_scores) / len(all_scores) if all_scores else 0.0,
    )


def heuristic_predict(task: Task, instance: Instance, seed: int) -> str:
    """Lower-bound baseline: copy the input (generation) or pick a seeded
    uniform label (classification), deterministic per (seed, task, instance)."""
    if task.kind is TaskKind.GENERATION:
        return instance.input
    rng = random.Random(f"{seed}:{task.id}:{instance.id}")
    return rng.choice(list(task.label_list))
