"""Pure reward arithmetic: the rubric reward and auxiliary structural rewards.

The rubric reward is clip_[0,1](sum of points for met criteria / sum of
positive points): negative criteria can drag the score down but never raise
the ceiling.  Structural rewards check the think/answer envelope, partial
tag credit, step markers, and n-gram repetition.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Any

from .oracle.types import NoPositiveCriteria, Rubric, VerdictVector


class Family(str, Enum):
    ANSWER_WRAPPER = "answer-wrapper"
    THINK_THEN_TEXT = "think-then-text"
    HEADERS = "headers"
    JSON_FIELDS = "json-fields"


@dataclass
class CompletionParse:
    think: str | None
    answer: str | None
    family: Family


@dataclass
class RewardBreakdown:
    r_rub: float
    r_format: float
    r_tag: float
    r_steps: float | None
    r_rep: float | None
    r_total: float

    def to_json(self) -> dict[str, Any]:
        return {
            "r_rub": self.r_rub,
            "r_format": self.r_format,
            "r_tag": self.r_tag,
            "r_steps": self.r_steps,
            "r_rep": self.r_rep,
            "r_total": self.r_total,
        }


@dataclass(frozen=True)
class RewardProfile:
    name: str
    family: Family = Family.THINK_THEN_TEXT
    include_steps: bool = False
    include_repetition: bool = False
    rep_n: int = 3
    rep_lambda: float = 1.0


CANONICAL = RewardProfile(name="canonical")
ANCHOR_1_5B = RewardProfile(name="anchor-1.5B", include_steps=True, include_repetition=True)

PROFILES = {p.name: p for p in (CANONICAL, ANCHOR_1_5B)}


def profile_named(name: str, family: Family | str | None = None) -> RewardProfile:
    base = PROFILES.get(name)
    if base is None:
        raise ValueError(f"unknown reward profile {name!r}")
    if family is None:
        return base
    fam = Family(family)
    return RewardProfile(
        name=base.name,
        family=fam,
        include_steps=base.include_steps,
        include_repetition=base.include_repetition,
        rep_n=base.rep_n,
        rep_lambda=base.rep_lambda,
    )


def compute_rubric_score(rubric: Rubric, verdicts: VerdictVector) -> float:
    """clip_[0,1]( sum of points over true verdicts / sum of positive points )."""
    if set(verdicts.verdicts) != set(rubric.ids):
        raise ValueError("verdict key set must equal the rubric id set")
    positive = sum(c.points for c in rubric.criteria if c.points > 0)
    if positive <= 0:
        raise NoPositiveCriteria("rubric has no positive-point criteria")
    earned = sum(c.points for c in rubric.criteria if verdicts.verdicts[c.id])
    return min(1.0, max(0.0, earned / positive))


WRAPPER_FORMAT_RE = re.compile(r"^<think>.*?</think>.*?<answer>.*?</answer>$", re.DOTALL)
# DOTALL so a multi-line think block still counts as well-formed
THINK_TEXT_FORMAT_RE = re.compile(r"^\s*<think>\s*.*?\s*</think>\s*(\S[\s\S]*)$", re.DOTALL)


def format_reward(completion: str, family: Family | str) -> float:
    family = Family(family)
    if family is Family.ANSWER_WRAPPER:
        return 1.0 if WRAPPER_FORMAT_RE.match(completion) else 0.0
    if family is Family.THINK_THEN_TEXT:
        m = THINK_TEXT_FORMAT_RE.match(completion)
        if m and not m.group(1).startswith("<think>"):
            return 1.0
        return 0.0
    raise ValueError(f"format reward undefined for family {family.value}")


def _count(completion: str, tag: str) -> int:
    return completion.count(tag)


def tag_reward(completion: str, family: Family | str) -> float:
    """Partial credit for well-formed scaffolding tags (literal substring counts)."""
    family = Family(family)
    if family is Family.ANSWER_WRAPPER:
        return sum(
            0.25
            for tag in ("<think>", "</think>", "<answer>", "</answer>")
            if _count(completion, tag) == 1
        )
    if family is Family.THINK_THEN_TEXT:
        score = 0.0
        if _count(completion, "<think>") == 1:
            score += 0.4
        if _count(completion, "</think>") == 1:
            score += 0.4
        if _count(completion, "</think>") >= 1:
            trailing = completion.split("</think>", 1)[1].strip()
            if trailing and not trailing.startswith("<think>"):
                score += 0.2
        return round(score, 10)
    raise ValueError(f"tag reward undefined for family {family.value}")


# step markers: numbered steps, ordinal lists, bullets, transition words
STEP_MARKER_PATTERNS = (
    re.compile(r"Step\s*\d+[:.]"),
    re.compile(r"^\s*\d+[.)]", re.MULTILINE),
    re.compile(r"^\s*[-*•]", re.MULTILINE),
    re.compile(r"\b(first|second|third|next|then|finally)\b", re.IGNORECASE),
)


def steps_reward(think: str) -> float:
    """min(1, k/3) where k counts step-marker matches inside the think block."""
    k = sum(len(p.findall(think)) for p in STEP_MARKER_PATTERNS)
    return min(1.0, k / 3.0)


def repetition_penalty(completion: str, n: int = 3, lam: float = 1.0) -> float:
    """-lambda * (1 - unique n-grams / total n-grams); 0 when no n-grams exist."""
    tokens = completion.split()
    if len(tokens) < n:
        return 0.0
    grams = list(zip(*(tokens[i:] for i in range(n))))
    return -lam * (1.0 - len(set(grams)) / len(grams))


def parse_completion(completion: str, family: Family | str) -> CompletionParse:
    family = Family(family)
    if family is Family.ANSWER_WRAPPER:
        think = _first_block(completion, "think")
        answer = _first_block(completion, "answer")
        return CompletionParse(think=think, answer=answer, family=family)
    if family is Family.THINK_THEN_TEXT:
        think = _first_block(completion, "think")
        answer = completion.split("</think>", 1)[1].strip() if "</think>" in completion else None
        return CompletionParse(think=think, answer=answer, family=family)
    if family is Family.HEADERS:
        m = re.search(r"##\s*Thinking\s*\n(.*?)(?=##\s*Final Response|\Z)", completion, re.DOTALL)
        a = re.search(r"##\s*Final Response\s*\n(.*)", completion, re.DOTALL)
        return CompletionParse(
            think=m.group(1).strip() if m else None,
            answer=a.group(1).strip() if a else None,
            family=family,
        )
    if family is Family.JSON_FIELDS:
        import json

        try:
            doc = json.loads(completion)
            return CompletionParse(
                think=doc.get("answer_reasoning"), answer=doc.get("final_answer"), family=family
            )
        except (json.JSONDecodeError, AttributeError):
            return CompletionParse(think=None, answer=None, family=family)
    raise ValueError(family)


def _first_block(text: str, tag: str) -> str | None:
    m = re.search(rf"<{tag}>(.*?)</{tag}>", text, re.DOTALL)
    return m.group(1).strip() if m else None


def reward_stack(
    completion: str,
    rubric: Rubric,
    verdicts: VerdictVector,
    profile: RewardProfile | str = CANONICAL,
) -> RewardBreakdown:
    """Compose the reward components for one completion under a profile."""
    if isinstance(profile, str):
        profile = profile_named(profile)
    r_rub = 0.0 if verdicts.degenerate else compute_rubric_score(rubric, verdicts)
    r_format = format_reward(completion, profile.family)
    r_tag = tag_reward(completion, profile.family)
    r_steps = None
    r_rep = None
    total = r_rub + r_format + r_tag
    if profile.include_steps:
        parse = parse_completion(completion, profile.family)
        r_steps = steps_reward(parse.think or "")
        total += r_steps
    if profile.include_repetition:
        r_rep = repetition_penalty(completion, n=profile.rep_n, lam=profile.rep_lambda)
        total += r_rep
    return RewardBreakdown(
        r_rub=r_rub, r_format=r_format, r_tag=r_tag, r_steps=r_steps, r_rep=r_rep, r_total=total
    )
