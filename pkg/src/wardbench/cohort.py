"""Greedy set-cover training-cohort selection and disjoint test sampling.

Each admission is reduced to a set of categorical cover tokens (coded
diagnoses, gender, binned age/height/weight).  Training admissions are chosen
by the classic greedy cover over the token universe; the test split is a
seeded 20% sample of the remainder, admission-wise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np

from .timeline import AdmissionTimeline

AGE_BIN_YEARS = 10
HEIGHT_BIN_CM = 10
WEIGHT_BIN_KG = 10
TEST_FRACTION = 0.2
DEFAULT_SEED = 42


class TokenKind(str, Enum):
    ICD = "ICD"
    GENDER = "Gender"
    AGE_BIN = "AgeBin"
    HEIGHT_BIN = "HeightBin"
    WEIGHT_BIN = "WeightBin"


@dataclass(frozen=True)
class CoverToken:
    kind: TokenKind
    value: str

    def __post_init__(self) -> None:
        if not self.value:
            raise ValueError("cover token value must be non-empty")

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.value}"


@dataclass
class CohortSplit:
    train: set[tuple[int, int]] = field(default_factory=set)
    test: set[tuple[int, int]] = field(default_factory=set)
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.train & self.test:
            raise ValueError("train and test must be disjoint")


def _icd_token(entry) -> CoverToken | None:
    if not isinstance(entry, dict):
        return None
    code = entry.get("icd_code") or entry.get("code")
    ver = entry.get("icd_version") or entry.get("version")
    if code is None:
        return None
    ver = "" if ver is None else str(ver)
    return CoverToken(TokenKind.ICD, f"{code}--{ver}")


def _numeric(value) -> float | None:
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def _latest_measurement(t: AdmissionTimeline, needle: str) -> float | None:
    """Latest chart/OMR-style event carrying a key or label containing `needle`."""
    found: float | None = None
    for ev in t.timeline:  # ascending, so later events overwrite
        for record in (ev.data, ev.descriptions):
            if not isinstance(record, dict):
                continue
            label = str(record.get("label", "")).lower()
            result_name = str(record.get("result_name", "")).lower()
            if needle in label or needle in result_name:
                v = _numeric(record.get("value") or record.get("valuenum") or record.get("result_value"))
                if v is not None:
                    found = v
                    continue
            for k, v in record.items():
                if needle in str(k).lower():
                    num = _numeric(v)
                    if num is not None:
                        found = num
    return found


def tokenize_admission(t: AdmissionTimeline) -> set[CoverToken]:
    """Cover tokens for one admission; missing fields simply yield fewer tokens."""
    tokens: set[CoverToken] = set()
    for entry in t.misc.get("ICD_Diagnoses", []) or []:
        tok = _icd_token(entry)
        if tok is not None:
            tokens.add(tok)
    gender = t.demographics.get("gender")
    if gender:
        tokens.add(CoverToken(TokenKind.GENDER, str(gender)))
    age = _numeric(t.demographics.get("anchor_age"))
    if age is not None:
        tokens.add(CoverToken(TokenKind.AGE_BIN, str(int(age // AGE_BIN_YEARS) * AGE_BIN_YEARS)))
    height = _latest_measurement(t, "height")
    if height is not None:
        tokens.add(CoverToken(TokenKind.HEIGHT_BIN, str(int(height // HEIGHT_BIN_CM) * HEIGHT_BIN_CM)))
    weight = _latest_measurement(t, "weight")
    if weight is not None:
        tokens.add(CoverToken(TokenKind.WEIGHT_BIN, str(int(weight // WEIGHT_BIN_KG) * WEIGHT_BIN_KG)))
    return tokens


def greedy_set_cover(corpus: list[AdmissionTimeline]) -> set[tuple[int, int]]:
    """Select admissions that cover the token universe, largest gain first.

    Ties are broken by the smallest (subject_id, hadm_id) so replays are
    deterministic.
    """
    if not corpus:
        raise ValueError("corpus must be non-empty")
    token_sets = {t.key: tokenize_admission(t) for t in corpus}
    universe: set[CoverToken] = set().union(*token_sets.values()) if token_sets else set()
    selected: set[tuple[int, int]] = set()
    while universe:
        best_key = None
        best_gain = -1
        for key in sorted(token_sets):
            if key in selected:
                continue
            gain = len(token_sets[key] & universe)
            if gain > best_gain:
                best_gain = gain
                best_key = key
        if best_key is None or best_gain <= 0:
            break  # unreachable while universe is drawn from the corpus
        selected.add(best_key)
        universe -= token_sets[best_key]
    return selected


def replay_cover(corpus: list[AdmissionTimeline]) -> list[tuple[tuple[int, int], int]]:
    """The greedy trajectory: (selected key, newly covered count) per step."""
    token_sets = {t.key: tokenize_admission(t) for t in corpus}
    universe: set[CoverToken] = set().union(*token_sets.values()) if token_sets else set()
    steps: list[tuple[tuple[int, int], int]] = []
    selected: set[tuple[int, int]] = set()
    while universe:
        gains = {
            key: len(tokens & universe)
            for key, tokens in token_sets.items()
            if key not in selected
        }
        best_key = min(k for k, g in gains.items() if g == max(gains.values()))
        steps.append((best_key, gains[best_key]))
        selected.add(best_key)
        universe -= token_sets[best_key]
    return steps


def brute_force_min_cover(corpus: list[AdmissionTimeline]) -> set[tuple[int, int]] | None:
    """Exhaustive minimum cover; exponential, for small oracle corpora only."""
    token_sets = {t.key: tokenize_admission(t) for t in corpus}
    universe: set[CoverToken] = set().union(*token_sets.values()) if token_sets else set()
    keys = sorted(token_sets)
    for size in range(0, len(keys) + 1):
        for combo in combinations(keys, size):
            covered: set[CoverToken] = set()
            for k in combo:
                covered |= token_sets[k]
            if covered >= universe:
                return set(combo)
    return None


def sample_test_split(
    corpus: list[AdmissionTimeline],
    train: set[tuple[int, int]],
    seed: int = DEFAULT_SEED,
) -> CohortSplit:
    """Seeded uniform 20% (floor) sample of the remainder, admission-wise."""
    keys = {t.key for t in corpus}
    if not train <= keys:
        raise ValueError("train keys must be a subset of the corpus")
    remainder = sorted(keys - train)
    n_test = int(len(remainder) * TEST_FRACTION)
    rng = np.random.Generator(np.random.PCG64(seed))
    if n_test and remainder:
        picked = rng.choice(len(remainder), size=n_test, replace=False)
        test = {remainder[i] for i in picked}
    else:
        test = set()
    return CohortSplit(train=set(train), test=test, seed=seed)
