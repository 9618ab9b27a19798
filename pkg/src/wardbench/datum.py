"""One training/eval item: past slice, category, query, reference, rubric."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .actionspaces import ActionSpace, Category
from .oracle.types import ClinicalQAPair, Rubric
from .splitter import SplitItem, split_item_from_json, split_item_to_json


@dataclass
class PomdpDatum:
    item: SplitItem
    category: Category
    qa: ClinicalQAPair
    rubric: Rubric

    @property
    def datum_id(self) -> str:
        return (
            f"{self.item.subject_id}-{self.item.hadm_id}"
            f"-s{self.item.spec.seed}-{self.category.value}"
        )

    @property
    def key(self) -> tuple[int, int, int, str]:
        return (self.item.subject_id, self.item.hadm_id, self.item.spec.seed, self.category.value)

    def to_json(self) -> dict[str, Any]:
        return {
            "datum_id": self.datum_id,
            "category": self.category.value,
            "item": split_item_to_json(self.item),
            "qa": self.qa.to_json(),
            "rubric": self.rubric.to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "PomdpDatum":
        return cls(
            item=split_item_from_json(doc["item"]),
            category=Category(doc["category"]),
            qa=ClinicalQAPair.from_dict(doc["qa"]),
            rubric=Rubric.from_json(doc["rubric"]),
        )

    @property
    def action_space(self) -> ActionSpace:
        return ActionSpace(self.category)
