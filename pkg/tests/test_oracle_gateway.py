from __future__ import annotations

import json

import pytest

from wardbench.actionspaces import ActionSpace, Category
from wardbench.oracle import (
    AxisCoverageMissing,
    ClinicalQAPair,
    DeterministicOracleBackend,
    EndpointUnavailable,
    FutureLeakDetected,
    OracleConfig,
    OracleGateway,
    Rubric,
    SchemaViolation,
    ScriptedBackend,
    SourceNotInFuture,
    VerdictVector,
    fallback_rubric,
    is_degenerate,
    parse_rubric_response,
)
from wardbench.oracle.backends import ReplayBackend, TransientBackendError, request_hash
from wardbench.splitter import SplitSpec, build_split_item
from wardbench.oracle.types import Axis, Criterion

from conftest import iso, make_admission


@pytest.fixture
def item():
    adm = make_admission(n_events=6)
    return build_split_item(adm, SplitSpec(n=6, k=3, split_time=adm.timeline[3].time, seed=0))


def cfg_fast(**kwargs) -> OracleConfig:
    return OracleConfig(backoff_base=0.0, **kwargs)


def qa_payload(time: str) -> str:
    return json.dumps(
        {
            "question": "What next?",
            "final_answer": "Escalate care.",
            "answer_reasoning": "The labs trend worsens.",
            "action_space_category": "Diagnosis",
            "action_space_subcategory": None,
            "source": [{"event": "transfer to ICU", "time": time, "source": "transfers"}],
        }
    )


def rubric_payload(axes=None, extra=None) -> str:
    axes = axes or ["Accuracy", "Completeness", "CommunicationQuality", "ContextAwareness", "InstructionFollowing"]
    criteria = [
        {"axis": a, "description": f"crit {i} about {a}", "points": 5} for i, a in enumerate(axes)
    ]
    criteria.extend(extra or [])
    return json.dumps({"meta": {"theme": "Health Data Tasks"}, "criteria": criteria})


class TestGenerateQa:
    def test_valid_pair_accepted(self, item):
        backend = ScriptedBackend([qa_payload(item.future[0].time)])
        gw = OracleGateway(backend, cfg_fast())
        qa = gw.generate_qa(item, ActionSpace(Category.DIAGNOSIS))
        assert qa.question == "What next?"
        assert len(qa.source) == 1

    def test_source_before_split_rejected(self, item):
        early = item.past[0].time
        backend = ScriptedBackend([qa_payload(early)] * 3)
        gw = OracleGateway(backend, cfg_fast())
        with pytest.raises(SourceNotInFuture):
            gw.generate_qa(item, ActionSpace(Category.DIAGNOSIS))

    def test_source_after_future_end_rejected(self, item):
        backend = ScriptedBackend([qa_payload(iso(10_000))] * 3)
        gw = OracleGateway(backend, cfg_fast())
        with pytest.raises(SourceNotInFuture):
            gw.generate_qa(item, ActionSpace(Category.DIAGNOSIS))

    def test_two_failures_then_success(self, item):
        backend = ScriptedBackend(
            [TransientBackendError("down"), TransientBackendError("down"), qa_payload(item.future[0].time)]
        )
        gw = OracleGateway(backend, cfg_fast())
        qa = gw.generate_qa(item, ActionSpace(Category.DIAGNOSIS))
        assert qa.final_answer
        assert gw.retry_count == 2

    def test_endpoint_unavailable_after_retries(self, item):
        backend = ScriptedBackend([TransientBackendError("down")] * 3)
        gw = OracleGateway(backend, cfg_fast())
        with pytest.raises(EndpointUnavailable):
            gw.generate_qa(item, ActionSpace(Category.DIAGNOSIS))
        assert len(backend.calls) == 3

    def test_empty_source_rejected(self, item):
        doc = json.loads(qa_payload(item.future[0].time))
        doc["source"] = []
        backend = ScriptedBackend([json.dumps(doc)] * 3)
        gw = OracleGateway(backend, cfg_fast())
        with pytest.raises(SchemaViolation):
            gw.generate_qa(item, ActionSpace(Category.DIAGNOSIS))

    def test_prompt_carries_category_and_windows(self, item):
        backend = ScriptedBackend([qa_payload(item.future[0].time)])
        gw = OracleGateway(backend, cfg_fast())
        gw.generate_qa(item, ActionSpace(Category.UNCERTAINTY))
        prompt = backend.calls[0]["messages"][0]["content"]
        assert "Responding under Uncertainty" in prompt
        assert "PAST DATA:" in prompt and "FUTURE DATA:" in prompt
        assert item.past[0].time in prompt and item.future[-1].time in prompt
        assert backend.calls[0]["temperature"] == 1.0
        assert backend.calls[0]["top_p"] == 0.95
        assert backend.calls[0]["top_k"] == 64


class TestGenerateRubric:
    def test_valid_rubric_all_axes(self, item):
        qa = ClinicalQAPair.from_dict(json.loads(qa_payload(item.future[0].time)))
        gw = OracleGateway(ScriptedBackend([rubric_payload()]), cfg_fast())
        rubric = gw.generate_rubric(item, qa)
        assert len(rubric.criteria) == 5
        assert rubric.ids == [f"c{i}" for i in range(1, 6)]

    def test_missing_axis_rejected(self, item):
        qa = ClinicalQAPair.from_dict(json.loads(qa_payload(item.future[0].time)))
        payload = rubric_payload(axes=["Accuracy", "Completeness", "CommunicationQuality", "ContextAwareness"])
        gw = OracleGateway(ScriptedBackend([payload] * 3), cfg_fast())
        with pytest.raises(AxisCoverageMissing):
            gw.generate_rubric(item, qa)

    def test_duplicate_criteria_deduplicated(self, item):
        qa = ClinicalQAPair.from_dict(json.loads(qa_payload(item.future[0].time)))
        extra = [{"axis": "Accuracy", "description": "crit 0 about Accuracy", "points": 5}]
        gw = OracleGateway(ScriptedBackend([rubric_payload(extra=extra)]), cfg_fast())
        rubric = gw.generate_rubric(item, qa)
        # oracle: normalized-description comparison keeps one copy
        descriptions = [c.description for c in rubric.criteria]
        assert len(descriptions) == len(set(d.lower().strip() for d in descriptions)) == 5

    def test_future_leak_rejected(self, item):
        qa = ClinicalQAPair.from_dict(json.loads(qa_payload(item.future[0].time)))
        extra = [{"axis": "Accuracy", "description": "Mentions the future timeline event.", "points": 3}]
        gw = OracleGateway(ScriptedBackend([rubric_payload(extra=extra)] * 3), cfg_fast())
        with pytest.raises(FutureLeakDetected):
            gw.generate_rubric(item, qa)

    def test_zero_points_rejected(self):
        with pytest.raises(SchemaViolation):
            parse_rubric_response(rubric_payload(extra=[{"axis": "Accuracy", "description": "x", "points": 0}]))

    def test_out_of_range_points_rejected(self):
        with pytest.raises(SchemaViolation):
            parse_rubric_response(rubric_payload(extra=[{"axis": "Accuracy", "description": "x", "points": 11}]))

    def test_unknown_theme_rejected(self):
        doc = json.loads(rubric_payload())
        doc["meta"]["theme"] = "Nonexistent Theme"
        with pytest.raises(SchemaViolation):
            parse_rubric_response(json.dumps(doc))

    def test_golden_ten_criterion_rubric_accepted(self):
        import pathlib

        golden = json.loads(
            (pathlib.Path(__file__).parent / "fixtures" / "golden_rubric.json").read_text()
        )
        response = json.dumps(
            {
                "meta": {"theme": golden["rubric"]["theme"]},
                "criteria": [
                    {"axis": c["axis"], "description": c["description"], "points": c["points"]}
                    for c in golden["rubric"]["criteria"]
                ],
            }
        )
        rubric = parse_rubric_response(response)
        assert len(rubric.criteria) == 10
        assert {c.axis for c in rubric.criteria} == set(Axis)
        assert rubric.ids == [f"c{i}" for i in range(1, 11)]


class TestGrade:
    @pytest.fixture
    def graded(self, item):
        qa = ClinicalQAPair.from_dict(json.loads(qa_payload(item.future[0].time)))
        rubric = parse_rubric_response(rubric_payload())
        return item, qa, rubric

    def test_empty_candidate_short_circuits(self, graded):
        item, qa, rubric = graded
        backend = ScriptedBackend([])  # would raise if called
        gw = OracleGateway(backend, cfg_fast())
        verdicts = gw.grade("", item, qa, rubric)
        assert verdicts.degenerate is True
        assert all(v is False for v in verdicts.verdicts.values())
        assert backend.calls == []

    def test_repetitive_candidate_short_circuits(self, graded):
        item, qa, rubric = graded
        candidate = "<think>go</think> " + "alpha beta " * 60
        assert is_degenerate(candidate)
        gw = OracleGateway(ScriptedBackend([]), cfg_fast())
        verdicts = gw.grade(candidate, item, qa, rubric)
        assert verdicts.degenerate

    def test_full_key_set_accepted(self, graded):
        item, qa, rubric = graded
        payload = json.dumps({cid: True for cid in rubric.ids})
        gw = OracleGateway(ScriptedBackend([payload]), cfg_fast())
        verdicts = gw.grade("<think>r</think>solid answer", item, qa, rubric)
        assert verdicts.matches(rubric)
        assert not verdicts.degenerate

    def test_ten_criterion_all_true_accepted(self, item):
        import pathlib

        golden = json.loads(
            (pathlib.Path(__file__).parent / "fixtures" / "golden_rubric.json").read_text()
        )
        rubric = Rubric.from_json(golden["rubric"])
        qa = ClinicalQAPair.from_dict(json.loads(qa_payload(item.future[0].time)))
        payload = json.dumps({f"c{i}": True for i in range(1, 11)})
        gw = OracleGateway(ScriptedBackend([payload]), cfg_fast())
        verdicts = gw.grade("<think>r</think>thorough answer", item, qa, rubric)
        assert verdicts.matches(rubric) and all(verdicts.verdicts.values())

    def test_missing_key_schema_violation(self, graded):
        item, qa, rubric = graded
        partial = {cid: True for cid in rubric.ids[:-1]}
        gw = OracleGateway(ScriptedBackend([json.dumps(partial)] * 3), cfg_fast())
        with pytest.raises(SchemaViolation):
            gw.grade("<think>r</think>answer", item, qa, rubric)

    def test_extra_key_schema_violation(self, graded):
        item, qa, rubric = graded
        extra = {cid: True for cid in rubric.ids}
        extra["c99"] = False
        gw = OracleGateway(ScriptedBackend([json.dumps(extra)] * 3), cfg_fast())
        with pytest.raises(SchemaViolation):
            gw.grade("<think>r</think>answer", item, qa, rubric)

    def test_grader_prompt_lists_rubric_lines(self, graded):
        item, qa, rubric = graded
        payload = json.dumps({cid: False for cid in rubric.ids})
        backend = ScriptedBackend([payload])
        gw = OracleGateway(backend, cfg_fast())
        gw.grade("<think>r</think>answer text", item, qa, rubric)
        user_turn = backend.calls[0]["messages"][1]["content"]
        assert "c1: crit 0 about Accuracy" in user_turn
        assert "PATIENT PAST TIMELINE" in user_turn
        assert "REFERENCE ANSWER" in user_turn
        assert backend.calls[0]["temperature"] == 0.0


class TestFallbackRubric:
    def test_positive_sum_39(self):
        rubric = fallback_rubric()
        assert sum(c.points for c in rubric.criteria if c.points > 0) == 39

    def test_all_axes_present(self):
        rubric = fallback_rubric()
        assert {c.axis for c in rubric.criteria} == set(Axis)

    def test_constant_across_calls(self):
        assert fallback_rubric().to_json() == fallback_rubric().to_json()

    def test_points_table(self):
        points = [c.points for c in fallback_rubric().criteria]
        assert points == [10, 8, 7, 9, -6, 5]


class TestDegeneracyDetector:
    def test_unique_text_not_degenerate(self):
        text = "<think>reasoning</think>" + " ".join(f"tok{i}" for i in range(100))
        assert not is_degenerate(text)

    def test_short_text_not_degenerate(self):
        assert not is_degenerate("<think>a</think>short answer")

    def test_verdict_vector_degenerate_must_be_all_false(self):
        with pytest.raises(SchemaViolation):
            VerdictVector(verdicts={"c1": True}, degenerate=True)


class TestBackends:
    def test_deterministic_backend_is_replayable(self, item):
        gw = OracleGateway(DeterministicOracleBackend(), cfg_fast())
        space = ActionSpace(Category.TREATMENT)
        a = gw.generate_qa(item, space)
        b = gw.generate_qa(item, space)
        assert a.to_json() == b.to_json()

    def test_deterministic_rubric_satisfies_invariants(self, item):
        gw = OracleGateway(DeterministicOracleBackend(), cfg_fast())
        qa = gw.generate_qa(item, ActionSpace(Category.PROCEDURAL))
        rubric = gw.generate_rubric(item, qa)
        rubric.validate()
        assert {c.axis for c in rubric.criteria} == set(Axis)

    def test_replay_backend_keyed_by_hash(self):
        request = {"messages": [{"role": "user", "content": "hi"}], "metadata": {"kind": "qa"}}
        backend = ReplayBackend({request_hash(request): "payload"})
        assert backend.complete(request)["content"] == "payload"
        with pytest.raises(TransientBackendError):
            backend.complete({"messages": [], "metadata": {}})

    def test_transcript_persisted(self, item, tmp_path):
        path = tmp_path / "transcript.jsonl"
        backend = ScriptedBackend([qa_payload(item.future[0].time)])
        gw = OracleGateway(backend, cfg_fast(transcript_path=str(path)))
        gw.generate_qa(item, ActionSpace(Category.DIAGNOSIS))
        rows = [json.loads(l) for l in path.read_text().splitlines()]
        assert len(rows) == 1 and rows[0]["error"] is None
        assert rows[0]["request_hash"]

    def test_map_concurrent_bounded(self, item):
        gw = OracleGateway(DeterministicOracleBackend(), cfg_fast(max_in_flight=2))
        results = gw.map_concurrent(
            lambda cat: gw.generate_qa(item, ActionSpace(cat)), list(Category)
        )
        assert len(results) == 4
