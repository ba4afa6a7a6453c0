import json
import math
import random

import pytest

from escalate.errors import ModelFormatError
from escalate.model import (
    ChildState,
    coarsen,
    parse_model,
    refine,
    serialize_model,
    validate_model,
)

from conftest import random_model


class TestParse:
    def test_vehicle_document(self, vehicle_spec):
        assert vehicle_spec.state_ids == ("N", "A", "T", "P", "M")
        assert vehicle_spec.priors == (0.05, 0.6, 0.2, 0.1, 0.05)
        assert len(vehicle_spec.tasks) == 10
        assert len(vehicle_spec.observables) == 18
        assert vehicle_spec.likelihood_mode == "average"
        assert vehicle_spec.substeps_k == 1
        # defaults applied
        assert vehicle_spec.score_weights == (0.0, 1.0, 2.0, 3.0, 4.0)
        assert vehicle_spec.likelihood_params[0].x0 == 1.0

    def test_murder_document(self, murder_spec):
        assert len(murder_spec.states) == 6
        assert len(murder_spec.tasks) == 7
        assert all(t.evidence_only for t in murder_spec.tasks)

    def test_missing_priors_block(self, vehicle_doc):
        doc = dict(vehicle_doc)
        del doc["priors"]
        with pytest.raises(ModelFormatError, match="priors"):
            parse_model(doc)

    def test_syntax_error_reports_position(self):
        with pytest.raises(ModelFormatError, match="line") as exc:
            parse_model('{"format": 1,\n  "states": [}')
        assert exc.value.position is not None

    def test_unknown_field_rejected(self, vehicle_doc):
        doc = dict(vehicle_doc)
        doc["extra_block"] = 1
        with pytest.raises(ModelFormatError, match="extra_block"):
            parse_model(doc)

    def test_dangling_reference(self, vehicle_doc):
        doc = json.loads(json.dumps(vehicle_doc))
        doc["edges"].append({"src": "A", "dst": "ZZ", "prob": 0.1})
        with pytest.raises(ModelFormatError, match="ZZ"):
            parse_model(doc)

    def test_duplicate_id(self, vehicle_doc):
        doc = json.loads(json.dumps(vehicle_doc))
        doc["states"].append({"id": "A", "name": "again"})
        with pytest.raises(ModelFormatError, match="duplicate"):
            parse_model(doc)

    def test_wrong_format_version(self, vehicle_doc):
        doc = dict(vehicle_doc)
        doc["format"] = 2
        with pytest.raises(ModelFormatError, match="format"):
            parse_model(doc)

    def test_parse_serialize_round_trip(self, vehicle_spec, murder_spec):
        for spec in (vehicle_spec, murder_spec):
            assert parse_model(serialize_model(spec)) == spec

    def test_non_object_top_level(self):
        with pytest.raises(ModelFormatError, match="object"):
            parse_model("[1, 2, 3]")

    def test_bad_polarity_flag(self, vehicle_doc):
        doc = json.loads(json.dumps(vehicle_doc))
        doc["task_state_incidence"]["t_engage_radicals"] = {"A": "yes"}
        with pytest.raises(ModelFormatError, match="polarity"):
            parse_model(doc)

    def test_incomplete_aligned_mapping(self, vehicle_doc):
        doc = json.loads(json.dumps(vehicle_doc))
        del doc["holding_params"]["A"]
        with pytest.raises(ModelFormatError, match="missing entries"):
            parse_model(doc)


class TestValidate:
    def test_vehicle_is_clean(self, vehicle_spec):
        report = validate_model(vehicle_spec)
        assert report.ok
        assert report.findings == ()

    def test_prior_sum_finding(self, vehicle_doc):
        doc = json.loads(json.dumps(vehicle_doc))
        doc["priors"]["A"] = 0.8  # sums to 1.2
        report = validate_model(parse_model(doc))
        assert any(f.code == "PRIOR_SUM" and f.severity == "error" for f in report.findings)

    def test_edge_sum_finding(self, vehicle_doc):
        doc = json.loads(json.dumps(vehicle_doc))
        doc["edges"][0]["prob"] = 0.75  # A row sums to 1.05
        report = validate_model(parse_model(doc))
        assert any(f.code == "EDGE_SUM" for f in report.findings)

    def test_zeta_range_finding(self, vehicle_doc):
        doc = json.loads(json.dumps(vehicle_doc))
        doc["holding_params"]["A"] = 1.5
        report = validate_model(parse_model(doc))
        assert any(f.code == "ZETA_RANGE" for f in report.findings)

    def test_p_plus_floor_is_warning(self, vehicle_doc):
        doc = json.loads(json.dumps(vehicle_doc))
        doc["p_plus"]["A"] = 0.1
        report = validate_model(parse_model(doc))
        assert report.ok
        assert any(f.code == "P_PLUS_FLOOR" and f.severity == "warning" for f in report.findings)

    def test_task_without_observable(self, vehicle_doc):
        doc = json.loads(json.dumps(vehicle_doc))
        incidence = doc["observable_task_incidence"]
        for oid, tids in incidence.items():
            incidence[oid] = [t for t in tids if t != "t_learn_to_drive"]
        report = validate_model(parse_model(doc))
        assert any(f.code == "TASK_NO_OBSERVABLE" for f in report.findings)


class TestCoarsen:
    def test_merge_training_into_preparing(self, vehicle_spec):
        merged = coarsen(vehicle_spec, {"A": "A", "T": "P", "P": "P", "M": "M"})
        assert merged.state_ids == ("N", "A", "P", "M")
        assert math.isclose(merged.priors[merged.state_index("P")], 0.3)
        merged_tasks = {t for t, _pol in merged.incident_tasks("P")}
        fine_union = {t for t, _pol in vehicle_spec.incident_tasks("T")} | {
            t for t, _pol in vehicle_spec.incident_tasks("P")
        }
        assert merged_tasks == fine_union
        assert validate_model(merged).ok

    def test_merge_edge_rule_by_hand(self, vehicle_spec):
        # P' = {T, P} with priors (0.2, 0.1). Member edge sums into each
        # destination group, prior-weighted: P'->M = (0.2*0 + 0.1*0.7)/0.3;
        # the internal T->P edge drops into the implied-neutral remainder.
        merged = coarsen(vehicle_spec, {"A": "A", "T": "P", "P": "P", "M": "M"})
        p_row = {e.dst: e.prob for e in merged.explicit_edges_from("P")}
        assert p_row == {"M": pytest.approx((0.1 * 0.7) / 0.3)}
        assert merged.implied_neutral_prob("P") == pytest.approx(1 - 0.07 / 0.3)
        a_row = {e.dst: e.prob for e in merged.explicit_edges_from("A")}
        assert a_row == {"P": pytest.approx(0.7)}  # A->T and A->P combine
        m_row = {e.dst: e.prob for e in merged.explicit_edges_from("M")}
        assert m_row == {"P": pytest.approx(0.7)}

    def test_identity_merge(self, vehicle_spec):
        same = coarsen(vehicle_spec, {sid: sid for sid in vehicle_spec.active_ids})
        assert same == vehicle_spec

    def test_merge_all_active(self, vehicle_spec):
        merged = coarsen(vehicle_spec, {sid: "X" for sid in vehicle_spec.active_ids})
        assert len(merged.states) == 2
        assert math.isclose(merged.priors[1], 0.95)

    def test_total_prior_mass_preserved(self, vehicle_spec):
        merged = coarsen(vehicle_spec, {"A": "AT", "T": "AT", "P": "PM", "M": "PM"})
        assert math.fsum(merged.priors) == pytest.approx(math.fsum(vehicle_spec.priors), abs=0)

    def test_neutral_cannot_merge(self, vehicle_spec):
        with pytest.raises(ValueError):
            coarsen(vehicle_spec, {"A": "N", "T": "T", "P": "P", "M": "M"})

    def test_coarsen_of_valid_stays_valid(self):
        rng = random.Random(20240817)
        for _ in range(25):
            spec = random_model(rng)
            actives = list(spec.active_ids)
            merge = {sid: actives[rng.randrange(max(1, len(actives) // 2 + 1))] for sid in actives}
            merged = coarsen(spec, merge)
            assert validate_model(merged).ok, validate_model(merged).findings

    def test_zero_prior_group_falls_back_to_plain_average(self, vehicle_doc):
        doc = json.loads(json.dumps(vehicle_doc))
        doc["priors"] = {"N": 0.05, "A": 0.95, "T": 0.0, "P": 0.0, "M": 0.0}
        spec = parse_model(doc)
        merged = coarsen(spec, {"A": "A", "T": "X", "P": "X", "M": "X"})
        assert validate_model(merged).ok
        x = merged.state_index("X")
        assert merged.priors[x] == 0.0
        # holding parameters all equal 0.01, so the merged value is exact
        assert merged.holding_params[x - 1] == 0.01


class TestRefine:
    def split_preparing(self, spec, fractions=(0.5, 0.5)):
        parent_tasks = tuple(t for t, _ in spec.incident_tasks("P"))
        children = [
            ChildState(id="PV", name="PreparingVehicle", prior_fraction=fractions[0], tasks=parent_tasks),
            ChildState(id="PB", name="PreparingBomb", prior_fraction=fractions[1], tasks=parent_tasks),
        ]
        return refine(spec, "P", children)

    def test_split_preparing(self, vehicle_spec):
        split = self.split_preparing(vehicle_spec)
        assert len(split.states) == 6
        assert split.priors[split.state_index("PV")] == pytest.approx(0.05)
        assert split.priors[split.state_index("PB")] == pytest.approx(0.05)
        assert validate_model(split).ok

    def test_single_child_renames(self, vehicle_spec):
        child = ChildState(
            id="P2",
            name="Preparing",
            prior_fraction=1.0,
            tasks=tuple(t for t, _ in vehicle_spec.incident_tasks("P")),
        )
        renamed = refine(vehicle_spec, "P", [child])
        assert renamed.state_ids == ("N", "A", "T", "P2", "M")
        assert renamed.priors == vehicle_spec.priors
        # Same edge structure and probabilities, modulo the rename.
        def canon(spec, swap):
            return sorted((swap.get(e.src, e.src), swap.get(e.dst, e.dst), e.prob) for e in spec.edges)

        assert canon(renamed, {"P2": "P"}) == canon(vehicle_spec, {})

    def test_bad_fractions(self, vehicle_spec):
        parent_tasks = tuple(t for t, _ in vehicle_spec.incident_tasks("P"))
        children = [
            ChildState(id="PV", prior_fraction=0.7, tasks=parent_tasks),
            ChildState(id="PB", prior_fraction=0.7, tasks=parent_tasks),
        ]
        with pytest.raises(ValueError, match="fractions"):
            refine(vehicle_spec, "P", children)

    def test_orphaned_task(self, vehicle_spec):
        some = tuple(t for t, _ in vehicle_spec.incident_tasks("P"))[:2]
        children = [
            ChildState(id="PV", prior_fraction=0.5, tasks=some),
            ChildState(id="PB", prior_fraction=0.5, tasks=some),
        ]
        with pytest.raises(ValueError, match="not assigned"):
            refine(vehicle_spec, "P", children)

    def test_child_parameter_overrides(self, vehicle_spec):
        parent_tasks = tuple(t for t, _ in vehicle_spec.incident_tasks("P"))
        children = [
            ChildState(id="PV", prior_fraction=0.6, tasks=parent_tasks, p_plus=0.3, holding=0.05),
            ChildState(id="PB", prior_fraction=0.4, tasks=parent_tasks[:2]),
        ]
        # PB misses some parent tasks but PV covers them all
        split = refine(vehicle_spec, "P", children)
        assert split.state_p_plus("PV") == 0.3
        assert split.holding("PV") == 0.05
        assert split.state_p_plus("PB") == vehicle_spec.state_p_plus("P")
        assert {t for t, _ in split.incident_tasks("PB")} == set(parent_tasks[:2])

    def test_edge_overrides_replace_rows(self, vehicle_spec):
        from escalate.model import EdgeDef

        parent_tasks = tuple(t for t, _ in vehicle_spec.incident_tasks("P"))
        children = [
            ChildState(id="PV", prior_fraction=0.5, tasks=parent_tasks),
            ChildState(id="PB", prior_fraction=0.5, tasks=parent_tasks),
        ]
        overrides = [
            EdgeDef("A", "PV", 0.25),        # A routes into PV only
            EdgeDef("PV", "M", 0.5),          # PV keeps an escalation edge
            EdgeDef("PV", "PB", 0.2),         # and can drift to the other method
        ]
        split = refine(vehicle_spec, "P", children, edge_overrides=overrides)
        a_edges = {(e.dst): e.prob for e in split.explicit_edges_from("A")}
        assert a_edges == {"T": 0.4, "PV": 0.25}
        pv_edges = {(e.dst): e.prob for e in split.explicit_edges_from("PV")}
        assert pv_edges == {"M": 0.5, "PB": 0.2}
        # PB had no overrides: inherits the parent's outgoing row
        pb_edges = {(e.dst): e.prob for e in split.explicit_edges_from("PB")}
        assert pb_edges == {"M": 0.7}
        # T had no overrides: its edge into the split is fraction-split
        t_edges = {(e.dst): e.prob for e in split.explicit_edges_from("T")}
        assert t_edges == {"PV": 0.35, "PB": 0.35}

    def test_refine_then_coarsen_round_trip(self, vehicle_spec):
        split = self.split_preparing(vehicle_spec)
        back = coarsen(split, {"A": "A", "T": "T", "PV": "P", "PB": "P", "M": "M"})
        assert back.state_ids == vehicle_spec.state_ids
        assert back.priors == vehicle_spec.priors
        assert sorted((e.src, e.dst, e.prob) for e in back.edges) == sorted(
            (e.src, e.dst, e.prob) for e in vehicle_spec.edges
        )
        assert back.task_state_incidence == vehicle_spec.task_state_incidence
        assert back.holding_params == vehicle_spec.holding_params
        assert back.p_plus == vehicle_spec.p_plus
