import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radialhelm import (Branch, Scenario, Topology, apply_scenario,
                        build_incidence, load_case_native, load_scenario,
                        parse_matpower_case, serialize_case_native,
                        serialize_scenario, split_zip_load)
from radialhelm.cli import load_case
from radialhelm.errors import ParseError, ValidationError

MINIMAL_CASE = """\
function mpc = mini2
mpc.version = '2';
mpc.baseMVA = 10;
mpc.bus = [
  1 3 0    0    0 0   1 1 0 12.5 1 1.1 0.9;
  2 1 0.1  0.06 0 0.3 1 1 0 12.5 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 999 -999 1.02 10 1 999 -999;
];
mpc.branch = [
  1 2 0.02 0.04 0.001 999 999 999 0 0 1;
];
"""


class TestMatpowerParsing:
    def test_minimal_per_unit_conversion(self):
        case = parse_matpower_case(MINIMAL_CASE)
        assert case.name == "mini2"
        assert case.base_power == 10
        assert case.base_voltage == 12.5
        assert case.slack_id == 1
        assert case.slack_v0 == pytest.approx(1.02)
        bus2 = case.pq_buses()[0]
        assert bus2.load_P == pytest.approx((0.1 + 0.06j) / 10)
        assert bus2.shunt == pytest.approx(0.3j / 10)
        br = case.branches[0]
        assert br.series_impedance == 0.02 + 0.04j
        assert br.total_charging == 0.001j
        assert br.in_service

    def test_bundled_33_bus(self):
        case, _ = load_case("case33")
        assert len(case.buses) == 33
        assert len(case.branches) == 32
        assert build_incidence(case).topology is Topology.RADIAL

    def test_two_slacks_rejected(self):
        text = MINIMAL_CASE.replace("2 1 0.1", "2 3 0.1")
        with pytest.raises(ValidationError):
            parse_matpower_case(text)

    def test_non_numeric_token_reports_line(self):
        text = MINIMAL_CASE.replace("0.02 0.04", "0.02 oops")
        with pytest.raises(ParseError) as err:
            parse_matpower_case(text)
        assert err.value.line == 12

    def test_missing_section(self):
        text = "\n".join(l for l in MINIMAL_CASE.splitlines()
                         if not l.startswith("mpc.baseMVA"))
        with pytest.raises(ParseError):
            parse_matpower_case(text)

    def test_off_nominal_tap_rejected(self):
        text = MINIMAL_CASE.replace("999 0 0 1;", "999 1.05 0 1;")
        with pytest.raises(ValidationError):
            parse_matpower_case(text)

    def test_pv_bus_rejected(self):
        text = MINIMAL_CASE.replace("2 1 0.1", "2 2 0.1")
        with pytest.raises(ValidationError):
            parse_matpower_case(text)


class TestNativeFormat:
    def test_round_trip_bit_identical(self, bundled):
        case = bundled["case69"]
        text = serialize_case_native(case)
        again = load_case_native(text)
        assert again.name == case.name
        assert again.base_power == case.base_power
        assert again.base_voltage == case.base_voltage
        assert again.slack_id == case.slack_id
        assert again.slack_v0 == case.slack_v0
        for a, b in zip(again.buses, case.buses):
            assert (a.id, a.load_P, a.load_I, a.load_Z, a.shunt) == \
                (b.id, b.load_P, b.load_I, b.load_Z, b.shunt)
        for a, b in zip(again.branches, case.branches):
            assert (a.from_node, a.to_node, a.series_impedance,
                    a.total_charging, a.in_service) == \
                (b.from_node, b.to_node, b.series_impedance,
                 b.total_charging, b.in_service)

    def test_zip_feeder_round_trip(self, bundled):
        case = bundled["feeder123zip"]
        again = load_case_native(serialize_case_native(case))
        assert [b.load_I for b in again.buses] == [b.load_I for b in case.buses]

    def test_empty_bus_list_rejected(self):
        text = serialize_case_native(load_case("case18")[0])
        doc = text.replace('"buses": [', '"buses_x": [', 1)
        with pytest.raises(ParseError):
            load_case_native(doc)
        import json
        obj = json.loads(text)
        obj["buses"] = []
        with pytest.raises(ValidationError):
            load_case_native(json.dumps(obj))

    def test_malformed_json_reports_line(self):
        with pytest.raises(ParseError) as err:
            load_case_native('{\n "meta": oops\n}')
        assert err.value.line == 2

    def test_scenario_round_trip(self):
        scen = Scenario(name="x", lambda_P=2.0, lambda_I=3.0, lambda_Z=4.0,
                        tie_branches=[Branch(3, 9, 0.1 + 0.2j)],
                        zip_split=(0.5, 0.25, 0.25))
        again = load_scenario(serialize_scenario(scen))
        assert again == scen

    def test_scenario_embedded_in_case_document(self, bundled):
        scen = Scenario(name="emb", lambda_P=2.0)
        text = serialize_case_native(bundled["case18"], scenario=scen)
        assert load_scenario(text).lambda_P == 2.0
        # loading the case does not apply the embedded scenario
        case = load_case_native(text)
        assert case.pq_buses()[0].load_P == bundled["case18"].pq_buses()[0].load_P


class TestScenarios:
    def test_identity(self, bundled):
        case = bundled["case18"]
        out = apply_scenario(case, Scenario())
        for a, b in zip(out.buses, case.buses):
            assert a.load_P == b.load_P
        assert len(out.branches) == len(case.branches)

    def test_component_scaling(self):
        case = load_case("feeder123zip")[0]
        out = apply_scenario(case, Scenario(name="m", lambda_P=4, lambda_I=20,
                                            lambda_Z=40))
        for a, b in zip(out.pq_buses(), case.pq_buses()):
            assert a.load_P == pytest.approx(4 * b.load_P)
            assert a.load_I == pytest.approx(20 * b.load_I)
            assert a.load_Z == pytest.approx(40 * b.load_Z)

    def test_original_untouched(self, bundled):
        case = bundled["case18"]
        before = [b.load_P for b in case.buses]
        apply_scenario(case, Scenario(lambda_P=7.0))
        assert [b.load_P for b in case.buses] == before

    @settings(max_examples=25, deadline=None)
    @given(lam=st.tuples(*[st.floats(0.1, 8)] * 3),
           mu=st.tuples(*[st.floats(0.1, 8)] * 3))
    def test_multiplicative(self, lam, mu):
        case = load_case("case18")[0]
        one = apply_scenario(apply_scenario(case, Scenario(lambda_P=lam[0],
                                                           lambda_I=lam[1],
                                                           lambda_Z=lam[2])),
                             Scenario(lambda_P=mu[0], lambda_I=mu[1],
                                      lambda_Z=mu[2]))
        both = apply_scenario(case, Scenario(lambda_P=lam[0] * mu[0],
                                             lambda_I=lam[1] * mu[1],
                                             lambda_Z=lam[2] * mu[2]))
        for a, b in zip(one.pq_buses(), both.pq_buses()):
            assert a.load_P == pytest.approx(b.load_P, rel=1e-12)
            assert a.load_I == pytest.approx(b.load_I, rel=1e-12)
            assert a.load_Z == pytest.approx(b.load_Z, rel=1e-12)

    def test_tie_branches_make_meshed(self, bundled):
        from radialhelm.cli import bundled_cases_dir
        scen = load_scenario((bundled_cases_dir() / "33w.json").read_text())
        out = apply_scenario(bundled["case33"], scen)
        assert build_incidence(out).topology is Topology.WEAKLY_MESHED

    def test_unknown_tie_endpoint(self, bundled):
        scen = Scenario(tie_branches=[Branch(1, 999, 0.1j)])
        with pytest.raises(ValidationError):
            apply_scenario(bundled["case18"], scen)

    def test_negative_multiplier_rejected(self):
        with pytest.raises(ValidationError):
            Scenario(lambda_P=-1.0).validate()
        with pytest.raises(ValidationError):
            Scenario(lambda_P=math.inf).validate()

    def test_zip_split_reallocates_nominal_power(self):
        case = load_case("case18")[0]
        out = split_zip_load(case, (0.5, 0.3, 0.2))
        for a, b in zip(out.pq_buses(), case.pq_buses()):
            s_nom = b.load_P
            assert a.load_P == pytest.approx(0.5 * s_nom)
            assert a.load_I == pytest.approx(np.conj(0.3 * s_nom))
            assert a.load_Z == pytest.approx(np.conj(0.2 * s_nom))

    def test_zip_split_is_idempotent_on_allocation(self):
        case = load_case("case18")[0]
        once = split_zip_load(case, (0.4, 0.3, 0.3))
        twice = split_zip_load(once, (0.4, 0.3, 0.3))
        for a, b in zip(once.pq_buses(), twice.pq_buses()):
            assert a.load_P == pytest.approx(b.load_P)
            assert a.load_I == pytest.approx(b.load_I)
