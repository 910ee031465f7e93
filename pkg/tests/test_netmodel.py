import numpy as np
import pytest

from radialhelm import (Branch, Bus, NetworkCase, Topology, ZipScale,
                        assemble_admittance, build_incidence, classify_topology,
                        zip_current_injection)
from radialhelm.errors import (DisconnectedNetworkError, InvalidBranchError,
                               NumericDomainError, ValidationError)

from conftest import make_path_case, make_two_bus
from oracles import dense_ybus


class TestAssembleAdmittance:
    def test_single_branch_matrix(self):
        adm = assemble_admittance(make_two_bus())
        expected = np.array([[50 - 50j, -50 + 50j], [-50 + 50j, 50 - 50j]])
        np.testing.assert_allclose(adm.Y_series.toarray(), expected, atol=1e-12)
        np.testing.assert_array_equal(adm.Y_shunt, np.zeros(2))

    def test_full_equals_series_without_shunts(self):
        case = make_path_case([0.01 + 0.02j, 0.03 + 0.01j])
        adm = assemble_admittance(case)
        assert abs(adm.Y_full - adm.Y_series).max() == 0.0

    def test_split_reconstructs_full(self, bundled):
        for case in bundled.values():
            adm = assemble_admittance(case)
            recon = adm.Y_series + np.diag(adm.Y_shunt)
            err = np.abs(adm.Y_full.toarray() - recon).max()
            assert err <= 1e-14 * max(1.0, np.abs(adm.Y_full.toarray()).max())

    def test_series_row_sums_vanish(self, bundled):
        # relative to the largest branch admittance: rows cancel pairwise in
        # exact arithmetic, float summation leaves O(eps * |y|max) behind
        for case in bundled.values():
            adm = assemble_admittance(case)
            row_sums = np.abs(np.asarray(adm.Y_series.sum(axis=1))).max()
            assert row_sums < 1e-12 * max(1.0, np.abs(adm.Y_series.data).max())

    def test_matches_dense_oracle(self, bundled):
        case = bundled["case33"]
        adm = assemble_admittance(case)
        y_full, y_series, shunt = dense_ybus(case)
        np.testing.assert_allclose(adm.Y_series.toarray(), y_series,
                                   rtol=1e-14, atol=1e-12)
        np.testing.assert_allclose(adm.Y_full.toarray(), y_full,
                                   rtol=1e-14, atol=1e-12)
        np.testing.assert_allclose(adm.Y_shunt, shunt, atol=1e-14)

    def test_reduced_block_and_slack_column(self):
        case = make_path_case([0.01 + 0.02j, 0.03 + 0.01j])
        adm = assemble_admittance(case)
        full = adm.Y_series.toarray()
        np.testing.assert_array_equal(adm.Y_series_pq.toarray(), full[1:, 1:])
        np.testing.assert_array_equal(adm.y_slack_column, full[1:, 0])

    def test_charging_and_zip_z_fold_into_shunt(self):
        case = make_two_bus(load_Z=0.2 - 0.1j)
        case.branches[0].total_charging = 0.04j
        adm = assemble_admittance(case)
        assert adm.Y_shunt[0] == pytest.approx(0.02j)
        assert adm.Y_shunt[1] == pytest.approx(0.2 - 0.1j + 0.02j)

    def test_zero_impedance_branch_rejected(self):
        case = make_two_bus(z=0j)
        with pytest.raises(InvalidBranchError):
            assemble_admittance(case)

    def test_disconnected_rejected(self):
        case = make_two_bus()
        case.buses.append(Bus(id=7))
        with pytest.raises(DisconnectedNetworkError):
            assemble_admittance(case)


class TestIncidence:
    def test_oriented_path(self):
        case = make_path_case([0.01 + 0.01j, 0.02 + 0.01j])
        inc = build_incidence(case)
        np.testing.assert_array_equal(inc.a0, [1, 0])
        np.testing.assert_array_equal(inc.A_tilde.toarray(), [[-1, 1], [0, -1]])
        assert inc.topology is Topology.RADIAL
        assert inc.parent == {1: (0, 0), 2: (1, 1)}

    def test_tie_branch_makes_meshed(self):
        case = make_path_case([0.01 + 0.01j, 0.02 + 0.01j])
        case.branches.append(Branch(1, 2, 0.05 + 0.05j))
        inc = build_incidence(case)
        assert inc.topology is Topology.WEAKLY_MESHED
        assert inc.A.shape == (3, 3)
        assert inc.branch_order is None

    def test_column_sums_zero_and_slack_row_identity(self, bundled):
        for case in bundled.values():
            inc = build_incidence(case)
            col_sums = np.asarray(inc.A.sum(axis=0)).ravel()
            np.testing.assert_array_equal(col_sums, np.zeros(len(inc.branches)))
            lhs = inc.a0
            rhs = -np.asarray(inc.A_tilde.sum(axis=0)).ravel()
            np.testing.assert_allclose(lhs, rhs, atol=0)

    def test_series_equals_incidence_product(self, bundled):
        # zero-shunt content: Y_series == A Y_b A^T entrywise
        for case in bundled.values():
            adm = assemble_admittance(case)
            inc = build_incidence(case)
            prod = (inc.A @ np.diag(inc.branch_admittances()) @ inc.A.T.toarray())
            err = np.abs(np.asarray(prod) - adm.Y_series.toarray()).max()
            assert err < 1e-12 * max(1.0, np.abs(adm.Y_series.toarray()).max())

    def test_69_bus_reduced_incidence_nonsingular(self, bundled):
        inc = build_incidence(bundled["case69"])
        assert inc.topology is Topology.RADIAL
        dense = inc.A_tilde.toarray()
        assert dense.shape == (68, 68)
        assert np.linalg.matrix_rank(dense) == 68

    def test_in_service_filtering(self):
        case = make_path_case([0.01 + 0.01j, 0.02 + 0.01j])
        case.branches.append(Branch(1, 2, 0.05 + 0.05j, in_service=False))
        inc = build_incidence(case)
        assert inc.topology is Topology.RADIAL
        assert len(inc.branches) == 2


class TestClassifyTopology:
    def test_radial_chain(self):
        inc = build_incidence(make_path_case([0.01j, 0.02j]))
        assert classify_topology(inc) is Topology.RADIAL

    def test_extra_branch(self):
        case = make_path_case([0.01j, 0.02j])
        case.branches.append(Branch(0, 2, 0.03j))
        assert classify_topology(build_incidence(case)) is Topology.WEAKLY_MESHED

    def test_meshed_33(self, bundled):
        case = bundled["case33"]
        meshed = NetworkCase(name="33w", base_power=case.base_power,
                             base_voltage=case.base_voltage, slack_id=case.slack_id,
                             slack_v0=case.slack_v0, buses=case.buses,
                             branches=case.branches + [Branch(8, 21, 1.2 + 1.2j)])
        assert classify_topology(build_incidence(meshed)) is Topology.WEAKLY_MESHED


class TestZipCurrentInjection:
    def test_all_zero_loads(self):
        buses = [Bus(id=1), Bus(id=2)]
        inj = zip_current_injection(buses, np.array([1 + 0j, 0.98 - 0.01j]))
        np.testing.assert_array_equal(inj, np.zeros(2))

    def test_single_constant_power(self):
        buses = [Bus(id=1, load_P=1 + 0.5j)]
        inj = zip_current_injection(buses, np.array([1 + 0j]))
        assert inj[0] == pytest.approx(-(1 - 0.5j))

    def test_mixed_zip_hand_evaluation(self):
        # frozen from scalar arithmetic at V = 0.97-0.02j, lambda = (4, 20, 40)
        bus = Bus(id=1, load_P=0.02 + 0.01j, load_I=0.015 - 0.004j,
                  load_Z=0.03 + 0.012j, shunt=0.001j)
        inj = zip_current_injection([bus], np.array([0.97 - 0.02j]),
                                    ZipScale(4.0, 20.0, 40.0))
        assert inj[0] == pytest.approx(-1.555209291405503 - 0.4796506331668968j,
                                       abs=1e-14)

    def test_matrix_folded_mode_excludes_shunt_and_z(self):
        bus = Bus(id=1, load_P=0.02 + 0.01j, load_I=0.015 - 0.004j,
                  load_Z=0.03 + 0.012j, shunt=0.001j)
        V = np.array([0.97 - 0.02j])
        full = zip_current_injection([bus], V, ZipScale(4, 20, 40))
        pi_only = zip_current_injection([bus], V, ZipScale(4, 20, 40),
                                        z_as_current=False)
        shunt_part = (0.001j + 40 * (0.03 + 0.012j)) * V[0]
        assert pi_only[0] == pytest.approx(full[0] + shunt_part)

    def test_extra_shunt_argument(self):
        bus = Bus(id=1)
        V = np.array([0.9 + 0j])
        inj = zip_current_injection([bus], V, extra_shunt=np.array([0.1j]))
        assert inj[0] == pytest.approx(-0.1j * 0.9)

    def test_zero_voltage_rejected(self):
        with pytest.raises(NumericDomainError):
            zip_current_injection([Bus(id=1)], np.array([0j]))


class TestCaseValidation:
    def test_duplicate_ids(self):
        case = make_two_bus()
        case.buses.append(Bus(id=1))
        with pytest.raises(ValidationError):
            case.validate()

    def test_unknown_branch_endpoint(self):
        case = make_two_bus()
        case.branches.append(Branch(0, 9, 0.01j))
        with pytest.raises(ValidationError):
            case.validate()

    def test_self_loop(self):
        case = make_two_bus()
        case.branches.append(Branch(1, 1, 0.01j))
        with pytest.raises(InvalidBranchError):
            case.validate()

    def test_slack_with_load(self):
        case = make_two_bus()
        case.buses[0].load_P = 0.1 + 0j
        with pytest.raises(ValidationError):
            case.validate()

    def test_zero_slack_voltage(self):
        case = make_two_bus(v0=0j)
        with pytest.raises(ValidationError):
            case.validate()
