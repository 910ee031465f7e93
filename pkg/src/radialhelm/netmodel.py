"""Network model: cases, split admittance assembly, incidence and topology.

Sign conventions used throughout the package (per-unit everywhere):

* ``load_P`` is complex power consumed by the constant-power part.
* ``load_I`` is the current phasor of the constant-current part at nominal
  voltage, stored in conjugate form ``(S_nom / V_nom)*``; its injection into
  the network is ``-lambda_I * conj(load_I)``.
* ``load_Z`` is the admittance of the constant-impedance part,
  ``conj(S_nom) / |V_nom|^2``; it is folded into the shunt diagonal.
* ``shunt`` is an admittance to ground, ``G + jB`` with ``B > 0`` injecting
  reactive power (capacitive).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from .errors import (
    DisconnectedNetworkError,
    InvalidBranchError,
    InvalidCaseError,
    NumericDomainError,
    ValidationError,
)

NOMINAL_V = 1.0 + 0.0j


class ZipScale(NamedTuple):
    """Multipliers for the three ZIP load components."""

    lambda_P: float = 1.0
    lambda_I: float = 1.0
    lambda_Z: float = 1.0


UNIT_SCALE = ZipScale()


@dataclass
class Bus:
    id: int
    load_P: complex = 0j
    load_I: complex = 0j
    load_Z: complex = 0j
    shunt: complex = 0j


@dataclass
class Branch:
    from_node: int
    to_node: int
    series_impedance: complex
    total_charging: complex = 0j
    in_service: bool = True

    @property
    def series_admittance(self) -> complex:
        return 1.0 / self.series_impedance


@dataclass
class NetworkCase:
    """A distribution network with one slack node and PQ nodes elsewhere."""

    name: str
    base_power: float
    base_voltage: float
    slack_id: int
    slack_v0: complex
    buses: list
    branches: list

    def bus_ids(self):
        return [b.id for b in self.buses]

    def pq_buses(self):
        """Non-slack buses in ascending id order (the PQ node order)."""
        return sorted((b for b in self.buses if b.id != self.slack_id),
                      key=lambda b: b.id)

    def node_order(self):
        """Node ids in internal order: slack first, then PQ ids ascending."""
        return [self.slack_id] + [b.id for b in self.pq_buses()]

    def live_branches(self):
        return [br for br in self.branches if br.in_service]

    @property
    def n_pq(self) -> int:
        return len(self.buses) - 1

    def validate(self):
        """Raise a ValidationError subclass on any violated case invariant."""
        if not self.buses:
            raise ValidationError("case has no buses")
        ids = self.bus_ids()
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate bus ids")
        if self.slack_id not in ids:
            raise ValidationError(f"slack node {self.slack_id} is not a bus")
        if self.slack_v0 == 0:
            raise InvalidCaseError("slack voltage V0 must be nonzero")
        slack = next(b for b in self.buses if b.id == self.slack_id)
        if slack.load_P != 0 or slack.load_I != 0 or slack.load_Z != 0:
            raise ValidationError("slack bus carries load fields")
        idset = set(ids)
        for br in self.branches:
            if br.from_node == br.to_node:
                raise InvalidBranchError(
                    f"branch {br.from_node}-{br.to_node} is a self loop")
            if br.from_node not in idset or br.to_node not in idset:
                raise ValidationError(
                    f"branch {br.from_node}-{br.to_node} references unknown node")
            if br.series_impedance == 0:
                raise InvalidBranchError(
                    f"branch {br.from_node}-{br.to_node} has zero series impedance")
        _bfs_tree(self)  # raises DisconnectedNetworkError when not connected


class Topology(Enum):
    RADIAL = "radial"
    WEAKLY_MESHED = "weakly_meshed"


@dataclass
class AdmittanceSplit:
    """Y-bus split into a series part and a shunt diagonal.

    Rows/columns follow the internal node order (slack first). The shunt
    diagonal collects bus shunts, half line charging per branch end, and
    constant-impedance load admittances.
    """

    node_ids: list
    Y_full: sp.csc_matrix
    Y_series: sp.csc_matrix
    Y_shunt: np.ndarray
    Y_series_pq: sp.csc_matrix
    y_slack_column: np.ndarray


@dataclass
class IncidenceStructure:
    """Oriented node-branch incidence with slack/PQ partition.

    Branch columns are the in-service branches in input order, entries +1
    at the from node and -1 at the to node. Tree bookkeeping (``parent``,
    ``branch_order`` and index arrays) is only present for radial cases.
    """

    node_ids: list
    branches: list
    A: sp.csc_matrix
    a0: np.ndarray
    A_tilde: sp.csc_matrix
    topology: Topology
    branch_order: Optional[list] = None
    parent: Optional[dict] = None
    # PQ-index-space arrays for sweep schedules (radial only)
    order_fwd: Optional[np.ndarray] = field(default=None, repr=False)
    parent_idx: Optional[np.ndarray] = field(default=None, repr=False)
    z_in: Optional[np.ndarray] = field(default=None, repr=False)

    def branch_admittances(self) -> np.ndarray:
        """Diagonal of Y_b, aligned with the incidence columns."""
        return np.array([br.series_admittance for br in self.branches],
                        dtype=np.complex128)


def _bfs_tree(case: NetworkCase):
    """Breadth-first tree from the slack over in-service branches.

    Returns (visit order of node ids, parent id map, incoming branch
    position map). Raises DisconnectedNetworkError if any node is missed.
    """
    adjacency = {b.id: [] for b in case.buses}
    for pos, br in enumerate(case.live_branches()):
        adjacency[br.from_node].append((br.to_node, pos))
        adjacency[br.to_node].append((br.from_node, pos))
    seen = {case.slack_id}
    order = [case.slack_id]
    parent_of = {}
    branch_of = {}
    queue = [case.slack_id]
    while queue:
        node = queue.pop(0)
        for nbr, pos in adjacency[node]:
            if nbr not in seen:
                seen.add(nbr)
                parent_of[nbr] = node
                branch_of[nbr] = pos
                order.append(nbr)
                queue.append(nbr)
    if len(seen) != len(case.buses):
        missing = sorted(set(case.bus_ids()) - seen)
        raise DisconnectedNetworkError(
            f"nodes {missing} unreachable from slack {case.slack_id}")
    return order, parent_of, branch_of


def assemble_admittance(case: NetworkCase) -> AdmittanceSplit:
    """Build the split admittance matrices in internal node order."""
    node_ids = case.node_order()
    index = {nid: k for k, nid in enumerate(node_ids)}
    n_all = len(node_ids)

    rows, cols, vals = [], [], []
    shunt = np.zeros(n_all, dtype=np.complex128)
    for br in case.live_branches():
        if br.series_impedance == 0:
            raise InvalidBranchError(
                f"branch {br.from_node}-{br.to_node} has zero series impedance")
        f, t = index[br.from_node], index[br.to_node]
        y = br.series_admittance
        rows += [f, t, f, t]
        cols += [f, t, t, f]
        vals += [y, y, -y, -y]
        shunt[f] += br.total_charging / 2.0
        shunt[t] += br.total_charging / 2.0
    for bus in case.buses:
        shunt[index[bus.id]] += bus.shunt + bus.load_Z

    y_series = sp.csc_matrix(
        (np.asarray(vals, dtype=np.complex128), (rows, cols)),
        shape=(n_all, n_all))
    _bfs_tree(case)  # connectivity guard
    y_full = (y_series + sp.diags(shunt, format="csc")).tocsc()
    y_pq = y_series[1:, 1:].tocsc()
    y_slack = np.asarray(y_series[1:, [0]].todense()).ravel()
    return AdmittanceSplit(node_ids=node_ids, Y_full=y_full, Y_series=y_series,
                           Y_shunt=shunt, Y_series_pq=y_pq,
                           y_slack_column=y_slack)


def build_incidence(case: NetworkCase) -> IncidenceStructure:
    """Oriented incidence, topology class, and the radial sweep schedule."""
    node_ids = case.node_order()
    index = {nid: k for k, nid in enumerate(node_ids)}
    live = case.live_branches()
    n_all, n_br = len(node_ids), len(live)
    n_pq = n_all - 1

    _, parent_of, branch_of = _bfs_tree(case)
    if n_br < n_pq:
        raise DisconnectedNetworkError(
            f"{n_br} in-service branches cannot connect {n_pq} PQ nodes")

    rows, cols, vals = [], [], []
    for pos, br in enumerate(live):
        rows += [index[br.from_node], index[br.to_node]]
        cols += [pos, pos]
        vals += [1.0, -1.0]
    A = sp.csc_matrix((vals, (rows, cols)), shape=(n_all, n_br))
    a0 = np.asarray(A[[0], :].todense()).ravel()
    A_tilde = A[1:, :].tocsc()

    if n_br == n_pq:
        topology = Topology.RADIAL
        bfs_ids = [nid for nid in _bfs_tree(case)[0] if nid != case.slack_id]
        order_fwd = np.array([index[nid] - 1 for nid in bfs_ids], dtype=np.int32)
        parent_idx = np.empty(n_pq, dtype=np.int32)
        z_in = np.empty(n_pq, dtype=np.complex128)
        parent = {}
        branch_order = []
        for nid in bfs_ids:
            k = index[nid] - 1
            pos = branch_of[nid]
            parent[nid] = (parent_of[nid], pos)
            branch_order.append(pos)
            parent_idx[k] = index[parent_of[nid]] - 1
            z_in[k] = live[pos].series_impedance
        return IncidenceStructure(node_ids=node_ids, branches=live, A=A, a0=a0,
                                  A_tilde=A_tilde, topology=topology,
                                  branch_order=branch_order, parent=parent,
                                  order_fwd=order_fwd, parent_idx=parent_idx,
                                  z_in=z_in)
    return IncidenceStructure(node_ids=node_ids, branches=live, A=A, a0=a0,
                              A_tilde=A_tilde, topology=Topology.WEAKLY_MESHED)


def classify_topology(incidence: IncidenceStructure) -> Topology:
    """Radial iff the in-service branch count equals the PQ node count."""
    n_pq = len(incidence.node_ids) - 1
    return Topology.RADIAL if len(incidence.branches) == n_pq \
        else Topology.WEAKLY_MESHED


def zip_current_injection(buses, V, scale: ZipScale = UNIT_SCALE,
                          z_as_current: bool = True,
                          extra_shunt=None) -> np.ndarray:
    """Nodal injection currents of ZIP loads at the given PQ voltages.

    ``buses`` are the PQ buses aligned with ``V``. With ``z_as_current``
    the shunt and constant-impedance parts are returned as voltage-dependent
    currents; otherwise the caller folds them into the admittance matrix and
    only the P and I parts are returned. ``extra_shunt`` adds nodal shunt
    admittance not carried on the buses (e.g. line charging totals).
    """
    V = np.asarray(V, dtype=np.complex128)
    if np.any(V == 0):
        raise NumericDomainError("zero voltage in ZIP current evaluation")
    s_p = np.array([b.load_P for b in buses], dtype=np.complex128)
    i_c = np.array([b.load_I for b in buses], dtype=np.complex128)
    inj = -(np.conj(scale.lambda_P * s_p / V) + scale.lambda_I * np.conj(i_c))
    if z_as_current:
        y_sh = np.array([b.shunt + scale.lambda_Z * b.load_Z for b in buses],
                        dtype=np.complex128)
        if extra_shunt is not None:
            y_sh = y_sh + np.asarray(extra_shunt, dtype=np.complex128)
        inj = inj - y_sh * V
    return inj
