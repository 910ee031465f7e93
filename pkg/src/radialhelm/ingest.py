"""Case ingestion: MATPOWER-subset text, the native JSON format, scenarios.

The MATPOWER reader covers the bus/branch/baseMVA matrices plus the gen
table (used only to locate the slack and its voltage setpoint), which is
all the bundled distribution feeders need. The native format is a JSON
document mirroring the domain types field for field, with complex numbers
as [re, im] pairs.
"""

import dataclasses
import json
import math
import re
from dataclasses import dataclass
from typing import Optional

from .errors import ParseError, ValidationError
from .netmodel import Branch, Bus, NetworkCase

NOMINAL_V = 1.0 + 0.0j


@dataclass
class Scenario:
    """A loading scenario: ZIP multipliers plus optional tie branches.

    ``zip_split`` optionally re-splits each bus's nominal load into
    (P, I, Z) fractions before the multipliers are applied; this is how
    single-component loading studies are expressed for cases that carry
    only aggregate constant-power data.
    """

    name: str = "scenario"
    lambda_P: float = 1.0
    lambda_I: float = 1.0
    lambda_Z: float = 1.0
    tie_branches: list = dataclasses.field(default_factory=list)
    zip_split: Optional[tuple] = None

    def validate(self):
        for lam in (self.lambda_P, self.lambda_I, self.lambda_Z):
            if not (math.isfinite(lam) and lam >= 0):
                raise ValidationError(f"scenario multiplier {lam!r} must be finite and >= 0")
        if self.zip_split is not None:
            if len(self.zip_split) != 3 or any(f < 0 for f in self.zip_split):
                raise ValidationError("zip_split must be three nonnegative fractions")


# ---------------------------------------------------------------------------
# MATPOWER-subset parsing

_ASSIGN_RE = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")
_FUNCTION_RE = re.compile(r"^\s*function\s+mpc\s*=\s*(\w+)")

# column counts we rely on (MATPOWER case format v2)
_BUS_MIN_COLS = 13
_BRANCH_MIN_COLS = 11
_GEN_MIN_COLS = 6


def _strip_comment(line: str) -> str:
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _parse_row(text: str, lineno: int):
    row = []
    for tok in text.replace(";", " ").split():
        try:
            row.append(float(tok))
        except ValueError:
            raise ParseError(f"non-numeric token {tok!r} in matrix row", line=lineno)
    return row


def _scan_matpower(text: str):
    """Return (name, scalars, matrices) from MATPOWER-style text."""
    name = None
    scalars = {}
    matrices = {}
    current = None  # (key, rows) while inside a matrix literal
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if current is not None:
            key, rows = current
            body, closed = (line.split("]")[0], True) if "]" in line else (line, False)
            if body.strip():
                rows.append(_parse_row(body, lineno))
            if closed:
                matrices[key] = rows
                current = None
            continue
        m = _FUNCTION_RE.match(line)
        if m:
            name = m.group(1)
            continue
        m = _ASSIGN_RE.match(line)
        if not m:
            continue
        key, rest = m.group(1), m.group(2).strip()
        if rest.startswith("["):
            rest = rest[1:].strip()
            rows = []
            if "]" in rest:
                body = rest.split("]")[0]
                if body.strip():
                    rows.append(_parse_row(body, lineno))
                matrices[key] = rows
            else:
                if rest:
                    rows.append(_parse_row(rest, lineno))
                current = (key, rows)
        elif rest.startswith("'") or rest.startswith('"'):
            scalars[key] = rest.strip("';\" ")
        else:
            try:
                scalars[key] = float(rest.rstrip(";"))
            except ValueError:
                raise ParseError(f"cannot parse value for mpc.{key}", line=lineno)
    if current is not None:
        raise ParseError(f"unterminated matrix mpc.{current[0]}",
                         line=len(text.splitlines()))
    return name, scalars, matrices


def parse_matpower_case(text: str) -> NetworkCase:
    """Parse the bus/branch/baseMVA (+gen) subset of a MATPOWER case."""
    name, scalars, matrices = _scan_matpower(text)
    nlines = len(text.splitlines())
    if "baseMVA" not in scalars:
        raise ParseError("missing mpc.baseMVA", line=nlines)
    for section in ("bus", "branch"):
        if section not in matrices:
            raise ParseError(f"missing mpc.{section} section", line=nlines)
    base_mva = scalars["baseMVA"]
    if base_mva <= 0:
        raise ValidationError("baseMVA must be positive")

    buses = []
    slack_ids = []
    base_kv_of = {}
    vm_of = {}
    va_of = {}
    for row in matrices["bus"]:
        if len(row) < _BUS_MIN_COLS:
            raise ParseError(f"bus row has {len(row)} columns, expected >= {_BUS_MIN_COLS}")
        bus_i, bus_type = int(row[0]), int(row[1])
        pd, qd, gs, bs = row[2], row[3], row[4], row[5]
        if bus_type == 3:
            slack_ids.append(bus_i)
        elif bus_type == 2:
            raise ValidationError(f"bus {bus_i} is PV; PV buses are unsupported")
        elif bus_type != 1:
            raise ValidationError(f"bus {bus_i} has unknown type {bus_type}")
        buses.append(Bus(id=bus_i,
                         load_P=(pd + 1j * qd) / base_mva,
                         shunt=(gs + 1j * bs) / base_mva))
        base_kv_of[bus_i] = row[9]
        vm_of[bus_i] = row[7]
        va_of[bus_i] = row[8]
    if len(slack_ids) != 1:
        raise ValidationError(f"expected exactly one slack (type 3) bus, found {len(slack_ids)}")
    slack_id = slack_ids[0]

    branches = []
    for row in matrices["branch"]:
        if len(row) < _BRANCH_MIN_COLS:
            raise ParseError(f"branch row has {len(row)} columns, expected >= {_BRANCH_MIN_COLS}")
        f, t = int(row[0]), int(row[1])
        r, x, b = row[2], row[3], row[4]
        tap, shift, status = row[8], row[9], row[10]
        if tap not in (0.0, 1.0) or shift != 0.0:
            raise ValidationError(f"branch {f}-{t}: off-nominal tap/shift unsupported")
        branches.append(Branch(from_node=f, to_node=t,
                               series_impedance=r + 1j * x,
                               total_charging=1j * b,
                               in_service=status != 0))

    v0_mag = vm_of.get(slack_id) or 1.0
    for row in matrices.get("gen", []):
        if len(row) < _GEN_MIN_COLS:
            raise ParseError(f"gen row has {len(row)} columns, expected >= {_GEN_MIN_COLS}")
        if int(row[0]) == slack_id and row[5] > 0:
            v0_mag = row[5]
    v0 = v0_mag * complex(math.cos(math.radians(va_of.get(slack_id, 0.0))),
                          math.sin(math.radians(va_of.get(slack_id, 0.0))))

    case = NetworkCase(name=name or "case", base_power=base_mva,
                       base_voltage=base_kv_of.get(slack_id, 1.0),
                       slack_id=slack_id, slack_v0=v0,
                       buses=buses, branches=branches)
    case.validate()
    return case


# ---------------------------------------------------------------------------
# Native JSON format

def _cplx(value, what):
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ParseError(f"{what} must be a [re, im] pair")
    try:
        return complex(float(value[0]), float(value[1]))
    except (TypeError, ValueError):
        raise ParseError(f"{what} has non-numeric parts: {value!r}")


def _pair(z: complex):
    return [z.real, z.imag]


def _branch_from_obj(obj, what):
    for key in ("from", "to", "series_impedance"):
        if key not in obj:
            raise ParseError(f"{what} missing field {key!r}")
    return Branch(from_node=int(obj["from"]), to_node=int(obj["to"]),
                  series_impedance=_cplx(obj["series_impedance"], f"{what}.series_impedance"),
                  total_charging=_cplx(obj.get("total_charging", [0, 0]), f"{what}.total_charging"),
                  in_service=bool(obj.get("in_service", True)))


def _branch_to_obj(br: Branch):
    return {"from": br.from_node, "to": br.to_node,
            "series_impedance": _pair(br.series_impedance),
            "total_charging": _pair(br.total_charging),
            "in_service": br.in_service}


def _scenario_from_obj(obj) -> Scenario:
    split = obj.get("zip_split")
    scenario = Scenario(name=obj.get("name", "scenario"),
                        lambda_P=float(obj.get("lambda_P", 1.0)),
                        lambda_I=float(obj.get("lambda_I", 1.0)),
                        lambda_Z=float(obj.get("lambda_Z", 1.0)),
                        tie_branches=[_branch_from_obj(b, "tie branch")
                                      for b in obj.get("tie_branches", [])],
                        zip_split=tuple(split) if split is not None else None)
    scenario.validate()
    return scenario


def _scenario_to_obj(s: Scenario):
    return {"name": s.name, "lambda_P": s.lambda_P, "lambda_I": s.lambda_I,
            "lambda_Z": s.lambda_Z,
            "tie_branches": [_branch_to_obj(b) for b in s.tie_branches],
            "zip_split": list(s.zip_split) if s.zip_split is not None else None}


def load_case_native(text: str) -> NetworkCase:
    """Parse a native JSON case document (embedded scenario is not applied)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno)
    if not isinstance(doc, dict) or "meta" not in doc:
        raise ParseError("native case document must be an object with a 'meta' section")
    meta = doc["meta"]
    for key in ("name", "base_mva", "slack_id", "slack_v0_re", "slack_v0_im"):
        if key not in meta:
            raise ParseError(f"meta section missing field {key!r}")
    if "buses" not in doc or "branches" not in doc:
        raise ParseError("native case document missing 'buses' or 'branches'")
    buses = []
    for k, obj in enumerate(doc["buses"]):
        if "id" not in obj:
            raise ParseError(f"bus #{k} missing field 'id'")
        buses.append(Bus(id=int(obj["id"]),
                         load_P=_cplx(obj.get("load_P", [0, 0]), "load_P"),
                         load_I=_cplx(obj.get("load_I", [0, 0]), "load_I"),
                         load_Z=_cplx(obj.get("load_Z", [0, 0]), "load_Z"),
                         shunt=_cplx(obj.get("shunt", [0, 0]), "shunt")))
    branches = [_branch_from_obj(obj, f"branch #{k}")
                for k, obj in enumerate(doc["branches"])]
    case = NetworkCase(name=str(meta["name"]),
                       base_power=float(meta["base_mva"]),
                       base_voltage=float(meta.get("base_kv", 1.0)),
                       slack_id=int(meta["slack_id"]),
                       slack_v0=complex(float(meta["slack_v0_re"]),
                                        float(meta["slack_v0_im"])),
                       buses=buses, branches=branches)
    case.validate()
    return case


def serialize_case_native(case: NetworkCase, scenario: Scenario = None) -> str:
    doc = {
        "meta": {"name": case.name, "base_mva": case.base_power,
                 "base_kv": case.base_voltage, "slack_id": case.slack_id,
                 "slack_v0_re": case.slack_v0.real,
                 "slack_v0_im": case.slack_v0.imag},
        "buses": [{"id": b.id, "load_P": _pair(b.load_P), "load_I": _pair(b.load_I),
                   "load_Z": _pair(b.load_Z), "shunt": _pair(b.shunt)}
                  for b in case.buses],
        "branches": [_branch_to_obj(br) for br in case.branches],
    }
    if scenario is not None:
        doc["scenario"] = _scenario_to_obj(scenario)
    return json.dumps(doc, indent=1)


def load_scenario(text: str) -> Scenario:
    """Parse a scenario document (standalone or the section of a case file)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno)
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a JSON object")
    if "scenario" in doc:
        doc = doc["scenario"]
    return _scenario_from_obj(doc)


def serialize_scenario(scenario: Scenario) -> str:
    return json.dumps(_scenario_to_obj(scenario), indent=1)


# ---------------------------------------------------------------------------
# Scenario application

def split_zip_load(case: NetworkCase, fractions) -> NetworkCase:
    """Re-split each PQ bus's nominal load into ZIP fractions.

    The nominal aggregate is the sum of the components' nominal power
    allocations; the returned case assigns fraction f_P of it as constant
    power, f_I as constant current (stored as (S/V_nom)*) and f_Z as
    constant impedance (stored as conj(S)/|V_nom|^2).
    """
    f_p, f_i, f_z = fractions
    buses = []
    for bus in case.buses:
        if bus.id == case.slack_id:
            buses.append(dataclasses.replace(bus))
            continue
        s_nom = bus.load_P + (bus.load_I * NOMINAL_V.conjugate()).conjugate() \
            + bus.load_Z.conjugate() * abs(NOMINAL_V) ** 2
        buses.append(dataclasses.replace(
            bus,
            load_P=f_p * s_nom,
            load_I=(f_i * s_nom / NOMINAL_V).conjugate(),
            load_Z=(f_z * s_nom).conjugate() / abs(NOMINAL_V) ** 2))
    return dataclasses.replace(case, buses=buses)


def apply_scenario(case: NetworkCase, scenario: Scenario) -> NetworkCase:
    """Return a new case with scaled ZIP components and appended ties.

    Without ``zip_split`` this is purely multiplicative, so applying
    scenarios with multipliers lam then mu equals applying lam*mu.
    """
    scenario.validate()
    base = split_zip_load(case, scenario.zip_split) if scenario.zip_split else case
    ids = set(case.bus_ids())
    for tie in scenario.tie_branches:
        if tie.from_node not in ids or tie.to_node not in ids:
            raise ValidationError(
                f"tie branch {tie.from_node}-{tie.to_node} references unknown node")
    buses = []
    for bus in base.buses:
        buses.append(dataclasses.replace(
            bus,
            load_P=scenario.lambda_P * bus.load_P,
            load_I=scenario.lambda_I * bus.load_I,
            load_Z=scenario.lambda_Z * bus.load_Z))
    branches = [dataclasses.replace(br) for br in base.branches]
    branches += [dataclasses.replace(t) for t in scenario.tie_branches]
    name = base.name if scenario.name == "scenario" else f"{base.name}+{scenario.name}"
    return dataclasses.replace(base, name=name, buses=buses, branches=branches)
