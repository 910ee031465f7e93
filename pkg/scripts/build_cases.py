#!/usr/bin/env python3
"""Generate the bundled case and scenario files under src/radialhelm/cases/.

Deterministic. The 33- and 69-bus feeders are reconstructions from the
widely published branch/load tables (ohms and kW at 12.66 kV); the 18-,
141- and 123-bus feeders are synthesized radial feeders of matching size,
the last with a full ZIP mix tuned so that the heavy constant-impedance
scenario defeats the sweep-style fixed point while factored-matrix methods
still converge.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import radialhelm as rh
from radialhelm.ingest import Scenario, serialize_case_native, serialize_scenario

CASES_DIR = Path(__file__).resolve().parents[1] / "src" / "radialhelm" / "cases"

# ---------------------------------------------------------------------------
# 33-bus feeder (branch R/X in ohms, loads in kW/kvar at the to-bus)

BW33_KV = 12.66
BW33 = [
    # (from, to, R_ohm, X_ohm, P_kW, Q_kvar)
    (1, 2, 0.0922, 0.0470, 100, 60),
    (2, 3, 0.4930, 0.2511, 90, 40),
    (3, 4, 0.3660, 0.1864, 120, 80),
    (4, 5, 0.3811, 0.1941, 60, 30),
    (5, 6, 0.8190, 0.7070, 60, 20),
    (6, 7, 0.1872, 0.6188, 200, 100),
    (7, 8, 0.7114, 0.2351, 200, 100),
    (8, 9, 1.0300, 0.7400, 60, 20),
    (9, 10, 1.0440, 0.7400, 60, 20),
    (10, 11, 0.1966, 0.0650, 45, 30),
    (11, 12, 0.3744, 0.1238, 60, 35),
    (12, 13, 1.4680, 1.1550, 60, 35),
    (13, 14, 0.5416, 0.7129, 120, 80),
    (14, 15, 0.5910, 0.5260, 60, 10),
    (15, 16, 0.7463, 0.5450, 60, 20),
    (16, 17, 1.2890, 1.7210, 60, 20),
    (17, 18, 0.7320, 0.5740, 90, 40),
    (2, 19, 0.1640, 0.1565, 90, 40),
    (19, 20, 1.5042, 1.3554, 90, 40),
    (20, 21, 0.4095, 0.4784, 90, 40),
    (21, 22, 0.7089, 0.9373, 90, 40),
    (3, 23, 0.4512, 0.3083, 90, 50),
    (23, 24, 0.8980, 0.7091, 420, 200),
    (24, 25, 0.8960, 0.7011, 420, 200),
    (6, 26, 0.2030, 0.1034, 60, 25),
    (26, 27, 0.2842, 0.1447, 60, 25),
    (27, 28, 1.0590, 0.9337, 60, 20),
    (28, 29, 0.8042, 0.7006, 120, 70),
    (29, 30, 0.5075, 0.2585, 200, 600),
    (30, 31, 0.9744, 0.9630, 150, 70),
    (31, 32, 0.3105, 0.3619, 210, 100),
    (32, 33, 0.3410, 0.5302, 60, 40),
]

# tie switches of the same feeder (ohms); used for the meshed variant
BW33_TIES = [(8, 21, 2.0, 2.0), (12, 22, 2.0, 2.0), (25, 29, 0.5, 0.5)]

# ---------------------------------------------------------------------------
# 69-bus feeder

BW69_KV = 12.66
BW69 = [
    (1, 2, 0.0005, 0.0012, 0, 0),
    (2, 3, 0.0005, 0.0012, 0, 0),
    (3, 4, 0.0015, 0.0036, 0, 0),
    (4, 5, 0.0251, 0.0294, 0, 0),
    (5, 6, 0.3660, 0.1864, 2.6, 2.2),
    (6, 7, 0.3811, 0.1941, 40.4, 30),
    (7, 8, 0.0922, 0.0470, 75, 54),
    (8, 9, 0.0493, 0.0251, 30, 22),
    (9, 10, 0.8190, 0.2707, 28, 19),
    (10, 11, 0.1872, 0.0619, 145, 104),
    (11, 12, 0.7114, 0.2351, 145, 104),
    (12, 13, 1.0300, 0.3400, 8, 5),
    (13, 14, 1.0440, 0.3450, 8, 5.5),
    (14, 15, 1.0580, 0.3496, 0, 0),
    (15, 16, 0.1966, 0.0650, 45.5, 30),
    (16, 17, 0.3744, 0.1238, 60, 35),
    (17, 18, 0.0047, 0.0016, 60, 35),
    (18, 19, 0.3276, 0.1083, 0, 0),
    (19, 20, 0.2106, 0.0690, 1, 0.6),
    (20, 21, 0.3416, 0.1129, 114, 81),
    (21, 22, 0.0140, 0.0046, 5, 3.5),
    (22, 23, 0.1591, 0.0526, 0, 0),
    (23, 24, 0.3463, 0.1145, 28, 20),
    (24, 25, 0.7488, 0.2475, 0, 0),
    (25, 26, 0.3089, 0.1021, 14, 10),
    (26, 27, 0.1732, 0.0572, 14, 10),
    (3, 28, 0.0044, 0.0108, 26, 18.6),
    (28, 29, 0.0640, 0.1565, 26, 18.6),
    (29, 30, 0.3978, 0.1315, 0, 0),
    (30, 31, 0.0702, 0.0232, 0, 0),
    (31, 32, 0.3510, 0.1160, 0, 0),
    (32, 33, 0.8390, 0.2816, 14, 10),
    (33, 34, 1.7080, 0.5646, 19.5, 14),
    (34, 35, 1.4740, 0.4873, 6, 4),
    (3, 36, 0.0044, 0.0108, 26, 18.55),
    (36, 37, 0.0640, 0.1565, 26, 18.55),
    (37, 38, 0.1053, 0.1230, 0, 0),
    (38, 39, 0.0304, 0.0355, 24, 17),
    (39, 40, 0.0018, 0.0021, 24, 17),
    (40, 41, 0.7283, 0.8509, 1.2, 1),
    (41, 42, 0.3100, 0.3623, 0, 0),
    (42, 43, 0.0410, 0.0478, 6, 4.3),
    (43, 44, 0.0092, 0.0116, 0, 0),
    (44, 45, 0.1089, 0.1373, 39.22, 26.3),
    (45, 46, 0.0009, 0.0012, 39.22, 26.3),
    (4, 47, 0.0034, 0.0084, 0, 0),
    (47, 48, 0.0851, 0.2083, 79, 56.4),
    (48, 49, 0.2898, 0.7091, 384.7, 274.5),
    (49, 50, 0.0822, 0.2011, 384.7, 274.5),
    (8, 51, 0.0928, 0.0473, 40.5, 28.3),
    (51, 52, 0.3319, 0.1114, 3.6, 2.7),
    (9, 53, 0.1740, 0.0886, 4.35, 3.5),
    (53, 54, 0.2030, 0.1034, 26.4, 19),
    (54, 55, 0.2842, 0.1447, 24, 17.2),
    (55, 56, 0.2813, 0.1433, 0, 0),
    (56, 57, 1.5900, 0.5337, 0, 0),
    (57, 58, 0.7837, 0.2630, 0, 0),
    (58, 59, 0.3042, 0.1006, 100, 72),
    (59, 60, 0.3861, 0.1172, 0, 0),
    (60, 61, 0.5075, 0.2585, 1244, 888),
    (61, 62, 0.0974, 0.0496, 32, 23),
    (62, 63, 0.1450, 0.0738, 0, 0),
    (63, 64, 0.7105, 0.3619, 227, 162),
    (64, 65, 1.0410, 0.5302, 59, 42),
    (11, 66, 0.2012, 0.0611, 18, 13),
    (66, 67, 0.0047, 0.0014, 18, 13),
    (12, 68, 0.7394, 0.2444, 28, 20),
    (68, 69, 0.0047, 0.0016, 28, 20),
]

BW69_TIES = [(13, 21, 0.5, 0.5), (15, 46, 1.0, 0.5), (50, 59, 2.0, 1.0)]


def write_matpower(path, name, base_mva, base_kv, rows, shunts=None):
    """rows: (from, to, R_ohm, X_ohm, P_kW, Q_kvar [to-bus]); bus 1 is slack."""
    z_base = base_kv ** 2 / base_mva
    load = {}
    nodes = {1}
    for f, t, _, _, p, q in rows:
        nodes.update((f, t))
        load[t] = (p / 1000.0, q / 1000.0)
    shunts = shunts or {}
    lines = [f"function mpc = {name}",
             "mpc.version = '2';",
             f"mpc.baseMVA = {base_mva};",
             "",
             "%% bus data",
             "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
             "mpc.bus = ["]
    for n in sorted(nodes):
        p, q = load.get(n, (0.0, 0.0))
        gs, bs = shunts.get(n, (0.0, 0.0))
        btype = 3 if n == 1 else 1
        lines.append(f"\t{n}\t{btype}\t{p:.6g}\t{q:.6g}\t{gs:.6g}\t{bs:.6g}"
                     f"\t1\t1\t0\t{base_kv}\t1\t1.1\t0.9;")
    lines += ["];", "", "%% generator data",
              "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin",
              "mpc.gen = [",
              f"\t1\t0\t0\t999\t-999\t1\t{base_mva}\t1\t999\t-999;",
              "];", "", "%% branch data",
              "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus",
              "mpc.branch = ["]
    for f, t, r_ohm, x_ohm, _, _ in rows:
        r, x = r_ohm / z_base, x_ohm / z_base
        lines.append(f"\t{f}\t{t}\t{r:.9g}\t{x:.9g}\t0\t999\t999\t999\t0\t0\t1;")
    lines += ["];", ""]
    path.write_text("\n".join(lines))


def synth_feeder(n_buses, seed, r_range, x_ratio, p_range_kw, pf=0.9,
                 lateral_every=4, lateral_len=3):
    """Deterministic radial feeder: a trunk with periodic laterals."""
    rng = np.random.default_rng(seed)
    rows = []
    nodes = [1]
    trunk = [1]
    next_id = 2

    def new_branch(f, t):
        r = rng.uniform(*r_range)
        x = r * rng.uniform(*x_ratio)
        p = rng.uniform(*p_range_kw)
        q = p * np.tan(np.arccos(pf))
        rows.append((f, t, r, x, p, q))

    while next_id <= n_buses:
        new_branch(trunk[-1], next_id)
        trunk.append(next_id)
        nodes.append(next_id)
        next_id += 1
        if len(trunk) % lateral_every == 0:
            head = trunk[-1]
            for _ in range(lateral_len):
                if next_id > n_buses:
                    break
                new_branch(head, next_id)
                nodes.append(next_id)
                head = next_id
                next_id += 1
    return rows


def build_zip_feeder(n_buses, seed, base_mva, base_kv):
    """123-bus-class radial feeder with per-bus ZIP mix, returned as a case.

    Loads are normalised so that the spectral radius of DLF * diag(y_Z)
    with the full nominal load as constant impedance sits between 1/60 and
    1/40: the heavy constant-impedance scenario (x60) then defeats the
    current-folded sweep/direct fixed point while x40 still contracts.
    """
    rng = np.random.default_rng(seed)
    rows = synth_feeder(n_buses, seed, r_range=(0.02, 0.09), x_ratio=(0.5, 0.9),
                        p_range_kw=(20.0, 90.0), pf=0.88,
                        lateral_every=3, lateral_len=4)
    z_base = base_kv ** 2 / base_mva
    branches = [rh.Branch(f, t, complex(r / z_base, x / z_base)) for f, t, r, x, _, _ in rows]
    s_nom = {t: complex(p, q) / (base_mva * 1000.0) for _, t, _, _, p, q in rows}

    # normalise the aggregate so rho(DLF @ diag(conj(S_nom))) ~ 0.0208
    buses = [rh.Bus(id=1)] + [rh.Bus(id=t, load_Z=np.conj(s)) for t, s in sorted(s_nom.items())]
    probe = rh.NetworkCase("probe", base_mva, base_kv, 1, 1 + 0j, buses, branches)
    inc = rh.build_incidence(probe)
    reduced = (inc.A_tilde @ np.diag(inc.branch_admittances()) @ inc.A_tilde.T.toarray())
    dlf = np.linalg.inv(np.asarray(reduced))
    y_z = np.array([np.conj(s_nom[b.id]) for b in probe.pq_buses()])
    rho = float(np.max(np.abs(np.linalg.eigvals(dlf @ np.diag(y_z)))))
    scale = 0.0208 / rho

    split = (0.4, 0.3, 0.3)
    buses = [rh.Bus(id=1)]
    for t in sorted(s_nom):
        s = s_nom[t] * scale
        buses.append(rh.Bus(id=t,
                            load_P=split[0] * s,
                            load_I=np.conj(split[1] * s),
                            load_Z=np.conj(split[2] * s),
                            shunt=1j * 2e-5 * rng.uniform(0.0, 1.0)))
    case = rh.NetworkCase("feeder123zip", base_mva, base_kv, 1, 1 + 0j,
                          buses, branches)
    case.validate()
    return case


def tie_scenario(name, ties, z_base):
    return Scenario(name=name, tie_branches=[
        rh.Branch(f, t, complex(r / z_base, x / z_base)) for f, t, r, x in ties])


def main():
    CASES_DIR.mkdir(parents=True, exist_ok=True)

    write_matpower(CASES_DIR / "case33.m", "case33", 100.0, BW33_KV, BW33)
    write_matpower(CASES_DIR / "case69.m", "case69", 10.0, BW69_KV, BW69)

    rows18 = synth_feeder(18, seed=181, r_range=(0.25, 0.85), x_ratio=(0.6, 1.0),
                          p_range_kw=(60.0, 220.0), pf=0.9,
                          lateral_every=4, lateral_len=3)
    write_matpower(CASES_DIR / "case18.m", "case18", 10.0, 12.5, rows18,
                   shunts={6: (0.0, 0.3), 12: (0.0, 0.2)})

    rows141 = synth_feeder(141, seed=1411, r_range=(0.03, 0.12), x_ratio=(0.5, 0.9),
                           p_range_kw=(15.0, 60.0), pf=0.9,
                           lateral_every=5, lateral_len=4)
    write_matpower(CASES_DIR / "case141.m", "case141", 10.0, 12.47, rows141)

    zipcase = build_zip_feeder(123, seed=1231, base_mva=10.0, base_kv=12.47)
    (CASES_DIR / "feeder123zip.json").write_text(serialize_case_native(zipcase))

    # weakly meshed variants: tie branches on top of the radial feeders
    for name, ties, kv, mva in (
        ("33w", BW33_TIES, BW33_KV, 100.0),
        ("69w", BW69_TIES, BW69_KV, 10.0),
    ):
        z_base = kv ** 2 / mva
        (CASES_DIR / f"{name}.json").write_text(
            serialize_scenario(tie_scenario(name, ties, z_base)))
    z18 = 12.5 ** 2 / 10.0
    (CASES_DIR / "18w.json").write_text(serialize_scenario(
        tie_scenario("18w", [(5, 12, 1.2, 1.0), (9, 16, 1.5, 1.2)], z18)))

    # loading scenarios for the ZIP feeder (composite and single-component)
    scens = [
        Scenario(name="zip_medium", lambda_P=4, lambda_I=20, lambda_Z=40),
        Scenario(name="zip_high", lambda_P=7, lambda_I=50, lambda_Z=60),
        Scenario(name="cp_medium", lambda_P=4, zip_split=(1, 0, 0)),
        Scenario(name="cp_high", lambda_P=7, zip_split=(1, 0, 0)),
        Scenario(name="cc_medium", lambda_I=20, zip_split=(0, 1, 0)),
        Scenario(name="cc_high", lambda_I=50, zip_split=(0, 1, 0)),
        Scenario(name="ci_medium", lambda_Z=40, zip_split=(0, 0, 1)),
        Scenario(name="ci_high", lambda_Z=60, zip_split=(0, 0, 1)),
    ]
    for s in scens:
        (CASES_DIR / f"{s.name}.json").write_text(serialize_scenario(s))

    # quick self-check of everything written
    from radialhelm.cli import load_case
    import os
    os.environ["RADIAL_HELM_SEED_CASES"] = str(CASES_DIR)
    for name in ("case18", "case33", "case69", "case141", "feeder123zip"):
        case, _ = load_case(name)
        rep = rh.solve_helm(case, "lu")
        vmin = np.min(np.abs(rep.voltages))
        print(f"{name:13s} buses={len(case.buses):3d} {rep.status:12s} "
              f"orders={rep.orders_or_iterations:2d} min|V|={vmin:.4f} "
              f"mismatch={rep.max_mismatch:.1e}")


if __name__ == "__main__":
    main()
