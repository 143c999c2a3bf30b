"""Regenerate the bundled case files under ``src/microgrid_tc/data``.

Usage: python3 scripts/build_cases.py
"""
import csv
import json
from pathlib import Path

import numpy as np

from microgrid_tc.io.bundle import CaseBundle, CaseOptions, write_bundle
from microgrid_tc.io.synthetic import DEMAND_PROFILE, IRRADIANCE, PRICE, WIND_CUTOUT, WIND_NOMINAL, synthetic_feeder_123, wind_speed_profile

DATA = Path(__file__).resolve().parents[1] / "src" / "microgrid_tc" / "data"

BASE_POWER = 100e3
BASE_VOLTAGE = 400.0 / np.sqrt(3.0)
Z_BASE = BASE_VOLTAGE**2 / BASE_POWER
UG1 = 0.162 + 0.0832j  # ohm/km, positive sequence
UG3 = 0.822 + 0.0847j


def cable(z1_per_km, metres):
    """Phase admittance of a cable with zero-sequence impedance 4 x positive."""
    z1 = z1_per_km * metres / 1000.0 / Z_BASE
    z = np.full((3, 3), z1) + np.eye(3) * z1
    return np.linalg.inv(z)


def transformer():
    return np.eye(3) / ((0.0032 + 0.0128j) / Z_BASE)


def branch(a, b, y):
    return {"id": f"{a}-{b}", "from": a, "to": b,
            "admittance": {"unit": "pu", "real": np.round(y.real, 9).tolist(), "imag": np.round(y.imag, 9).tolist()}}


def cigre():
    out = DATA / "cigre"
    out.mkdir(parents=True, exist_ok=True)
    r = lambda i: str(i + 1)  # bus R_i is hypernode i + 1; hypernode 1 is the transformer primary
    branches = [branch("1", "2", transformer())]
    branches += [branch(r(i), r(i + 1), cable(UG1, 35)) for i in range(1, 10)]
    branches += [branch(r(3), r(11), cable(UG3, 30)), branch(r(4), r(12), cable(UG1, 35)),
                 branch(r(12), r(13), cable(UG1, 35)), branch(r(13), r(14), cable(UG1, 35)),
                 branch(r(14), r(15), cable(UG3, 30)), branch(r(6), r(16), cable(UG3, 30)),
                 branch(r(9), r(17), cable(UG3, 30)), branch(r(10), r(18), cable(UG3, 30))]
    network = {
        "name": "cigre-lv-19",
        "base_power": {"value": BASE_POWER, "unit": "VA", "note": "per phase"},
        "base_voltage": {"value": round(BASE_VOLTAGE, 6), "unit": "V", "note": "line to neutral"},
        "v_nom": {"value": 1.0, "unit": "pu"},
        "slack": "1",
        "nodes": [{"id": str(k), "phases": "ABC"} for k in range(1, 20)],
        "branches": branches,
    }
    shares = {"11": (0.34, 0.33, 0.33), "13": (0.40, 0.30, 0.30), "14": (0.30, 0.40, 0.30),
              "18": (0.30, 0.30, 0.40), "19": (0.35, 0.35, 0.30)}
    table = [("11", 13400, 2), ("13", 47000, 0), ("14", 40000, 2), ("18", 70900, 0), ("19", 15600, 1)]
    loss = {"a": {"value": 2e-6, "unit": "1/W"}, "b": {"value": 0.02, "unit": "1"}, "c": {"value": 5.0, "unit": "W"}}
    devices = {
        "loads": [{"id": f"L{n}", "node": n, "alpha": a, "unit": "W", "peak": p, "power_factor": 0.95,
                   "phase_shares": dict(zip("ABC", shares[n]))} for n, p, a in table],
        "pv": [{"id": f"PV{n}", "node": n, "rho": {"value": 30.0, "unit": "W/(W/m^2)"},
                "s_max": {"value": 33000.0, "unit": "VA"}} for n in ("11", "13", "14", "18", "19")],
        "wind": [{"id": f"WT{n}", "node": n, "p_nom": {"value": 65000.0, "unit": "W"},
                  "w_nom": {"value": WIND_NOMINAL, "unit": "m/s"}, "w_max": {"value": WIND_CUTOUT, "unit": "m/s"},
                  "s_max": {"value": 72000.0, "unit": "VA"}} for n in ("15", "17")],
        "batteries": [{"id": f"B{n}", "node": n, "e_min": {"value": 19000.0, "unit": "Wh"},
                       "e_max": {"value": 38000.0, "unit": "Wh"}, "e_init": {"value": 19000.0, "unit": "Wh"},
                       "p_char_max": {"value": 12000.0, "unit": "W"}, "p_disch_max": {"value": 12000.0, "unit": "W"},
                       "s_max": {"value": 15000.0, "unit": "VA"}, "loss_char": loss, "loss_disch": loss}
                      for n in ("11", "13", "14", "18", "19")],
    }
    provenance = {
        "topology": "CIGRE LV residential benchmark, buses R1-R18 mapped to hypernodes 2-19",
        "line_impedances": "CIGRE UG1/UG3 positive-sequence data, zero sequence taken as 4x positive",
        "transformer": "CIGRE 20/0.4 kV transformer referred to the LV side",
        "loads": "published peak demand and alpha per node; pf 0.95 and phase shares synthetic",
        "price": "published 24 h real-time price series",
        "demand_scale": "published 24 h demand curve divided by its 186.9 kW peak",
        "irradiance": "reconstructed from the published PV availability curve (150 kW at 1000 W/m^2)",
        "wind_speed": "reconstructed from the published wind availability curve via the cubic power law",
        "pv": "5 x 30 kW at the load nodes; placement and converter rating synthetic",
        "wind": "2 x 65 kW (130 kW rated); placement and converter rating synthetic",
        "batteries": "energy window 19-38 kWh from the published SOC curves; power rating synthetic",
        "battery_loss_coefficients": "SYNTHETIC: not published",
    }
    manifest = {
        "name": "cigre",
        "files": {"network": "network.json", "devices": "devices.json", "timeseries": "timeseries.csv"},
        "scenario": {"case": 1, "delta": 0.1, "reserve_tau": None, "horizon": 24, "dt": {"value": 1.0, "unit": "h"}},
        "provenance": provenance,
    }
    dump = lambda obj: json.dumps(obj, indent=1) + "\n"
    (out / "case.json").write_text(dump(manifest))
    (out / "network.json").write_text(dump(network))
    (out / "devices.json").write_text(dump(devices))
    with open(out / "timeseries.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "price[$/kWh]", "demand_scale[1]", "wind_speed[m/s]", "irradiance[W/m^2]"])
        for t, row in enumerate(zip(PRICE, DEMAND_PROFILE, wind_speed_profile(), IRRADIANCE)):
            w.writerow([t] + [repr(round(float(v), 12)) for v in row])


def ieee123():
    net, fleet, series, provenance = synthetic_feeder_123()
    bundle = CaseBundle("ieee123", net, fleet, series, CaseOptions(horizon=24), provenance)
    write_bundle(bundle, DATA / "ieee123")


if __name__ == "__main__":
    cigre()
    ieee123()
