"""Seeded generators for random networks and the IEEE-123-scale feeder.

The 123-hypernode feeder is synthetic: a radial tree with a three-phase
trunk and single- and two-phase laterals, built from typical overhead line
impedances. It reproduces the scale of the IEEE 123-node feeder and the
demand, PV, wind and battery magnitudes used with it, not its exact topology.
"""
import numpy as np

from ..devices import Battery, DeviceFleet, ExponentialLoad, PvUnit, TimeSeriesSet, WindTurbine
from ..network import PHASES, HyperBranch, ThreePhaseNetwork

# hourly series shared by the bundled cases
PRICE = np.array([0.10165, 0.10165, 0.10165, 0.10115, 0.10165, 0.10165, 0.10165, 0.10165, 0.11322, 0.11322,
                  0.11322, 0.13236, 0.13236, 0.11322, 0.11322, 0.11322, 0.11322, 0.11322, 0.13236, 0.13236,
                  0.11322, 0.11322, 0.11322, 0.10165])
DEMAND_PROFILE = np.array([56.070, 56.070, 46.725, 46.725, 56.070, 65.415, 84.105, 102.795, 121.485, 130.830,
                           140.175, 149.520, 140.175, 140.175, 140.175, 140.175, 130.830, 130.830, 158.865,
                           186.900, 158.865, 121.485, 102.795, 65.415]) / 186.9
IRRADIANCE = np.array([0, 0, 0, 0, 0, 0, 200, 400, 600, 800, 950, 1000, 900, 850, 800, 600, 400, 200,
                       0, 0, 0, 0, 0, 0], dtype=float)
WIND_NOMINAL = 12.0
WIND_CUTOUT = 25.0


def wind_speed_profile():
    """Speeds whose cubic availability matches the published rated fractions."""
    fraction = np.ones(24)
    fraction[[6, 7, 11]] = 0.9
    fraction[8] = 0.6
    fraction[9] = 0.8
    fraction[10] = 0.5
    return np.where(fraction < 1.0, WIND_NOMINAL * fraction, WIND_NOMINAL + 1.0)


def random_passive_admittance(rng, active=None, scale=1.0):
    """3x3 admittance with positive-definite Hermitian part, zero on inactive phases."""
    active = np.ones(3, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    k = int(active.sum())
    a = rng.normal(size=(k, k))
    r = a @ a.T / k + 0.2 * np.eye(k)
    b = rng.normal(size=(k, k))
    x = 0.5 * (b + b.T) + 2.0 * np.eye(k)
    z = (r + 1j * x) * scale
    y = np.zeros((3, 3), dtype=complex)
    y[np.ix_(active, active)] = np.linalg.inv(z)
    return y


def random_network(rng, n_nodes, partial_phase_prob=0.0, extra_edges=0, impedance_scale=0.01):
    """Connected random network: a random tree plus ``extra_edges`` chords.

    Non-slack nodes lose phases with probability ``partial_phase_prob``; a
    node keeps a subset of its parent's phases so every branch is valid.
    """
    ids = [str(i) for i in range(n_nodes)]
    phases = {0: PHASES}
    parent = {}
    for i in range(1, n_nodes):
        p = int(rng.integers(0, i))
        parent[i] = p
        ph = phases[p]
        if len(ph) > 1 and rng.random() < partial_phase_prob:
            keep = int(rng.integers(1, len(ph)))
            ph = "".join(sorted(rng.choice(list(ph), size=keep, replace=False)))
        phases[i] = ph
    edges = [(parent[i], i) for i in range(1, n_nodes)]
    pairs = [(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes) if (i, j) not in edges]
    rng.shuffle(pairs)
    for i, j in pairs:
        if extra_edges <= 0:
            break
        if set(phases[i]) & set(phases[j]):
            edges.append((i, j))
            extra_edges -= 1
    branches = []
    for i, j in edges:
        active = np.array([(c in phases[i]) and (c in phases[j]) for c in PHASES])
        y = random_passive_admittance(rng, active, impedance_scale * rng.uniform(0.5, 2.0))
        branches.append(HyperBranch(ids[i], ids[j], y, f"{ids[i]}-{ids[j]}"))
    mask = {ids[i]: ph for i, ph in phases.items() if ph != PHASES}
    return ThreePhaseNetwork(ids, branches, phases=mask, name=f"random-{n_nodes}")


def random_fleet(rng, net, horizon, load_scale=0.05, alphas=(0.0, 0.5, 1.0, 1.5, 2.0), n_pv=0, n_wind=0, n_bat=0):
    loads = []
    for node in net.node_ids[1:]:
        for ph in net.phases.get(node, PHASES):
            s = load_scale * rng.uniform(0.2, 1.0) * complex(1.0, rng.uniform(0.0, 0.5))
            loads.append(ExponentialLoad(node, s * rng.uniform(0.5, 1.0, size=horizon), float(rng.choice(alphas)),
                                         ph, f"L{node}:{ph}"))
    pick = lambda: str(rng.choice(net.node_ids[1:]))
    pv = [PvUnit(pick(), load_scale * 1e-3, 2 * load_scale, f"PV{k}") for k in range(n_pv)]
    wind = [WindTurbine(pick(), load_scale, WIND_NOMINAL, WIND_CUTOUT, 1.2 * load_scale, f"WT{k}") for k in range(n_wind)]
    bats = [Battery(pick(), load_scale, 4 * load_scale, load_scale, (0.5, 0.02, 1e-4), (0.5, 0.02, 1e-4),
                    load_scale, load_scale, 1.5 * load_scale, f"B{k}") for k in range(n_bat)]
    return DeviceFleet(loads, pv, wind, bats)


# overhead line impedances in ohm per mile
_Z3 = np.array([[0.3465 + 1.0179j, 0.1560 + 0.5017j, 0.1580 + 0.4236j],
                [0.1560 + 0.5017j, 0.3375 + 1.0478j, 0.1535 + 0.3849j],
                [0.1580 + 0.4236j, 0.1535 + 0.3849j, 0.3414 + 1.0348j]])
_Z1 = 1.3292 + 1.3475j
_FEET_PER_MILE = 5280.0


def _line_admittance(phases_active, length_ft, z_base):
    active = np.array([c in phases_active for c in PHASES])
    miles = length_ft / _FEET_PER_MILE
    if active.all():
        z = _Z3 * miles
    else:
        k = int(active.sum())
        z = _Z3[np.ix_(active, active)] * miles if k > 1 else np.array([[_Z1 * miles]])
    y = np.zeros((3, 3), dtype=complex)
    y[np.ix_(active, active)] = np.linalg.inv(z / z_base)
    return y


def synthetic_feeder_123(seed=123):
    """Deterministic 123-hypernode radial feeder (plus the substation slack).

    Returns ``(network, fleet, series, provenance)`` in per unit with a
    1 MVA per-phase base and 4.16 kV line-to-line nominal voltage.
    """
    rng = np.random.default_rng(seed)
    base_power = 1e6
    base_voltage = 4160.0 / np.sqrt(3.0)
    z_base = base_voltage**2 / base_power
    n_trunk, n_total = 45, 123
    ids = ["150"] + [str(k) for k in range(1, n_total + 1)]
    phases = {0: PHASES}
    branches = []

    def connect(child, parent, length):
        shared = "".join(c for c in phases[parent] if c in phases[child])
        y = _line_admittance(shared, length, z_base)
        branches.append(HyperBranch(ids[parent], ids[child], y, f"{ids[parent]}-{ids[child]}"))

    for k in range(1, n_trunk + 1):
        phases[k] = PHASES
        parent = 0 if k == 1 else int(rng.integers(max(1, k - 4), k))
        connect(k, parent, 600.0 if k == 1 else rng.uniform(150.0, 350.0))
    k = n_trunk + 1
    while k <= n_total:
        root = int(rng.integers(2, n_trunk + 1))
        if rng.random() < 0.25:
            ph = "".join(sorted(rng.choice(list(PHASES), size=2, replace=False)))
        else:
            ph = PHASES[(k - n_trunk) % 3]
        prev = root
        for _ in range(int(rng.integers(2, 6))):
            if k > n_total:
                break
            phases[k] = ph
            connect(k, prev, rng.uniform(100.0, 300.0))
            prev = k
            k += 1
    net = ThreePhaseNetwork(ids, branches, base_power, base_voltage, 1.0,
                            {ids[i]: ph for i, ph in phases.items() if ph != PHASES}, "synthetic-123")

    # loads: 3450 kW total peak spread over 85 hypernodes
    load_nodes = sorted(rng.choice(np.arange(2, n_total + 1), size=85, replace=False))
    weights = rng.uniform(0.5, 1.5, size=len(load_nodes))
    peaks = 3450e3 * weights / weights.sum()
    loads = []
    for node, peak in zip(load_nodes, peaks):
        pf = rng.uniform(0.9, 0.97)
        alpha = float(rng.choice([0.0, 1.0, 2.0]))
        s = peak / base_power * complex(1.0, np.tan(np.arccos(pf)))
        nid = ids[node]
        ph = phases[node]
        for c in ph:
            loads.append(ExponentialLoad(nid, s / len(ph) * DEMAND_PROFILE, alpha, c, f"L{nid}:{c}"))
    trunk = lambda size: [ids[i] for i in rng.choice(np.arange(5, n_trunk + 1), size=size, replace=False)]
    pv = [PvUnit(n, 75.0 / base_power, 82.5e3 / base_power, f"PV{n}") for n in trunk(7)]
    wind = [WindTurbine(n, 525e3 / base_power, WIND_NOMINAL, WIND_CUTOUT, 580e3 / base_power, f"WT{n}")
            for n in trunk(3)]
    sb = base_power
    bats = [Battery(n, 300e3 / sb, 600e3 / sb, 300e3 / sb, (2e-7 * sb, 0.02, 50.0 / sb), (2e-7 * sb, 0.02, 50.0 / sb),
                    120e3 / sb, 120e3 / sb, 150e3 / sb, f"B{n}") for n in trunk(7)]
    fleet = DeviceFleet(loads, pv, wind, bats)
    series = TimeSeriesSet(PRICE, DEMAND_PROFILE, wind_speed_profile(), IRRADIANCE)
    provenance = {
        "topology": "synthetic radial feeder of IEEE-123 scale (seeded generator)",
        "line_impedances": "typical 4.16 kV overhead configurations",
        "demand": "3450 kW peak with the published 24 h profile; placement and alpha synthetic",
        "pv": "7 x 75 kW (525 kW peak), placement synthetic",
        "wind": "3 x 525 kW (1575 kW rated), placement synthetic",
        "batteries": "7 x 120 kW / 600 kWh, loss coefficients synthetic",
        "price": "published 24 h real-time price series",
    }
    return net, fleet, series, provenance
