"""Three-phase hypergraph network model and its complex admittance algebra.

Vectors over phases use phase-major ordering: every phase-A entry first, then
phase B, then phase C. For a network with ``n`` hypernodes the full index of
``(phase p, node i)`` is ``p * n + i``. The slack hypernode is always the
first entry of ``ThreePhaseNetwork.node_ids``.
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.sparse import csgraph, csr_matrix

from ._validation import check_complex_matrix, check_positive, frozen
from .exceptions import InputError, NetworkStructureError

PHASES = "ABC"


class PhaseIndex(Enum):
    A = 0
    B = 1
    C = 2

    @property
    def angle(self):
        """Nominal phasor angle in radians."""
        return (0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0)[self.value]

    @property
    def rotation(self):
        return np.exp(1j * self.angle)

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise InputError(f"unknown phase {value!r}") from None


PHASE_ANGLES = np.array([p.angle for p in PhaseIndex])
PHASE_ROTATION = np.exp(1j * PHASE_ANGLES)


@dataclass(frozen=True, eq=False)
class HyperBranch:
    """A three-phase line section with its 3x3 series admittance in per unit."""

    from_node: str
    to_node: str
    admittance: np.ndarray
    name: str = ""

    def __post_init__(self):
        y = check_complex_matrix(self.admittance, (3, 3), f"admittance of branch {self.name or (self.from_node, self.to_node)}")
        if not np.any(y != 0):
            raise InputError(f"branch {self.name or (self.from_node, self.to_node)} has an all-zero admittance")
        if self.from_node == self.to_node:
            raise NetworkStructureError(f"branch {self.name} is a self loop on {self.from_node}")
        object.__setattr__(self, "admittance", frozen(y))


@dataclass(frozen=True, eq=False)
class ThreePhaseNetwork:
    """Connected hypergraph of three-phase hypernodes.

    ``phases`` optionally maps a node id to the subset of phases it carries
    (e.g. ``"A"`` for a single-phase lateral). Absent phases carry no
    variables; the branch admittances must be zero on those rows and columns.
    """

    node_ids: tuple
    branches: tuple
    base_power: float = 100e3
    base_voltage: float = 400.0 / np.sqrt(3.0)
    v_nom: float = 1.0
    phases: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        node_ids = tuple(str(n) for n in self.node_ids)
        object.__setattr__(self, "node_ids", node_ids)
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "phases", {str(k): str(v).upper() for k, v in dict(self.phases).items()})
        check_positive(self.base_power, "base_power")
        check_positive(self.base_voltage, "base_voltage")
        check_positive(self.v_nom, "v_nom")
        if len(node_ids) < 2:
            raise NetworkStructureError("a network needs the slack hypernode and at least one more")
        if len(set(node_ids)) != len(node_ids):
            raise NetworkStructureError("duplicate hypernode ids")
        index = {n: i for i, n in enumerate(node_ids)}
        for b in self.branches:
            for end in (b.from_node, b.to_node):
                if end not in index:
                    raise NetworkStructureError(f"branch {b.name!r} references unknown hypernode {end!r}")
        for node, ph in self.phases.items():
            if node not in index:
                raise NetworkStructureError(f"phase mask references unknown hypernode {node!r}")
            if not ph or any(c not in PHASES for c in ph):
                raise InputError(f"invalid phase set {ph!r} for hypernode {node!r}")
        if self.phases.get(node_ids[0], PHASES) != PHASES:
            raise NetworkStructureError("the slack hypernode must carry all three phases")
        mask = self.phase_mask
        for b in self.branches:
            active = mask[index[b.from_node]] & mask[index[b.to_node]]
            y = b.admittance
            if np.any(y[~active, :] != 0) or np.any(y[:, ~active] != 0):
                raise InputError(f"branch {b.name!r} has admittance on a phase absent at one of its ends")
        n_comp, _ = csgraph.connected_components(self._adjacency(), directed=False)
        if n_comp != 1:
            raise NetworkStructureError(f"hypergraph is disconnected ({n_comp} components)")

    def _adjacency(self):
        n = len(self.node_ids)
        idx = self.node_index
        rows = [idx[b.from_node] for b in self.branches]
        cols = [idx[b.to_node] for b in self.branches]
        return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    @property
    def slack(self):
        return self.node_ids[0]

    @property
    def n_nodes(self):
        return len(self.node_ids)

    @cached_property
    def node_index(self):
        return {n: i for i, n in enumerate(self.node_ids)}

    @cached_property
    def phase_mask(self):
        """Boolean ``(n_nodes, 3)`` array of phases present at each hypernode."""
        mask = np.ones((len(self.node_ids), 3), dtype=bool)
        for node, ph in self.phases.items():
            i = self.node_ids.index(node)
            mask[i] = [c in ph for c in PHASES]
        return frozen(mask)

    @cached_property
    def incidence(self):
        """Node-branch incidence matrix, +1 at the sending end, -1 at the receiving end."""
        a = np.zeros((self.n_nodes, len(self.branches)))
        for col, b in enumerate(self.branches):
            a[self.node_index[b.from_node], col] = 1.0
            a[self.node_index[b.to_node], col] = -1.0
        return frozen(a)

    @cached_property
    def base_impedance(self):
        return self.base_voltage**2 / self.base_power

    @cached_property
    def non_slack_index(self):
        """Full phase-major indices of the active non-slack phases, in order."""
        n = self.n_nodes
        mask = self.phase_mask
        return frozen(np.array([p * n + i for p in range(3) for i in range(1, n) if mask[i, p]], dtype=int))

    @cached_property
    def non_slack_nodes(self):
        """Hypernode position (into ``node_ids``) of each non-slack vector entry."""
        return frozen(self.non_slack_index % self.n_nodes)

    @cached_property
    def non_slack_phases(self):
        return frozen(self.non_slack_index // self.n_nodes)

    def entries_of(self, node):
        """Positions in the non-slack vector that belong to ``node``, ordered A, B, C."""
        i = self.node_index[str(node)]
        return np.flatnonzero(self.non_slack_nodes == i)

    def nominal_voltages(self):
        """Balanced flat profile ``v_nom * e^{j phi}`` over the non-slack vector."""
        return self.v_nom * PHASE_ROTATION[self.non_slack_phases]


@dataclass(frozen=True, eq=False)
class AdmittancePartition:
    """Slack / non-slack blocks of the full admittance matrix."""

    Yss: np.ndarray
    Ysn: np.ndarray
    Yns: np.ndarray
    Ynn: np.ndarray
    slack_index: np.ndarray
    non_slack_index: np.ndarray
    size: int

    def reassemble(self):
        y = np.zeros((self.size, self.size), dtype=complex)
        s, n = self.slack_index, self.non_slack_index
        y[np.ix_(s, s)] = self.Yss
        y[np.ix_(s, n)] = self.Ysn
        y[np.ix_(n, s)] = self.Yns
        y[np.ix_(n, n)] = self.Ynn
        return y


def branch_admittance_blocks(net):
    """Block-diagonal branch admittance ``Y_E`` in phase-major branch ordering."""
    nb = len(net.branches)
    ye = np.zeros((3 * nb, 3 * nb), dtype=complex)
    for col, b in enumerate(net.branches):
        idx = np.arange(3) * nb + col
        ye[np.ix_(idx, idx)] = b.admittance
    return ye


def build_admittance(net):
    """Full ``3n x 3n`` nodal admittance matrix via the Kronecker incidence product."""
    a3 = np.kron(np.eye(3), net.incidence)
    return a3 @ branch_admittance_blocks(net) @ a3.T


def partition(y_full, net):
    n = net.n_nodes
    if y_full.shape != (3 * n, 3 * n):
        raise InputError(f"admittance matrix must be {3 * n}x{3 * n}, got {y_full.shape}")
    s = np.arange(3) * n
    nn = np.asarray(net.non_slack_index)
    return AdmittancePartition(
        Yss=frozen(y_full[np.ix_(s, s)]),
        Ysn=frozen(y_full[np.ix_(s, nn)]),
        Yns=frozen(y_full[np.ix_(nn, s)]),
        Ynn=frozen(y_full[np.ix_(nn, nn)]),
        slack_index=frozen(s),
        non_slack_index=frozen(nn),
        size=3 * n,
    )


def slack_voltage(v_nom):
    v_nom = check_positive(v_nom, "v_nom")
    return v_nom * PHASE_ROTATION.copy()


def nodal_power(part, vs, vn):
    """Exact complex power injected into the network at every non-slack phase."""
    vn = np.asarray(vn, dtype=complex)
    current = part.Yns @ vs + part.Ynn @ vn
    return vn * np.conj(current)


def total_losses(part, vs, vn):
    """Total active losses ``Re(V^H Y V)`` written over the four blocks.

    The cross terms are kept separate because ``Ysn`` and ``Yns`` are only
    transposes of each other, so they are not conjugate-symmetric in general.
    """
    vs = np.asarray(vs, dtype=complex)
    vn = np.asarray(vn, dtype=complex)
    quad = (
        np.conj(vs) @ part.Yss @ vs
        + np.conj(vs) @ part.Ysn @ vn
        + np.conj(vn) @ part.Yns @ vs
        + np.conj(vn) @ part.Ynn @ vn
    )
    return float(np.real(quad))


def grid_power(part, vs, vn):
    """Complex power supplied by the main grid through the slack phases."""
    current = part.Yss @ vs + part.Ysn @ np.asarray(vn, dtype=complex)
    return complex(np.sum(vs * np.conj(current)))


def full_voltage(net, vs, vn):
    """Scatter slack and non-slack voltages into a full phase-major vector."""
    v = np.zeros(3 * net.n_nodes, dtype=complex)
    v[np.arange(3) * net.n_nodes] = vs
    v[net.non_slack_index] = vn
    return v


def branch_losses(net, v_full):
    """Active loss of every hyperbranch, ``Re(dV^T conj(Y_l dV))``."""
    n = net.n_nodes
    out = np.empty(len(net.branches))
    for k, b in enumerate(net.branches):
        i, j = net.node_index[b.from_node], net.node_index[b.to_node]
        dv = v_full[np.arange(3) * n + i] - v_full[np.arange(3) * n + j]
        out[k] = np.real(dv @ np.conj(b.admittance @ dv))
    return out


def loss_matrix(y_full):
    """Hermitian part of the admittance matrix; the losses are its quadratic form."""
    return 0.5 * (y_full + y_full.conj().T)


def branch_loss_factors(net, tol=1e-10):
    """Per-branch factors ``R_l`` with ``herm(Y_l) = R_l^H R_l``.

    Raises if a branch is active (negative-resistance) beyond ``tol``.
    """
    factors = []
    for b in net.branches:
        g = 0.5 * (b.admittance + b.admittance.conj().T)
        w, q = np.linalg.eigh(g)
        if w.min() < -tol * max(1.0, abs(w).max()):
            raise InputError(f"branch {b.name!r} is not passive (eigenvalue {w.min():.3e})")
        w = np.clip(w, 0.0, None)
        factors.append(np.sqrt(w)[:, None] * q.conj().T)
    return factors
