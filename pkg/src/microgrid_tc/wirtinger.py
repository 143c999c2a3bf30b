"""Affine surrogates of the power-flow and exponential-load equations.

Both surrogates are first-order Wirtinger expansions: a non-holomorphic
``f(v, conj(v))`` is replaced by ``f(v0) + df/dv (v - v0) + df/dconj(v) conj(v - v0)``.
For the nodal powers this gives

    conj(S) = K conj(V) + L V + U

and for the loads ``S_load = S_zip * (M + H V + T conj(V))`` with ``M, H, T``
diagonal (stored here as vectors, one entry per load component).
"""
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_vector, check_positive, frozen
from .devices import place_loads
from .exceptions import InputError
from .network import PHASE_ROTATION, build_admittance, partition, slack_voltage


@dataclass(frozen=True, eq=False)
class ExpansionPoint:
    v0: np.ndarray

    def __post_init__(self):
        v0 = np.asarray(self.v0, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(v0)):
            raise InputError("expansion point has non-finite entries")
        if np.any(np.abs(v0) == 0):
            raise InputError("expansion point must be nonzero in every entry")
        object.__setattr__(self, "v0", frozen(v0))

    @classmethod
    def flat(cls, net):
        return cls(net.nominal_voltages())


@dataclass(frozen=True, eq=False)
class LinearFlowModel:
    K: np.ndarray
    L: np.ndarray
    U: np.ndarray
    M: np.ndarray
    H: np.ndarray
    T: np.ndarray
    expansion: ExpansionPoint

    @property
    def size(self):
        return self.U.size

    def conj_power(self, v):
        """Surrogate of ``conj(S)`` at voltages ``v``."""
        v = np.asarray(v, dtype=complex)
        return self.K @ np.conj(v) + self.L @ v + self.U

    def power(self, v):
        return np.conj(self.conj_power(v))

    def load_factor(self, v_components):
        """Real bracket ``M + H v + T conj(v)`` per load component."""
        v = np.asarray(v_components, dtype=complex)
        return np.real(self.M + self.H * v + self.T * np.conj(v))

    def solve(self, s_fixed, loads=None, t=0):
        """Voltages satisfying the affine model for a given injection pattern.

        ``s_fixed`` is the voltage-independent injection per non-slack entry;
        ``loads`` (a ``PlacedLoads``) is subtracted through its surrogate.
        """
        n = self.size
        s_fixed = check_complex_vector(s_fixed, n, "s_fixed")
        # conj(S_fixed) - conj(S_zip) (M + H V + T conj V) = K conj V + L V + U
        a = self.L.astype(complex).copy()
        b = self.K.astype(complex).copy()
        rhs = np.conj(s_fixed) - self.U
        if loads is not None and loads.position.size:
            cz = np.conj(loads.s_zip[:, t])
            np.add.at(a, (loads.position, loads.position), cz * self.H)
            np.add.at(b, (loads.position, loads.position), cz * self.T)
            rhs = rhs - loads.aggregate(cz * self.M)
        # a V + b conj(V) = rhs, split into real and imaginary parts
        system = np.block([[(a + b).real, (b - a).imag], [(a + b).imag, (a - b).real]])
        sol = np.linalg.solve(system, np.concatenate([rhs.real, rhs.imag]))
        return sol[:n] + 1j * sol[n:]


def linearize_power_flow(part, vs, x0):
    """Return ``(K, L, U)`` for the expansion point ``x0``.

    The slack contribution ``conj(v_k) (Yns Vs)_k`` is already linear in
    ``conj(v_k)`` and enters ``K`` unchanged. ``U`` is the constant that
    makes the surrogate exact at ``x0``: ``-conj(V0) * (Ynn V0)``.
    """
    if not isinstance(x0, ExpansionPoint):
        x0 = ExpansionPoint(x0)
    v0 = x0.v0
    if v0.size != part.Ynn.shape[0]:
        raise InputError(f"expansion point has {v0.size} entries, network has {part.Ynn.shape[0]}")
    ynn_v0 = part.Ynn @ v0
    k = np.diag(part.Yns @ vs + ynn_v0)
    l = np.conj(v0)[:, None] * part.Ynn
    u = -np.conj(v0) * ynn_v0
    return k, l, u


def linearize_loads(alpha, phase, v_nom, v0=None):
    """Return ``(M, H, T)`` for load components with exponents ``alpha``.

    ``phase`` holds the phase index (0, 1, 2) of each component. With
    ``v0=None`` the expansion is at the nominal phasor ``v_nom e^{j phi}``,
    which reproduces ``M = 1 - alpha``, ``H = alpha / (2 v_nom e^{j phi})``
    and ``T = conj(H)``. Otherwise ``v0`` gives one expansion voltage per
    component.
    """
    v_nom = check_positive(v_nom, "v_nom")
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if v0 is None:
        v0 = v_nom * PHASE_ROTATION[np.asarray(phase, dtype=int).reshape(-1)]
    v0 = check_complex_vector(v0, alpha.size, "v0")
    if np.any(v0 == 0):
        raise InputError("load expansion voltage must be nonzero")
    scale = (np.abs(v0) / v_nom) ** alpha
    m = scale * (1.0 - alpha)
    h = scale * alpha / (2.0 * v0)
    t = scale * alpha / (2.0 * np.conj(v0))
    return m, h, t


def load_surrogate(s_zip, m, h, t, v):
    v = np.asarray(v, dtype=complex)
    return s_zip * np.real(m + h * v + t * np.conj(v))


def wirtinger_residual(f_exact, surrogate, v):
    """Largest modulus of ``f_exact(v) - surrogate(v)``."""
    diff = np.asarray(f_exact(v)) - np.asarray(surrogate(v))
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def wirtinger_derivatives(f, z0, h=1e-6):
    """Central-difference Wirtinger derivatives of scalar ``f`` at ``z0``.

    Returns ``(df/dz, df/dconj(z))`` from the real partials:
    ``df/dz = (f_x - j f_y) / 2`` and ``df/dconj(z) = (f_x + j f_y) / 2``.
    """
    fx = (f(z0 + h) - f(z0 - h)) / (2 * h)
    fy = (f(z0 + 1j * h) - f(z0 - 1j * h)) / (2 * h)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


def build_linear_model(net, fleet=None, expansion=None, part=None):
    """Assemble the full ``LinearFlowModel`` for a network and its loads."""
    if part is None:
        part = partition(build_admittance(net), net)
    x0 = expansion if expansion is not None else ExpansionPoint.flat(net)
    if not isinstance(x0, ExpansionPoint):
        x0 = ExpansionPoint(x0)
    k, l, u = linearize_power_flow(part, slack_voltage(net.v_nom), x0)
    if fleet is not None and fleet.loads:
        placed = place_loads(net, fleet)
        phases = np.asarray(net.non_slack_phases)[placed.position]
        m, h, t = linearize_loads(placed.alpha, phases, net.v_nom, x0.v0[placed.position])
    else:
        m = h = t = np.zeros(0)
    return LinearFlowModel(
        K=frozen(k), L=frozen(l), U=frozen(u), M=frozen(m), H=frozen(h), T=frozen(t), expansion=x0
    )


class LinearPowerFlow(BaseEstimator):
    """Affine power-flow surrogate fitted to a network.

    ``expansion="flat"`` expands at the balanced nominal profile;
    ``expansion="warm"`` first solves the exact flow for the loads at
    period ``warm_period`` and expands there.

    >>> lpf = LinearPowerFlow().fit(net, fleet)        # doctest: +SKIP
    >>> v = lpf.predict(np.zeros(lpf.n_entries_), t=0)  # doctest: +SKIP
    """

    def __init__(self, expansion="flat", warm_period=0):
        self.expansion = expansion
        self.warm_period = warm_period

    def fit(self, network, fleet=None):
        if self.expansion not in ("flat", "warm"):
            raise InputError(f"expansion must be 'flat' or 'warm', got {self.expansion!r}")
        self.partition_ = partition(build_admittance(network), network)
        self.network_ = network
        self.loads_ = place_loads(network, fleet) if fleet is not None and fleet.loads else None
        x0 = ExpansionPoint.flat(network)
        if self.expansion == "warm":
            from .oracle import load_injection, solve_power_flow

            sol = solve_power_flow(
                self.partition_,
                slack_voltage(network.v_nom),
                load_injection(np.zeros(x0.v0.size), self.loads_, self.warm_period, network.v_nom),
            )
            x0 = ExpansionPoint(sol.v)
        self.model_ = build_linear_model(network, fleet, x0, self.partition_)
        self.n_entries_ = x0.v0.size
        return self

    def predict(self, s_fixed, t=0):
        """Voltages of the affine model for fixed injections at period ``t``."""
        check_is_fitted(self, "model_")
        return self.model_.solve(s_fixed, self.loads_, t)

    def transform(self, v):
        """Surrogate complex power injections at voltages ``v``."""
        check_is_fitted(self, "model_")
        return self.model_.power(v)
