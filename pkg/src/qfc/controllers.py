"""Builders for the coherent and measurement-based controller families.

Every controller exposes its loop ports as ``<name>.in1`` (the field arriving
from the plant) and ``<name>.out1`` (the field sent back).  Measurement-based
controllers additionally carry one fresh vacuum input per measurement
(``<name>.meas``) and per actuation (``<name>.act``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from qfc.core import (ChannelLabel, LinearModel, Mode, NoiseSpec, cavity_model, input_noise,
                      rotation, squeezing)
from qfc.errors import InvalidParameterError, RiccatiError, SynthesisError
from qfc.network import static_model
from qfc.steady import solve_care

FAMILIES = ("trivial", "heterodyne", "homodyne", "lqg_optimal", "coherent_cavity",
            "two_mode_squeezer", "opo")
COHERENT_FAMILIES = ("trivial", "coherent_cavity", "two_mode_squeezer", "opo")
CLASSICAL_FAMILIES = ("heterodyne", "homodyne", "lqg_optimal")

_Z = np.diag([1.0, -1.0])


def _ports(name, n_in=1, n_out=1):
    return ([ChannelLabel(f"{name}.in{i + 1}") for i in range(n_in)],
            [ChannelLabel(f"{name}.out{i + 1}") for i in range(n_out)])


def _aux(name):
    return [ChannelLabel(f"{name}.meas", role="measurement"),
            ChannelLabel(f"{name}.act", role="actuation")]


def trivial_controller(theta: float = 0.0, name: str = "ctrl") -> LinearModel:
    """Direct feedthrough of the probe field with a phase shift ``theta``."""
    ins, outs = _ports(name)
    return static_model(rotation(theta), ins, outs, name=name)


def heterodyne_amplifier(xi: float, name: str = "ctrl") -> LinearModel:
    """Heterodyne-and-displace amplifier with gain ``xi``.

    The probe is split on a beamsplitter with vacuum ``meas`` and both output
    quadratures are measured; the amplified record displaces a fresh vacuum
    ``act``::

        out_x = xi (in_x + meas_x) + act_x
        out_p = xi (in_p - meas_p) + act_p
    """
    if not xi >= 0:
        raise InvalidParameterError(f"heterodyne gain must be >= 0, got {xi}")
    ins, outs = _ports(name)
    I2 = np.eye(2)
    D = np.hstack([xi * I2, xi * _Z, I2])
    return static_model(D, ins + _aux(name), outs, name=name, hybrid=True,
                        measurements=1, actuations=1)


def _record_matrices(measurement: str, efficiency: float = 1.0):
    """Maps (signal field, measurement vacuum) quadratures onto the record."""
    if measurement == "homodyne":
        e = np.sqrt(efficiency)
        f = np.sqrt(max(0.0, 1.0 - efficiency))
        return np.array([[e, 0.0]]), np.array([[f, 0.0]])
    if measurement == "heterodyne":
        h = 1.0 / np.sqrt(2.0)
        return h * np.eye(2), h * _Z
    raise InvalidParameterError(f"unknown measurement {measurement!r}")


def _actuation_matrix(actuate: str):
    if actuate == "p":
        return np.array([[0.0], [1.0]])
    if actuate == "xp":
        return np.eye(2)
    raise InvalidParameterError(f"unknown actuation {actuate!r}")


def classical_controller(A_k, B_k, C_k, measurement: str = "homodyne", actuate: str = "p",
                         efficiency: float = 1.0, name: str = "ctrl") -> LinearModel:
    """Measure the incoming field, filter classically, displace a fresh vacuum.

    ``dx_k = A_k x_k dt + B_k dy`` with ``dy`` the measurement record, and the
    outgoing field is the ``act`` vacuum displaced by ``S C_k x_k dt`` where
    ``S`` selects the actuated quadratures.
    """
    Ysig, Ymeas = _record_matrices(measurement, efficiency)
    Sel = _actuation_matrix(actuate)
    A_k = np.atleast_2d(np.asarray(A_k, dtype=float))
    nk = A_k.shape[0]
    if nk % 2:
        raise InvalidParameterError("controller state dimension must be even")
    try:
        B_k = np.asarray(B_k, dtype=float).reshape(nk, Ysig.shape[0])
        C_k = np.asarray(C_k, dtype=float).reshape(Sel.shape[1], nk)
    except ValueError as exc:
        raise InvalidParameterError(f"controller dimension mismatch: {exc}") from None
    B = np.hstack([B_k @ Ysig, B_k @ Ymeas, np.zeros((nk, 2))])
    C = Sel @ C_k
    D = np.hstack([np.zeros((2, 4)), np.eye(2)])
    ins, outs = _ports(name)
    modes = [Mode(f"{name}.k{i}", 2 * i, classical=True) for i in range(nk // 2)]
    return LinearModel(A_k, B, C, D, ins + _aux(name), outs, modes, name=name,
                       hybrid=True, measurements=1, actuations=1)


def homodyne_dynamic_controller(A_k, B_k, C_k, efficiency: float = 1.0,
                                name: str = "ctrl") -> LinearModel:
    """Homodyne x-quadrature measurement, one classical mode, p-quadrature actuation."""
    A_k = np.atleast_2d(np.asarray(A_k, dtype=float))
    if A_k.shape != (2, 2):
        raise InvalidParameterError("homodyne controller has exactly one classical mode (2 states)")
    return classical_controller(A_k, B_k, C_k, "homodyne", "p", efficiency, name)


@dataclass(frozen=True, eq=False)
class LQGDesign:
    controller: LinearModel
    filter_gain: np.ndarray
    control_gain: np.ndarray
    P: np.ndarray
    X: np.ndarray
    eps: float


def lqg_optimal_classical(plant: LinearModel, measure: str, actuate_channel: str,
                          eps: float = 1e-6, *, mode: str | None = None,
                          measurement: str = "homodyne", actuate: str = "p",
                          noise: NoiseSpec | None = None, name: str = "ctrl") -> LQGDesign:
    """Kalman filter + LQR controller minimising the excitation of ``mode``.

    ``measure`` is the plant output channel sent to the detector and
    ``actuate_channel`` the plant input fed by the controller.  The measurement
    and process noises (and their correlation through the probe field) follow
    from the plant's own noise statistics plus the detector vacuum, so the only
    design knob is the control weight ``eps``.
    """
    if not eps > 0:
        raise InvalidParameterError("control weight eps must be > 0")
    F = (input_noise(plant) if noise is None else noise).F.copy()
    ia = plant.input_index(actuate_channel)
    # the actuated input is replaced by the controller's (vacuum) actuation channel
    F[2 * ia:2 * ia + 2, 2 * ia:2 * ia + 2] = np.eye(2)
    io = plant.output_index(measure)
    Ysig, Ymeas = _record_matrices(measurement)
    Sel = _actuation_matrix(actuate)
    n, m2 = plant.B.shape

    Fx = np.zeros((m2 + 2, m2 + 2))
    Fx[:m2, :m2] = F
    Fx[m2:, m2:] = np.eye(2)
    Gp = np.hstack([plant.B, np.zeros((n, 2))])
    Cy = Ysig @ plant.C[2 * io:2 * io + 2]
    H = np.hstack([Ysig @ plant.D[2 * io:2 * io + 2], Ymeas])
    W = Gp @ Fx @ Gp.T
    V = H @ Fx @ H.T
    S = Gp @ Fx @ H.T
    if np.linalg.eigvalsh(V).min() <= 0:
        raise SynthesisError("singular measurement noise")
    Vi = np.linalg.inv(V)
    Af = plant.A - S @ Vi @ Cy
    Wf = W - S @ Vi @ S.T
    Wf = 0.5 * (Wf + Wf.T)
    Bu = plant.B[:, 2 * ia:2 * ia + 2] @ Sel
    md = plant.mode(mode)
    Qc = np.zeros((n, n))
    Qc[md.index, md.index] = Qc[md.index + 1, md.index + 1] = 1.0
    try:
        P = solve_care(Af.T, Cy.T, Wf, V)
        X = solve_care(plant.A, Bu, Qc, eps * np.eye(Bu.shape[1]))
    except RiccatiError as exc:
        raise SynthesisError(f"LQG synthesis failed: {exc}") from exc
    L = (P @ Cy.T + S) @ Vi
    K = Bu.T @ X / eps
    A_k = plant.A - Bu @ K - L @ Cy
    ctrl = classical_controller(A_k, L, -K, measurement, actuate, name=name)
    return LQGDesign(ctrl, L, K, P, X, eps)


def cheap_control_limit(evaluate: Callable[[float], float], eps0: float = 1e-2,
                        rtol: float = 1e-3, factor: float = 10.0, max_steps: int = 10):
    """Shrink the control weight until the objective settles.

    ``evaluate(eps)`` returns the closed-loop objective.  Stops when two
    successive values differ by less than ``rtol`` (relative).  Returns
    ``(value, eps, converged)``.
    """
    eps = eps0
    prev = evaluate(eps)
    for _ in range(max_steps):
        eps /= factor
        cur = evaluate(eps)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur, eps, True
        prev = cur
    return prev, eps, False


def coherent_cavity_controller(kappa: float, detuning: float = 0.0, phase: float = 0.0,
                               name: str = "ctrl") -> LinearModel:
    """One-port optical cavity reflecting the probe, after a phase shift."""
    if not kappa > 0:
        raise InvalidParameterError(f"kappa must be > 0, got {kappa}")
    ins, outs = _ports(name)
    R = rotation(phase)
    sk = np.sqrt(kappa)
    A = np.array([[-kappa / 2, detuning], [-detuning, -kappa / 2]])
    return LinearModel(A, -sk * R, sk * np.eye(2), R, ins, outs, [Mode(f"{name}.c", 0)], name=name)


def two_mode_squeezer(eta: float, name: str = "ctrl") -> LinearModel:
    """Phase-insensitive amplifier ``out1 = cosh(eta) in1 + sinh(eta) in2^dag``.

    ``in2`` is the idler vacuum; ``out2`` is the (discarded) idler output.
    """
    c, s = np.cosh(eta), np.sinh(eta)
    I2 = np.eye(2)
    D = np.block([[c * I2, s * _Z], [s * _Z, c * I2]])
    ins, outs = _ports(name, 2, 2)
    return static_model(D, ins, outs, name=name)


@dataclass(frozen=True)
class OPOParams:
    kappa1: float
    kappa2: float = 0.0
    detuning: float = 0.0
    eps_sq: float = 0.0
    theta_sq: float = 0.0
    r_in: float = 0.0
    phi_in: float = 0.0
    r_out: float = 0.0
    phi_out: float = 0.0
    eta_out: float = 0.0


def opo_controller(p: OPOParams, name: str = "ctrl") -> LinearModel:
    """Degenerate OPO with two ports and squeezed input/output.

    Internal Hamiltonian ``detuning c^dag c + (i eps/2)(e^{i theta} c^dag^2 - h.c.)``.
    Port 1 carries the loop signal and is dressed by ``R(phi_in) S(r_in)`` on
    the way in and ``R(phi_out) S(r_out)`` on the way out; port 2 is an extra
    open port.  The two outputs then pass a two-mode squeezer ``eta_out``, so
    that a weakly coupled OPO approaches the static two-mode squeezer.
    Dynamic instability (``eps`` too large) is not rejected here.
    """
    if not p.kappa1 > 0 or p.kappa2 < 0:
        raise InvalidParameterError("OPO needs kappa1 > 0 and kappa2 >= 0")
    ins, outs = _ports(name, 2, 2)
    G = cavity_model([p.kappa1, p.kappa2], p.detuning, channels=ins, mode=f"{name}.c", name=name)
    ct, st = np.cos(p.theta_sq), np.sin(p.theta_sq)
    A = G.A + p.eps_sq * np.array([[ct, st], [st, -ct]])
    E_in = rotation(p.phi_in) @ squeezing(p.r_in)
    E_out = rotation(p.phi_out) @ squeezing(p.r_out)
    B, C, D = G.B.copy(), G.C.copy(), G.D.copy()
    B[:, :2] = B[:, :2] @ E_in
    D[:, :2] = D[:, :2] @ E_in
    C[:2] = E_out @ C[:2]
    D[:2] = E_out @ D[:2]
    if p.eta_out:
        c, s = np.cosh(p.eta_out), np.sinh(p.eta_out)
        I2 = np.eye(2)
        T = np.block([[c * I2, s * _Z], [s * _Z, c * I2]])
        C, D = T @ C, T @ D
    return G.replace(A=A, B=B, C=C, D=D, outputs=tuple(outs))


@dataclass(frozen=True)
class ControllerSpec:
    """A controller family tag plus its parameters (see :func:`build_controller`)."""

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(f"unknown controller family {self.family!r}")


def build_controller(spec: ControllerSpec, name: str = "ctrl") -> LinearModel:
    """Build a plant-independent controller from its spec.

    ``lqg_optimal`` depends on the plant and is built with
    :func:`lqg_optimal_classical` instead.
    """
    p = spec.params
    f = spec.family
    if f == "trivial":
        return trivial_controller(p.get("theta", 0.0), name)
    if f == "heterodyne":
        return heterodyne_amplifier(p["xi"], name)
    if f == "homodyne":
        return homodyne_dynamic_controller(p["A_k"], p["B_k"], p["C_k"], name=name)
    if f == "coherent_cavity":
        return coherent_cavity_controller(p["kappa"], p.get("detuning", 0.0),
                                          p.get("phase", 0.0), name)
    if f == "two_mode_squeezer":
        return two_mode_squeezer(p["eta"], name)
    if f == "opo":
        return opo_controller(OPOParams(**p), name)
    raise InvalidParameterError("lqg_optimal controllers are synthesised from a plant")

