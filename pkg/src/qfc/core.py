"""Quadrature state-space models of linear open quantum systems.

Conventions used throughout the package:

* quadratures ``x = a + a^dag`` and ``p = -i (a - a^dag)``, so ``[x, p] = 2i``;
* a vacuum input has quadrature covariance ``I`` per channel, a thermal input
  with occupancy ``kn`` has ``(2 kn + 1) I``;
* the mean excitation of a mode is ``(sigma_xx + sigma_pp - 2) / 4``.

A model is the pair of Ito equations::

    dx = (A x + a) dt + B dw
    dy = (C x + c) dt + D dw

where ``dw``/``dy`` stack the (x, p) quadratures of every input/output channel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qfc.errors import InvalidParameterError, NotApplicableError

VACUUM = "vacuum"
THERMAL = "thermal"
CLASSICAL = "classical"
_KINDS = (VACUUM, THERMAL, CLASSICAL)


@dataclass(frozen=True)
class ChannelLabel:
    """A named field channel.

    ``role`` tags auxiliary vacua that hybrid controllers add for measurement
    or actuation; it is empty for ordinary channels.
    """

    name: str
    kind: str = VACUUM
    kn: float = 0.0
    role: str = ""

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidParameterError(f"unknown channel kind {self.kind!r}")
        if self.kn < 0:
            raise InvalidParameterError(f"channel {self.name}: kn must be >= 0")

    def renamed(self, name: str) -> "ChannelLabel":
        return ChannelLabel(name, self.kind, self.kn, self.role)


@dataclass(frozen=True)
class Mode:
    """An internal mode occupying state indices ``(index, index + 1)``."""

    name: str
    index: int
    classical: bool = False


def _frozen(M, shape, what) -> np.ndarray:
    arr = np.array(M, dtype=float)
    if arr.shape != shape:
        try:
            arr = arr.reshape(shape)
        except ValueError:
            raise InvalidParameterError(f"{what} has shape {arr.shape}, expected {shape}") from None
    if arr.size and not np.isfinite(arr.sum()):
        raise InvalidParameterError(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    inputs: tuple[ChannelLabel, ...]
    outputs: tuple[ChannelLabel, ...]
    modes: tuple[Mode, ...] = ()
    a: np.ndarray | None = None
    c: np.ndarray | None = None
    hybrid: bool = False
    measurements: int = 0
    actuations: int = 0
    name: str = ""

    def __post_init__(self):
        inputs = tuple(self.inputs)
        outputs = tuple(self.outputs)
        n = len(self.modes) * 2
        m, p = 2 * len(inputs), 2 * len(outputs)
        set_ = object.__setattr__
        set_(self, "inputs", inputs)
        set_(self, "outputs", outputs)
        set_(self, "modes", tuple(self.modes))
        set_(self, "A", _frozen(self.A, (n, n), "A"))
        set_(self, "B", _frozen(self.B, (n, m), "B"))
        set_(self, "C", _frozen(self.C, (p, n), "C"))
        set_(self, "D", _frozen(self.D, (p, m), "D"))
        set_(self, "a", _frozen(np.zeros(n) if self.a is None else self.a, (n,), "a"))
        set_(self, "c", _frozen(np.zeros(p) if self.c is None else self.c, (p,), "c"))
        if sorted(md.index for md in self.modes) != list(range(0, n, 2)):
            raise InvalidParameterError("modes must tile the state vector in (x, p) pairs")
        for chans, what in ((inputs, "input"), (outputs, "output")):
            names = [ch.name for ch in chans]
            if len(set(names)) != len(names):
                raise InvalidParameterError(f"duplicate {what} channel names: {names}")
        if not self.is_hybrid and any(ch.kind == CLASSICAL for ch in inputs):
            raise InvalidParameterError("classical-signal channels require a hybrid model")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def is_hybrid(self) -> bool:
        """True when the model contains measurement or classical state."""
        return self.hybrid or any(md.classical for md in self.modes)

    def input_index(self, name: str) -> int:
        for i, ch in enumerate(self.inputs):
            if ch.name == name:
                return i
        raise KeyError(f"no input channel {name!r}; have {[c.name for c in self.inputs]}")

    def output_index(self, name: str) -> int:
        for i, ch in enumerate(self.outputs):
            if ch.name == name:
                return i
        raise KeyError(f"no output channel {name!r}; have {[c.name for c in self.outputs]}")

    def mode(self, name: str | None = None) -> Mode:
        """Look up a mode by name; with no name, the first quantum mode."""
        for md in self.modes:
            if (name is None and not md.classical) or md.name == name:
                return md
        raise KeyError(f"no mode {name!r}")

    def replace(self, **changes) -> "LinearModel":
        fields = {f: getattr(self, f) for f in self.__dataclass_fields__}
        fields.update(changes)
        return LinearModel(**fields)

    @classmethod
    def _trusted(cls, **fields) -> "LinearModel":
        """Construct without validation; for results of composing valid models."""
        obj = object.__new__(cls)
        for f in ("A", "B", "C", "D", "a", "c"):
            fields[f].setflags(write=False)
        fields.setdefault("hybrid", False)
        fields.setdefault("measurements", 0)
        fields.setdefault("actuations", 0)
        fields.setdefault("name", "")
        for k, v in fields.items():
            object.__setattr__(obj, k, v)
        return obj


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Input quadrature covariance ``F`` (Ito: ``dw dw^T -> F dt``, symmetrised)."""

    F: np.ndarray

    def __post_init__(self):
        F = np.array(self.F, dtype=float)
        if F.ndim != 2 or F.shape[0] != F.shape[1] or F.shape[0] % 2:
            raise InvalidParameterError("F must be square with even dimension")
        if not np.allclose(F, F.T, atol=1e-12):
            raise InvalidParameterError("F must be symmetric")
        if F.size and np.linalg.eigvalsh(F).min() < -1e-12:
            raise InvalidParameterError("F must be positive semidefinite")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)

    @classmethod
    def from_channels(cls, channels: Sequence[ChannelLabel]) -> "NoiseSpec":
        F = np.diag(channel_variances(channels))
        F.setflags(write=False)
        obj = object.__new__(cls)  # diagonal and non-negative by construction
        object.__setattr__(obj, "F", F)
        return obj

    def block(self, i: int) -> np.ndarray:
        return self.F[2 * i:2 * i + 2, 2 * i:2 * i + 2]


def channel_variances(channels: Sequence[ChannelLabel]) -> np.ndarray:
    """Per-quadrature input variances: 1 (vacuum), 2 kn + 1 (thermal), 0 (classical)."""
    out = np.empty(2 * len(channels))
    for i, ch in enumerate(channels):
        if ch.kind == CLASSICAL:
            v = 0.0
        else:
            v = 2.0 * ch.kn + 1.0 if ch.kind == THERMAL else 1.0
        out[2 * i] = out[2 * i + 1] = v
    return out


def input_noise(G: LinearModel) -> NoiseSpec:
    """Noise statistics implied by the channel labels of ``G``."""
    return NoiseSpec.from_channels(G.inputs)


def commutation_matrix(modes: int) -> np.ndarray:
    """Block-diagonal ``[[0, 2], [-2, 0]]`` per mode."""
    return np.kron(np.eye(modes), np.array([[0.0, 2.0], [-2.0, 0.0]]))


def realizability_residual(G: LinearModel) -> float:
    """Largest violation of the physical-realizability identities.

    A model preserves canonical commutators iff ``A T + T A' + B Tw B' = 0``,
    ``D Tw D' = Tw'`` and ``B Tw D' + T C' = 0``, with ``T`` the commutation
    matrix of the internal modes and ``Tw`` (``Tw'``) that of the input (output)
    channels.
    """
    if G.is_hybrid:
        raise NotApplicableError("realizability is only defined for all-quantum models")
    if any(ch.kind == CLASSICAL for ch in G.inputs):
        raise NotApplicableError("classical-signal channels present")
    T = commutation_matrix(len(G.modes))
    Tw = commutation_matrix(len(G.inputs))
    Two = commutation_matrix(len(G.outputs))
    A, B, C, D = G.A, G.B, G.C, G.D
    terms = [
        A @ T + T @ A.T + B @ Tw @ B.T,
        D @ Tw @ D.T - Two,
        B @ Tw @ D.T + T @ C.T,
    ]
    return max((float(np.abs(t).max()) if t.size else 0.0) for t in terms)


def rotation(theta: float) -> np.ndarray:
    """Quadrature rotation implementing ``a -> e^{-i theta} a``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def squeezing(r: float) -> np.ndarray:
    """Single-mode squeezer: ``x -> e^{-r} x``, ``p -> e^{r} p``."""
    return np.diag([np.exp(-r), np.exp(r)])


_J = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class CavityParams:
    """Three-mirror optical cavity; mirror 3 sees a thermal bath."""

    k1: float = 1.0
    k2: float = 1.0
    k3: float = 1.0
    kn: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        for nm in ("k1", "k2", "k3"):
            if not getattr(self, nm) > 0:
                raise InvalidParameterError(f"{nm} must be > 0, got {getattr(self, nm)}")
        if not self.kn >= 0:
            raise InvalidParameterError(f"kn must be >= 0, got {self.kn}")

    @property
    def k(self) -> float:
        return self.k1 + self.k2 + self.k3


@dataclass(frozen=True)
class OptomechParams:
    """Mechanical oscillator read out and driven through two optical probes.

    ``K2`` defaults to ``-K1`` (the symmetric two-probe design).
    """

    omega: float = 100.0
    Q: float = 1e4
    K1: float = 0.0
    K2: float | None = None
    kn: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise InvalidParameterError(f"omega must be > 0, got {self.omega}")
        if not self.Q > 0:
            raise InvalidParameterError(f"Q must be > 0, got {self.Q}")
        if not self.kn >= 0:
            raise InvalidParameterError(f"kn must be >= 0, got {self.kn}")
        if self.K2 is None:
            object.__setattr__(self, "K2", -self.K1)

    @property
    def gamma(self) -> float:
        """Mechanical energy damping rate."""
        return self.omega / self.Q


def cavity_model(kappas: Sequence[float], detuning: float = 0.0, *,
                 channels: Sequence[ChannelLabel], mode: str, name: str = "") -> LinearModel:
    """One-mode cavity with ``L_i = sqrt(kappa_i) a`` and ``H = detuning a^dag a``."""
    kappas = np.asarray(kappas, dtype=float)
    if np.any(kappas < 0):
        raise InvalidParameterError("decay rates must be non-negative")
    I2 = np.eye(2)
    A = -0.5 * kappas.sum() * I2 + detuning * _J
    B = np.hstack([-np.sqrt(k) * I2 for k in kappas])
    C = np.vstack([np.sqrt(k) * I2 for k in kappas])
    D = np.eye(2 * len(kappas))
    return LinearModel(A, B, C, D, channels, [ChannelLabel(ch.name) for ch in channels],
                       modes=[Mode(mode, 0)], name=name)


def cavity_plant(p: CavityParams, name: str = "plant") -> LinearModel:
    """The noisy three-mirror cavity; channels ``<name>.1 .. <name>.3``."""
    channels = [
        ChannelLabel(f"{name}.1"),
        ChannelLabel(f"{name}.2"),
        ChannelLabel(f"{name}.3", THERMAL if p.kn > 0 else VACUUM, p.kn),
    ]
    return cavity_model([p.k1, p.k2, p.k3], p.detuning, channels=channels,
                        mode=f"{name}.a", name=name)


def optomech_plant(p: OptomechParams, name: str = "plant") -> LinearModel:
    """Mechanical mode (x_m, p_m) coupled to a probe and a feedback beam.

    Channels: ``<name>.probe``, ``<name>.feedback`` (optical, vacuum) and
    ``<name>.bath`` (mechanical, thermal with occupancy ``kn``).  Each optical
    beam imprints ``2 K_i x_m`` on its x quadrature and pushes ``p_m`` with its
    p quadrature.
    """
    g = p.gamma
    sg = np.sqrt(g)
    A = np.array([[-g / 2, p.omega], [-p.omega, -g / 2]])
    B = np.zeros((2, 6))
    C = np.zeros((6, 2))
    for i, K in enumerate((p.K1, p.K2)):
        B[1, 2 * i + 1] = -2.0 * K
        C[2 * i, 0] = 2.0 * K
    B[:, 4:6] = -sg * np.eye(2)
    C[4:6, :] = sg * np.eye(2)
    inputs = [
        ChannelLabel(f"{name}.probe"),
        ChannelLabel(f"{name}.feedback"),
        ChannelLabel(f"{name}.bath", THERMAL if p.kn > 0 else VACUUM, p.kn),
    ]
    outputs = [ChannelLabel(ch.name) for ch in inputs]
    return LinearModel(A, B, C, np.eye(6), inputs, outputs,
                       modes=[Mode(f"{name}.b", 0)], name=name)


def empty_model() -> LinearModel:
    """The unit of concatenation: no states, no channels."""
    z = np.zeros((0, 0))
    return LinearModel(z, z, z, z, (), ())

