"""Closed-loop problems: a plant at fixed bath occupancy, a wiring preset and a
controller family whose parameters are to be optimised."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from qfc.controllers import (FAMILIES, OPOParams, cheap_control_limit,
                             coherent_cavity_controller, heterodyne_amplifier,
                             homodyne_dynamic_controller, lqg_optimal_classical, opo_controller,
                             trivial_controller, two_mode_squeezer)
from qfc.core import CavityParams, LinearModel, OptomechParams, cavity_plant, optomech_plant
from qfc.errors import (AlgebraicLoopError, InvalidParameterError, InvalidWiringError,
                        NoSteadyStateError, SynthesisError)
from qfc.network import Wiring, concatenate, feedback_interconnect
from qfc.steady import steady_covariance

PlantParams = Union[CavityParams, OptomechParams]

TWO_PI = 2.0 * math.pi
PENALTY = 1e6

#: loop topology per preset: (plant output -> controller, controller -> plant input)
WIRING_PRESETS = {
    "fig1": ("plant.1", "plant.2"),
    "fig3": ("plant.probe", "plant.feedback"),
}
DEFAULT_WIRING = {CavityParams: "fig1", OptomechParams: "fig3"}


def fold(t: float, lo: float, hi: float) -> float:
    """Reflect ``t`` back and forth into ``[lo, hi]`` (a triangle wave)."""
    w = hi - lo
    if w <= 0:
        return lo
    r = (t - lo) % (2.0 * w)
    return lo + (r if r <= w else 2.0 * w - r)


@dataclass(frozen=True)
class ParamSpec:
    """One optimisation coordinate.

    The optimiser works on an unbounded internal coordinate that is folded
    into the bounds, so no simplex vertex is ever clipped.  ``scale`` picks the
    internal coordinate: ``log`` (log10 of the value), ``sq`` (square root, so
    that 0 is an ordinary interior point of the fold), ``linear``, or
    ``phase`` (periodic on [0, 2 pi)).
    """

    name: str
    scale: str
    lo: float = 0.0
    hi: float = TWO_PI

    def bounds(self) -> tuple[float, float]:
        if self.scale == "log":
            return (math.log10(self.lo), math.log10(self.hi))
        if self.scale == "sq":
            return (math.sqrt(self.lo), math.sqrt(self.hi))
        if self.scale == "phase":
            return (0.0, TWO_PI)
        return (self.lo, self.hi)

    def value(self, u: float) -> float:
        if self.scale == "phase":
            return u % TWO_PI
        u = fold(u, *self.bounds())
        if self.scale == "log":
            return 10.0 ** u
        if self.scale == "sq":
            return u * u
        return u

    def internal(self, v: float) -> float:
        if self.scale == "log":
            return math.log10(v)
        if self.scale == "sq":
            return math.sqrt(v)
        if self.scale == "phase":
            return v % TWO_PI
        return v

    def sample(self, rng) -> float:
        return float(rng.uniform(*self.bounds()))

    @property
    def default(self) -> float:
        """Neutral value: geometric mid-range for rates, the lower bound otherwise."""
        if self.scale == "log":
            return math.sqrt(self.lo * self.hi)
        return 0.0 if self.scale == "phase" else self.lo


# Default search spaces.  Rates are log-scaled over (1e-4, 1e3); gains and
# squeezing live in [0, 10]; phases are periodic.  Rates that must be able to
# switch off exactly (second OPO port, parametric gain, optical coupling K)
# use the square-root coordinate so that 0 is on the boundary.
_RATE = (1e-4, 1e3)
FAMILY_PARAMS: dict[str, tuple[ParamSpec, ...]] = {
    "trivial": (ParamSpec("theta", "phase"),),
    "heterodyne": (ParamSpec("xi", "linear", 0.0, 10.0),),
    "two_mode_squeezer": (ParamSpec("eta", "linear", 0.0, 10.0),),
    "coherent_cavity": (
        ParamSpec("kappa", "log", *_RATE),
        ParamSpec("detuning", "linear", -1e3, 1e3),
        ParamSpec("phase", "phase"),
    ),
    "opo": (
        ParamSpec("kappa1", "log", *_RATE),
        ParamSpec("kappa2", "sq", 0.0, 1e3),
        ParamSpec("detuning", "linear", -1e3, 1e3),
        ParamSpec("eps_sq", "sq", 0.0, 1e3),
        ParamSpec("theta_sq", "phase"),
        ParamSpec("r_in", "linear", 0.0, 10.0),
        ParamSpec("phi_in", "phase"),
        ParamSpec("r_out", "linear", 0.0, 10.0),
        ParamSpec("phi_out", "phase"),
        ParamSpec("eta_out", "linear", 0.0, 10.0),
    ),
    # record -> drive transfer G (cos(phi) s + w sin(phi)) / (s^2 + g s + w^2); g is the sum
    # of the two pole rates, so it may reach twice the rate bound
    "homodyne": (
        ParamSpec("w", "log", *_RATE),
        ParamSpec("g", "log", _RATE[0], 2 * _RATE[1]),
        ParamSpec("gain", "log", 1e-4, 1e8),
        ParamSpec("phi", "phase"),
    ),
    "lqg_optimal": (),
}
COUPLING = ParamSpec("K", "sq", 0.0, 1e2)


@dataclass(frozen=True)
class LQGOptions:
    """Cheap-control schedule for the ``lqg_optimal`` family."""

    eps0: float = 1e-2
    rtol: float = 1e-5
    factor: float = 10.0
    max_steps: int = 12


@dataclass(frozen=True)
class Problem:
    """A plant at one bath occupancy, closed through one controller family."""

    plant: PlantParams
    family: str
    wiring: str | None = None
    bounds: tuple = ()
    penalty: float = PENALTY
    lqg: LQGOptions = LQGOptions()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(f"unknown controller family {self.family!r}")
        w = self.wiring or DEFAULT_WIRING[type(self.plant)]
        if w not in WIRING_PRESETS:
            raise InvalidWiringError(f"unknown wiring preset {w!r}")
        if w != DEFAULT_WIRING[type(self.plant)]:
            raise InvalidWiringError(
                f"wiring {w!r} does not fit a {type(self.plant).__name__} plant")
        object.__setattr__(self, "wiring", w)
        object.__setattr__(self, "bounds", tuple(sorted(dict(self.bounds).items())))

    @property
    def optomech(self) -> bool:
        return isinstance(self.plant, OptomechParams)

    @property
    def specs(self) -> tuple[ParamSpec, ...]:
        specs = FAMILY_PARAMS[self.family] + ((COUPLING,) if self.optomech else ())
        overrides = dict(self.bounds)
        return tuple(replace(s, lo=overrides[s.name][0], hi=overrides[s.name][1])
                     if s.name in overrides else s for s in specs)

    def decode(self, x) -> dict:
        return {s.name: s.value(float(u)) for s, u in zip(self.specs, x)}

    def encode(self, params: dict) -> np.ndarray:
        return np.array([s.internal(params[s.name]) for s in self.specs], dtype=float)

    def with_kn(self, kn: float) -> "Problem":
        return replace(self, plant=replace(self.plant, kn=kn))


def build_plant(problem: Problem, params: dict | None = None) -> LinearModel:
    p = problem.plant
    if problem.optomech:
        K = (params or {}).get("K", p.K1)
        return optomech_plant(OptomechParams(p.omega, p.Q, K, -K, p.kn))
    return cavity_plant(p)


def close_loop(problem: Problem, plant: LinearModel, ctrl: LinearModel) -> LinearModel:
    out, inp = WIRING_PRESETS[problem.wiring]
    w = Wiring(((out, "ctrl.in1"), ("ctrl.out1", inp)))
    return feedback_interconnect(concatenate(plant, ctrl), w)


def _lqg_kind(problem: Problem):
    # heterodyne + two-quadrature drive for the cavity; homodyne x + p drive for the oscillator
    return ("homodyne", "p") if problem.optomech else ("heterodyne", "xp")


def lqg_design(problem: Problem, plant: LinearModel, eps: float):
    out, inp = WIRING_PRESETS[problem.wiring]
    meas, act = _lqg_kind(problem)
    return lqg_optimal_classical(plant, out, inp, eps, measurement=meas, actuate=act)


def build_controller_for(problem: Problem, params: dict, plant: LinearModel | None = None,
                         eps: float | None = None) -> LinearModel:
    f = problem.family
    if f == "trivial":
        return trivial_controller(params["theta"])
    if f == "heterodyne":
        return heterodyne_amplifier(params["xi"])
    if f == "two_mode_squeezer":
        return two_mode_squeezer(params["eta"])
    if f == "coherent_cavity":
        return coherent_cavity_controller(params["kappa"], params["detuning"], params["phase"])
    if f == "opo":
        return opo_controller(OPOParams(**{k: v for k, v in params.items() if k != "K"}))
    if f == "homodyne":
        w, g, G, phi = params["w"], params["g"], params["gain"], params["phi"]
        return homodyne_dynamic_controller([[0.0, 1.0], [-w * w, -g]], [0.0, 1.0],
                                           [G * w * math.sin(phi), G * math.cos(phi)])
    plant = build_plant(problem, params) if plant is None else plant
    return lqg_design(problem, plant, problem.lqg.eps0 if eps is None else eps).controller


def target_mode(problem: Problem) -> str:
    return "plant.b" if problem.optomech else "plant.a"


def _loop_value(problem: Problem, G: LinearModel) -> float:
    """Target-mode excitation, or the stability penalty for an unstable loop."""
    try:
        return float(steady_covariance(G).excitations[target_mode(problem)])
    except NoSteadyStateError as exc:
        return problem.penalty + 10.0 * float(np.max(exc.eigenvalues.real))


def evaluate_params(problem: Problem, params: dict) -> tuple[float, LinearModel | None, dict]:
    """Closed-loop objective for physical parameters.

    Returns ``(value, loop, info)``; ``info`` carries the control weight
    reached by the cheap-control schedule for the ``lqg_optimal`` family.
    """
    try:
        plant = build_plant(problem, params)
        if problem.family != "lqg_optimal":
            G = close_loop(problem, plant, build_controller_for(problem, params, plant))
            return _loop_value(problem, G), G, {}
        loops = {}

        def at(eps):
            loops[eps] = close_loop(problem, plant, build_controller_for(problem, params, plant, eps))
            return _loop_value(problem, loops[eps])

        o = problem.lqg
        val, eps, ok = cheap_control_limit(at, o.eps0, o.rtol, o.factor, o.max_steps)
        return val, loops[eps], {"eps": eps, "cheap_limit_converged": ok}
    except (AlgebraicLoopError, SynthesisError, InvalidParameterError,
            np.linalg.LinAlgError, FloatingPointError):
        return problem.penalty * 2.0, None, {}


def objective(problem: Problem, x) -> float:
    """Target-mode excitation number for internal parameter vector ``x``.

    Unstable loops score ``penalty + 10 * max Re(eig)``, which keeps the
    landscape sloping towards stability.
    """
    val = evaluate_params(problem, problem.decode(x))[0]
    return val if math.isfinite(val) else problem.penalty * 2.0


def no_control(problem: Problem) -> float:
    """Excitation of the target mode with no controller attached."""
    p = problem.plant
    if problem.optomech:
        G = optomech_plant(OptomechParams(p.omega, p.Q, 0.0, 0.0, p.kn))
    else:
        G = cavity_plant(p)
    return float(steady_covariance(G).excitations[target_mode(problem)])


def anchor_params(problem: Problem) -> dict:
    """Every parameter at its neutral value.

    With the default bounds this switches the controller off (zero gain,
    zero squeezing, or K = 0 on the oscillator), so a run seeded here can
    never end above the no-control excitation.
    """
    return {s.name: s.default for s in problem.specs}


#: families whose optimum embeds into a larger family (source -> targets)
EMBEDS = {"coherent_cavity": ("opo",), "two_mode_squeezer": ("opo",)}


def embed_params(src_family: str, params: dict, dst_family: str) -> dict | None:
    """Map an optimum of one family onto an equivalent (or, for the static
    squeezer, arbitrarily close) member of a larger one."""
    if src_family == dst_family:
        return dict(params)
    if src_family == "coherent_cavity" and dst_family == "opo":
        out = dict(kappa1=params["kappa"], kappa2=0.0, detuning=params["detuning"], eps_sq=0.0,
                   theta_sq=0.0, r_in=0.0, phi_in=params["phase"], r_out=0.0, phi_out=0.0,
                   eta_out=0.0)
    elif src_family == "two_mode_squeezer" and dst_family == "opo":
        # weakest coupling, resonance pushed far outside the plant bandwidth
        spec = {s.name: s for s in FAMILY_PARAMS["opo"]}
        out = dict(kappa1=spec["kappa1"].lo, kappa2=0.0, detuning=spec["detuning"].hi,
                   eps_sq=0.0, theta_sq=0.0, r_in=0.0, phi_in=0.0, r_out=0.0, phi_out=0.0,
                   eta_out=params["eta"])
    else:
        return None
    if "K" in params:
        out["K"] = params["K"]
    return out

