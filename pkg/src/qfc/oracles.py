"""Closed-form steady states of the three-mirror cavity, and a self-check.

With total decay ``k = k1 + k2 + k3``, mirror-3 occupancy ``kn`` and
``b = sqrt(k1 k2)``:

* no control: ``k3 kn / k``
* direct feedback of output 1 into input 2: ``k3 kn / (k + 2 b)``
* heterodyne amplifier, gain ``xi``: ``(k2 xi^2 + k3 kn) / (k + 2 b xi)``
* two-mode squeezer, squeezing ``eta``:
  ``(k2 sinh^2 eta + k3 kn) / (k + 2 b cosh eta)``
"""
from __future__ import annotations

import math

import numpy as np

from qfc.controllers import heterodyne_amplifier, trivial_controller, two_mode_squeezer
from qfc.core import CavityParams, LinearModel, realizability_residual
from qfc.scenarios import Problem, build_plant, close_loop, no_control
from qfc.steady import steady_covariance


def cavity_no_control(p: CavityParams) -> float:
    return p.k3 * p.kn / p.k


def cavity_direct_feedback(p: CavityParams) -> float:
    return p.k3 * p.kn / (p.k + 2.0 * math.sqrt(p.k1 * p.k2))


def cavity_heterodyne(p: CavityParams, xi: float) -> float:
    return (p.k2 * xi ** 2 + p.k3 * p.kn) / (p.k + 2.0 * math.sqrt(p.k1 * p.k2) * xi)


def cavity_two_mode_squeezer(p: CavityParams, eta: float) -> float:
    b = math.sqrt(p.k1 * p.k2)
    return (p.k2 * math.sinh(eta) ** 2 + p.k3 * p.kn) / (p.k + 2.0 * b * math.cosh(eta))


def heterodyne_optimal_gain(p: CavityParams) -> float:
    """Stationary point of :func:`cavity_heterodyne` in ``xi >= 0``."""
    b = math.sqrt(p.k1 * p.k2)
    c = p.k3 * p.kn
    k2, k = p.k2, p.k
    return (-k2 * k + math.sqrt((k2 * k) ** 2 + 4.0 * k2 * b * b * c)) / (2.0 * k2 * b)


def _loop_photons(p: CavityParams, ctrl) -> tuple[float, LinearModel]:
    G = close_loop(Problem(p, "trivial"), build_plant(Problem(p, "trivial")), ctrl)
    return steady_covariance(G).excitations["plant.a"], G


def run_checks(seed: int = 0) -> list[tuple[str, bool, float]]:
    """Compare the numerical pipeline against the closed forms.

    Returns ``(name, passed, worst relative error)`` for each check.
    """
    rng = np.random.default_rng(seed)
    cases = [CavityParams(*rng.uniform(0.2, 3.0, 3), rng.uniform(0.01, 100.0),
                          rng.uniform(-5.0, 5.0)) for _ in range(20)]

    def rel(a, b):
        return abs(a - b) / max(abs(b), 1e-300)

    worst = dict.fromkeys(("no-control", "direct-feedback", "heterodyne", "two-mode-squeezer"),
                          0.0)
    res = 0.0
    for p in cases:
        worst["no-control"] = max(worst["no-control"],
                                  rel(no_control(Problem(p, "trivial")), cavity_no_control(p)))
        n, G = _loop_photons(p, trivial_controller(0.0))
        worst["direct-feedback"] = max(worst["direct-feedback"], rel(n, cavity_direct_feedback(p)))
        res = max(res, realizability_residual(G))
        for eta in (0.25, 0.5, 1.0, 2.0):
            n, _ = _loop_photons(p, heterodyne_amplifier(math.sinh(eta)))
            worst["heterodyne"] = max(worst["heterodyne"],
                                      rel(n, cavity_heterodyne(p, math.sinh(eta))))
            n, G = _loop_photons(p, two_mode_squeezer(eta))
            worst["two-mode-squeezer"] = max(worst["two-mode-squeezer"],
                                             rel(n, cavity_two_mode_squeezer(p, eta)))
            res = max(res, realizability_residual(G))
    out = [(k, bool(v <= 1e-9), float(v)) for k, v in worst.items()]
    out.append(("realizability", bool(res <= 1e-10), float(res)))
    return out
