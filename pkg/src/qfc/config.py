"""JSON scenario files.

A config mirrors :class:`qfc.experiments.Scenario` field for field::

    {
      "plant": {"type": "optomech", "omega": 100, "Q": 10000},
      "families": ["lqg_optimal", "coherent_cavity", "opo"],
      "wiring": "fig3",
      "kn": {"logspace": [-2, 2, 25]},
      "optimizer": {"restarts": 8, "seed": 0},
      "family_restarts": {"opo": 4},
      "bounds": {"K": [0, 100]},
      "lqg": {"eps0": 0.01},
      "timing": false
    }

``kn`` is either an explicit ascending list or ``{"logspace": [a, b, n]}``
meaning ``n`` log-spaced points from ``10**a`` to ``10**b``.  Unknown keys
are rejected.
"""
from __future__ import annotations

import json
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from qfc.core import CavityParams, OptomechParams
from qfc.errors import ConfigError, QfcError
from qfc.experiments import DEFAULT_KN, Scenario
from qfc.optimize import OptimizeOptions
from qfc.scenarios import LQGOptions


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CavityPlant(_Strict):
    type: Literal["cavity"]
    k1: float = 1.0
    k2: float = 1.0
    k3: float = 1.0
    detuning: float = 0.0

    def params(self) -> CavityParams:
        return CavityParams(self.k1, self.k2, self.k3, 0.0, self.detuning)


class OptomechPlant(_Strict):
    type: Literal["optomech"]
    omega: float = 100.0
    Q: float = 1e4

    def params(self) -> OptomechParams:
        return OptomechParams(self.omega, self.Q)


class Logspace(_Strict):
    logspace: tuple[float, float, int]

    def values(self) -> tuple[float, ...]:
        a, b, n = self.logspace
        return tuple(float(v) for v in np.logspace(a, b, n))


class OptimizerConfig(_Strict):
    restarts: int = 32
    max_iters: int = 2000
    tol: float = 1e-10
    penalty: float = 1e6
    seed: int = Field(0, ge=0, lt=2 ** 64)
    workers: int = 1


class LQGConfig(_Strict):
    eps0: float = 1e-2
    rtol: float = 1e-5
    factor: float = 10.0
    max_steps: int = 12


class ScenarioConfig(_Strict):
    plant: Annotated[Union[CavityPlant, OptomechPlant], Field(discriminator="type")]
    families: list[str]
    wiring: str | None = None
    kn: Union[list[float], Logspace, None] = None
    optimizer: OptimizerConfig = OptimizerConfig()
    family_restarts: dict[str, int] = {}
    bounds: dict[str, tuple[float, float]] = {}
    lqg: LQGConfig = LQGConfig()
    timing: bool = False

    def scenario(self, seed: int | None = None, restarts: int | None = None) -> Scenario:
        opt = self.optimizer.model_dump()
        if seed is not None:
            opt["seed"] = seed
        if restarts is not None:
            opt["restarts"] = restarts
        if self.kn is None:
            kn = DEFAULT_KN
        elif isinstance(self.kn, Logspace):
            kn = self.kn.values()
        else:
            kn = tuple(self.kn)
        return Scenario(self.plant.params(), tuple(self.families), kn, self.wiring,
                        OptimizeOptions(**opt), tuple(self.family_restarts.items()),
                        tuple(self.bounds.items()), LQGOptions(**self.lqg.model_dump()),
                        self.timing)


def parse_config(text: str, seed: int | None = None, restarts: int | None = None) -> Scenario:
    """Parse and validate a JSON config; every failure is a :class:`ConfigError`."""
    try:
        cfg = ScenarioConfig.model_validate(json.loads(text))
        return cfg.scenario(seed, restarts)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    except ValidationError as exc:
        raise ConfigError(f"invalid config:\n{exc}") from exc
    except (QfcError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def load_config(path, seed: int | None = None, restarts: int | None = None) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config(text, seed, restarts)
