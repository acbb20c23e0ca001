"""Noise sweeps over bath occupancy, family comparisons and CSV output."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from qfc.controllers import CLASSICAL_FAMILIES, COHERENT_FAMILIES, FAMILIES
from qfc.core import CavityParams, OptomechParams
from qfc.errors import InvalidParameterError, OptimizationError, OutputError
from qfc.optimize import OptimizationResult, OptimizeOptions, multi_start_optimize
from qfc.scenarios import (EMBEDS, LQGOptions, PlantParams, Problem, anchor_params,
                           embed_params, no_control)

DEFAULT_KN = tuple(float(v) for v in np.logspace(-2, 2, 25))
CSV_HEADER = ("kn", "family", "n_opt", "n_nocontrol", "ratio", "params_json", "converged",
              "wall_ms")


@dataclass(frozen=True)
class Scenario:
    """A plant, the controller families to optimise and the occupancy grid.

    ``family_restarts`` overrides ``optimizer.restarts`` per family, as
    ``(family, restarts)`` pairs.  Wall-clock times are recorded only when
    ``timing`` is set, so that default output is reproducible byte for byte.
    """

    plant: PlantParams
    families: tuple[str, ...]
    kn: tuple[float, ...] = DEFAULT_KN
    wiring: str | None = None
    optimizer: OptimizeOptions = OptimizeOptions()
    family_restarts: tuple = ()
    bounds: tuple = ()
    lqg: LQGOptions = LQGOptions()
    timing: bool = False

    def __post_init__(self):
        fams = tuple(self.families)
        if not fams:
            raise InvalidParameterError("scenario needs at least one controller family")
        unknown = [f for f in fams if f not in FAMILIES]
        if unknown:
            raise InvalidParameterError(f"unknown controller families {unknown}")
        if len(set(fams)) != len(fams):
            raise InvalidParameterError("controller families listed twice")
        kn = tuple(float(v) for v in self.kn)
        if any(not (math.isfinite(v) and v > 0) for v in kn):
            raise InvalidParameterError("sweep values must be finite and > 0")
        if any(b <= a for a, b in zip(kn, kn[1:])):
            raise InvalidParameterError("sweep values must be strictly ascending")
        object.__setattr__(self, "families", fams)
        object.__setattr__(self, "kn", kn)
        object.__setattr__(self, "family_restarts", tuple(sorted(dict(self.family_restarts).items())))
        object.__setattr__(self, "bounds", tuple(sorted(dict(self.bounds).items())))
        for f in fams:  # validates the wiring preset against the plant
            self.problem(f, kn[0] if kn else 1.0)

    def problem(self, family: str, kn: float) -> Problem:
        plant = replace(self.plant, kn=kn)
        return Problem(plant, family, self.wiring, self.bounds, self.optimizer.penalty, self.lqg)

    def options(self, family: str) -> OptimizeOptions:
        n = dict(self.family_restarts).get(family)
        return self.optimizer if n is None else replace(self.optimizer, restarts=n)

    def run_order(self) -> list[str]:
        """Families that embed into others run first at each grid point."""
        return sorted(self.families, key=lambda f: f not in EMBEDS)


@dataclass(frozen=True)
class SweepRow:
    kn: float
    family: str
    n_opt: float
    n_nocontrol: float
    ratio: float
    params: dict = field(default_factory=dict)
    converged: bool = True
    wall_ms: float = 0.0


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...] = ()

    def by_family(self, family: str) -> list[SweepRow]:
        return [r for r in self.rows if r.family == family]

    def ratios(self, family: str) -> np.ndarray:
        return np.array([r.ratio for r in self.by_family(family)])


def _sorted_rows(rows) -> tuple[SweepRow, ...]:
    return tuple(sorted(rows, key=lambda r: (r.family, r.kn)))


def _optimize_point(scenario: Scenario, family: str, kn: float, extra: list) -> OptimizationResult:
    problem = scenario.problem(family, kn)
    starts = [problem.encode(anchor_params(problem))] + list(extra)
    try:
        return multi_start_optimize(problem, scenario.options(family), extra_starts=starts)
    except OptimizationError as exc:
        raise OptimizationError(f"{family} at kn={kn!r}: {exc}", traces=exc.traces) from exc


def run_scenario(scenario: Scenario) -> SweepResult:
    """Optimise every family at every grid point.

    Each point is seeded from the family's neutral parameters, its optimum at
    the previous grid point, and the optimum of any smaller family that embeds
    into it at the same point, on top of the seeded random starts.
    """
    rows = []
    previous: dict[str, np.ndarray] = {}
    for kn in scenario.kn:
        found: dict[str, OptimizationResult] = {}
        for family in scenario.run_order():
            problem = scenario.problem(family, kn)
            extra = [previous[family]] if family in previous else []
            for src, res in found.items():
                if family in EMBEDS.get(src, ()):
                    extra.append(problem.encode(embed_params(src, res.params, family)))
            t0 = time.perf_counter()
            res = _optimize_point(scenario, family, kn, extra)
            wall = (time.perf_counter() - t0) * 1e3 if scenario.timing else 0.0
            found[family] = res
            previous[family] = res.x
            n0 = no_control(problem)
            rows.append(SweepRow(kn, family, res.value, n0, res.value / n0, dict(res.params),
                                 bool(res.converged), wall))
    return SweepResult(_sorted_rows(rows))


@dataclass(frozen=True)
class Comparison:
    """Side-by-side ratios on a shared grid.

    ``advantage`` is the best classical excitation over the best coherent one
    at each grid point, so values above 1 mean the coherent controller wins.
    It is NaN where either side has no family in the scenario.
    """

    families: tuple[str, ...]
    kn: tuple[float, ...]
    ratios: dict
    advantage: tuple[float, ...]
    result: SweepResult

    def table(self) -> list[dict]:
        return [dict(kn=k, **{f: self.ratios[f][i] for f in self.families},
                     advantage=self.advantage[i]) for i, k in enumerate(self.kn)]


def compare_families(scenario: Scenario) -> Comparison:
    if len(scenario.families) < 2:
        raise InvalidParameterError("comparison needs at least two families")
    result = run_scenario(scenario)
    n = {f: np.array([r.n_opt for r in result.by_family(f)]) for f in scenario.families}
    coh = [n[f] for f in scenario.families if f in COHERENT_FAMILIES]
    cls = [n[f] for f in scenario.families if f in CLASSICAL_FAMILIES]
    if coh and cls:
        adv = np.min(cls, axis=0) / np.min(coh, axis=0)
    else:
        adv = np.full(len(scenario.kn), np.nan)
    ratios = {f: tuple(float(v) for v in result.ratios(f)) for f in scenario.families}
    return Comparison(scenario.families, scenario.kn, ratios,
                      tuple(float(v) for v in adv), result)


def _g(v: float) -> str:
    return "%.17g" % v


def format_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in _sorted_rows(result.rows):
        w.writerow([_g(r.kn), r.family, _g(r.n_opt), _g(r.n_nocontrol), _g(r.ratio),
                    json.dumps(r.params, sort_keys=True), "true" if r.converged else "false",
                    _g(r.wall_ms)])
    return buf.getvalue()


def emit_csv(result: SweepResult, path) -> None:
    """Write ``result`` as UTF-8 CSV, rows ordered by family then occupancy."""
    text = format_csv(result)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}", path=str(path)) from exc


def parse_csv(text: str) -> SweepResult:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader, ()))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    rows = []
    for kn, fam, n_opt, n0, ratio, params, conv, wall in reader:
        rows.append(SweepRow(float(kn), fam, float(n_opt), float(n0), float(ratio),
                             json.loads(params), conv == "true", float(wall)))
    return SweepResult(tuple(rows))


def read_csv(path) -> SweepResult:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_csv(fh.read())


def default_scenario(plant: str = "cavity", families: Sequence[str] | None = None,
                     **kw) -> Scenario:
    if plant == "cavity":
        return Scenario(CavityParams(), tuple(families or ("heterodyne", "two_mode_squeezer")),
                        **kw)
    if plant == "optomech":
        return Scenario(OptomechParams(),
                        tuple(families or ("lqg_optimal", "coherent_cavity", "opo")), **kw)
    raise InvalidParameterError(f"unknown plant type {plant!r}")
