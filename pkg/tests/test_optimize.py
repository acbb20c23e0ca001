import math

import numpy as np
import pytest

from qfc.core import CavityParams, OptomechParams
from qfc.errors import InvalidParameterError, InvalidWiringError, OptimizationError
from qfc.optimize import (InvalidStartError, OptimizeOptions, multi_start_optimize, nelder_mead,
                          start_points)
from qfc.scenarios import (FAMILY_PARAMS, ParamSpec, Problem, anchor_params, embed_params,
                           evaluate_params, fold, no_control, objective)


def _het_closed_form(p, xi):
    b = math.sqrt(p.k1 * p.k2)
    return (p.k2 * xi ** 2 + p.k3 * p.kn) / (p.k + 2 * b * xi)


class TestNelderMead:
    def test_bowl(self):
        r = nelder_mead(lambda x: float(x @ x), [1.0, 1.0])
        assert np.linalg.norm(r.x) < 1e-4 and r.converged

    def test_rosenbrock(self):
        f = lambda x: 100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2
        r = nelder_mead(f, [-1.0, 1.0], tol=1e-14, max_iters=5000)
        assert r.fun < 1e-6

    def test_matches_grid_scan(self):
        p = CavityParams(0.7, 1.3, 2.1, 3.0)
        f = lambda x: _het_closed_form(p, math.sinh(x[0]))
        r = nelder_mead(f, [2.0], tol=1e-14)
        grid = np.linspace(0.0, 4.0, 400001)
        eta_grid = grid[np.argmin([f([e]) for e in grid[::100]]) * 100]
        fine = grid[max(0, int(eta_grid / 1e-5) - 200):int(eta_grid / 1e-5) + 200]
        eta_grid = fine[np.argmin([f([e]) for e in fine])]
        assert abs(r.x[0] - eta_grid) < 1e-3

    def test_deterministic(self):
        f = lambda x: float(np.sum((x - 0.3) ** 2) + np.sin(5 * x[0]))
        a, b = nelder_mead(f, [1.0, -2.0]), nelder_mead(f, [1.0, -2.0])
        assert np.array_equal(a.x, b.x) and a.fun == b.fun

    def test_invalid_start(self):
        with pytest.raises(InvalidStartError):
            nelder_mead(lambda x: math.nan, [0.0])

    def test_iteration_cap(self):
        f = lambda x: 100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2
        r = nelder_mead(f, [-1.0, 1.0], max_iters=5)
        assert r.nit <= 5 and not r.converged


class TestParamSpec:
    def test_fold(self):
        assert fold(1.5, 0.0, 1.0) == pytest.approx(0.5)
        assert fold(-0.25, 0.0, 1.0) == pytest.approx(0.25)
        assert fold(2.25, 0.0, 1.0) == pytest.approx(0.25)

    @pytest.mark.parametrize("spec,v", [(ParamSpec("k", "log", 1e-4, 1e3), 3.7),
                                        (ParamSpec("K", "sq", 0.0, 100.0), 42.0),
                                        (ParamSpec("g", "linear", 0.0, 10.0), 2.5),
                                        (ParamSpec("t", "phase"), 5.0)])
    def test_round_trip(self, spec, v):
        assert spec.value(spec.internal(v)) == pytest.approx(v, rel=1e-14)

    def test_values_stay_in_bounds(self, rng):
        for specs in FAMILY_PARAMS.values():
            for s in specs:
                for u in rng.normal(scale=50.0, size=50):
                    v = s.value(u)
                    assert s.lo <= v <= s.hi or (s.scale == "phase" and 0 <= v < 2 * math.pi)

    def test_zero_reachable_for_sq(self):
        assert ParamSpec("K", "sq", 0.0, 100.0).value(0.0) == 0.0


class TestProblem:
    def test_unknown_family(self):
        with pytest.raises(InvalidParameterError):
            Problem(CavityParams(), "laser")

    def test_wiring_must_fit_plant(self):
        with pytest.raises(InvalidWiringError):
            Problem(CavityParams(), "trivial", "fig3")
        with pytest.raises(InvalidWiringError):
            Problem(CavityParams(), "trivial", "fig9")

    def test_optomech_adds_coupling(self):
        names = [s.name for s in Problem(OptomechParams(), "coherent_cavity").specs]
        assert names == ["kappa", "detuning", "phase", "K"]

    def test_bound_override(self):
        pr = Problem(CavityParams(), "heterodyne", bounds={"xi": (0.0, 2.0)})
        assert pr.specs[0].hi == 2.0

    def test_anchor_switches_control_off(self):
        pr = Problem(CavityParams(kn=2.0), "heterodyne")
        assert evaluate_params(pr, anchor_params(pr))[0] == pytest.approx(no_control(pr))
        pr = Problem(OptomechParams(kn=2.0), "opo")
        assert evaluate_params(pr, anchor_params(pr))[0] == pytest.approx(2.0, rel=1e-12)


class TestObjective:
    def test_trivial_matches_closed_form(self, unit_cavity):
        pr = Problem(unit_cavity, "trivial")
        assert objective(pr, [0.0]) == pytest.approx(1 / 5, rel=1e-12)

    def test_unstable_opo_penalised(self, unit_cavity):
        pr = Problem(unit_cavity, "opo")
        prm = dict(kappa1=0.1, kappa2=0.0, detuning=0.0, eps_sq=50.0, theta_sq=0.0, r_in=0.0,
                   phi_in=0.0, r_out=0.0, phi_out=0.0, eta_out=0.0)
        assert objective(pr, pr.encode(prm)) > 1e6

    def test_zero_coupling_is_no_control(self):
        pr = Problem(OptomechParams(kn=7.0), "homodyne")
        prm = dict(w=1.0, g=2.0, gain=5.0, phi=0.3, K=0.0)
        assert objective(pr, pr.encode(prm)) == pytest.approx(7.0, rel=1e-10)

    def test_lqg_reports_control_weight(self, unit_cavity):
        val, G, info = evaluate_params(Problem(unit_cavity, "lqg_optimal"), {})
        assert info["cheap_limit_converged"] and info["eps"] < 1e-2
        assert G.is_hybrid and val > 0

    def test_embedding_is_exact(self):
        pc = Problem(OptomechParams(kn=1.0), "coherent_cavity")
        po = Problem(OptomechParams(kn=1.0), "opo")
        prm = dict(kappa=11.7, detuning=100.0, phase=0.06, K=1.7)
        v_c = evaluate_params(pc, prm)[0]
        v_o = evaluate_params(po, embed_params("coherent_cavity", prm, "opo"))[0]
        assert v_o == pytest.approx(v_c, rel=1e-12)


QUICK = OptimizeOptions(restarts=6, seed=3)


class TestMultiStart:
    def test_squeezer_no_worse_than_trivial(self, unit_cavity):
        r = multi_start_optimize(Problem(unit_cavity, "two_mode_squeezer"), QUICK)
        assert r.value <= 0.2 + 1e-12 and r.stable

    def test_heterodyne_ineffective_in_quantum_regime(self):
        p = CavityParams(kn=0.01)
        r = multi_start_optimize(Problem(p, "heterodyne"), QUICK)
        assert r.params["xi"] < 0.01
        assert r.value / no_control(Problem(p, "heterodyne")) == pytest.approx(1.0, abs=0.02)

    def test_heterodyne_respects_closed_form_floor(self):
        for kn in (0.03, 1.0, 30.0):
            p = CavityParams(0.7, 1.3, 2.1, kn)
            r = multi_start_optimize(Problem(p, "heterodyne"), QUICK)
            b, c = math.sqrt(p.k1 * p.k2), p.k3 * p.kn
            xi = (-p.k2 * p.k + math.sqrt((p.k2 * p.k) ** 2 + 4 * p.k2 * b * b * c)) / (2 * p.k2 * b)
            floor = _het_closed_form(p, xi)
            assert r.value >= floor - 1e-6
            assert r.value == pytest.approx(floor, rel=1e-8)

    def test_cavity_resonates_with_mirror(self):
        r = multi_start_optimize(Problem(OptomechParams(kn=1.0), "coherent_cavity"),
                                 OptimizeOptions(restarts=8))
        assert abs(r.params["detuning"] - 100.0) < 5.0
        assert r.value < 0.01

    def test_deterministic_and_worker_independent(self, unit_cavity):
        pr = Problem(unit_cavity, "coherent_cavity")
        a = multi_start_optimize(pr, QUICK)
        b = multi_start_optimize(pr, QUICK)
        c = multi_start_optimize(pr, OptimizeOptions(restarts=6, seed=3, workers=2))
        for r in (b, c):
            assert r.value == a.value and np.array_equal(r.x, a.x)
            assert r.best_start == a.best_start and r.traces == a.traces

    def test_more_restarts_never_worse(self, unit_cavity):
        pr = Problem(CavityParams(kn=30.0), "heterodyne")
        vals = [multi_start_optimize(pr, OptimizeOptions(restarts=n, seed=11)).value
                for n in (1, 2, 4, 8)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_start_prefix(self):
        pr = Problem(CavityParams(), "coherent_cavity")
        a, b = start_points(pr, 3, 5), start_points(pr, 7, 5)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_all_starts_diverged(self, unit_cavity):
        # parametric gain far above every available loss rate
        pr = Problem(unit_cavity, "opo", bounds={"eps_sq": (200.0, 300.0),
                                                 "kappa1": (1e-4, 1e-3),
                                                 "kappa2": (0.0, 1e-6),
                                                 "detuning": (0.0, 1e-3)})
        with pytest.raises(OptimizationError) as exc:
            multi_start_optimize(pr, OptimizeOptions(restarts=2, max_iters=20,
                                                     penalty=1e6))
        assert len(exc.value.traces) == 2

    def test_options_validated(self):
        with pytest.raises(InvalidParameterError):
            OptimizeOptions(restarts=0)


class TestFamilyNesting:
    def test_coherent_families_on_cavity(self, unit_cavity):
        pr = Problem(unit_cavity, "coherent_cavity")
        coh = multi_start_optimize(pr, QUICK)
        po = Problem(unit_cavity, "opo")
        opo = multi_start_optimize(po, QUICK, [po.encode(embed_params("coherent_cavity",
                                                                      coh.params, "opo"))])
        assert coh.value <= 0.2 * (1 + 1e-8)
        assert opo.value <= coh.value + 1e-12

    def test_opo_contains_two_mode_squeezer(self):
        p = CavityParams(kn=100.0)
        sq = multi_start_optimize(Problem(p, "two_mode_squeezer"), QUICK)
        po = Problem(p, "opo")
        seed = po.encode(embed_params("two_mode_squeezer", sq.params, "opo"))
        opo = multi_start_optimize(po, OptimizeOptions(restarts=2), [seed])
        assert opo.value <= sq.value + 1e-6

    def test_lqg_no_worse_than_heterodyne(self):
        p = CavityParams(0.7, 1.3, 2.1, 3.0)
        het = multi_start_optimize(Problem(p, "heterodyne"), QUICK)
        lqg = multi_start_optimize(Problem(p, "lqg_optimal"), QUICK)
        assert lqg.value <= het.value * (1 + 1e-5)

    def test_homodyne_family_reaches_lqg(self):
        p = OptomechParams(kn=100.0)
        lqg = multi_start_optimize(Problem(p, "lqg_optimal"), OptimizeOptions(restarts=4))
        hom = multi_start_optimize(Problem(p, "homodyne"), OptimizeOptions(restarts=8))
        assert abs(hom.value / lqg.value - 1.0) < 0.01
