"""Randomised invariants (hypothesis)."""
import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_continuous_are

from qfc.controllers import (OPOParams, coherent_cavity_controller, opo_controller,
                             trivial_controller, two_mode_squeezer)
from qfc.core import (CavityParams, ChannelLabel, OptomechParams, cavity_model, cavity_plant,
                      optomech_plant, realizability_residual)
from qfc.errors import AlgebraicLoopError
from qfc.network import (Wiring, concatenate, feedback_interconnect, phase_shifter, relabel,
                         series)
from qfc.steady import (_care_residual, is_hurwitz, lyapunov_residual, noise_budget, solve_care,
                        solve_lyapunov, state_transfer, steady_covariance)

def _amax(M) -> float:
    return float(np.abs(M).max()) if np.size(M) else 0.0


PROPS = settings(max_examples=120, deadline=None,
                 suppress_health_check=[HealthCheck.too_slow])
angle = st.floats(0.0, 6.283)
rate = st.floats(1e-3, 50.0)
signed = st.floats(-50.0, 50.0)
squeeze = st.floats(0.0, 2.0)
WIDE = (rate, signed, squeeze)
MODERATE = (st.floats(0.05, 10.0), st.floats(-10.0, 10.0), st.floats(0.0, 1.0))


@st.composite
def slh_models(draw, prefix="g", wide=False):
    """Random SLH-built models; ``wide`` allows strong squeezing and fast rates."""
    rate, signed, squeeze = WIDE if wide else MODERATE
    kind = draw(st.sampled_from(["cavity", "opo", "coherent", "squeezer", "phase", "optomech"]))
    if kind == "cavity":
        n = draw(st.integers(1, 3))
        kappas = draw(st.lists(rate, min_size=n, max_size=n))
        chans = [ChannelLabel(f"{prefix}.in{i + 1}") for i in range(n)]
        G = cavity_model(kappas, draw(signed), channels=chans, mode=f"{prefix}.c")
        return G.replace(outputs=tuple(ChannelLabel(f"{prefix}.out{i + 1}") for i in range(n)))
    if kind == "opo":
        p = OPOParams(draw(rate), draw(rate), draw(signed), draw(rate), draw(angle),
                      draw(squeeze), draw(angle), draw(squeeze), draw(angle), draw(squeeze))
        return opo_controller(p, prefix)
    if kind == "coherent":
        return coherent_cavity_controller(draw(rate), draw(signed), draw(angle), prefix)
    if kind == "squeezer":
        return two_mode_squeezer(draw(squeeze), prefix)
    if kind == "phase":
        return phase_shifter(draw(angle), prefix)
    K = draw(st.floats(-5.0, 5.0))
    G = optomech_plant(OptomechParams(draw(st.floats(1.0, 200.0)), draw(st.floats(10.0, 1e4)),
                                      K, draw(st.floats(-5.0, 5.0))))
    return relabel(G, f"{prefix}.")


def _magnitude(G) -> float:
    return max(1.0, _amax(G.A), _amax(G.B) ** 2, _amax(G.C) ** 2, _amax(G.D) ** 2)


def _random_loop(G, data):
    n_conn = data.draw(st.integers(1, min(len(G.outputs), len(G.inputs), 3)))
    outs = data.draw(st.permutations([c.name for c in G.outputs]))[:n_conn]
    ins = data.draw(st.permutations([c.name for c in G.inputs]))[:n_conn]
    return Wiring(tuple(zip(outs, ins)))


def _loop_gain(G, w) -> float:
    """``|(I - D_loop)^{-1}|``, which amplifies rounding in the closed loop."""
    O = [k for s, _ in w.connections for k in (2 * G.output_index(s), 2 * G.output_index(s) + 1)]
    I = [k for _, d in w.connections for k in (2 * G.input_index(d), 2 * G.input_index(d) + 1)]
    return 1.0 / np.linalg.svd(np.eye(len(O)) - G.D[O][:, I], compute_uv=False)[-1]


@PROPS
@given(slh_models())
def test_slh_models_realizable(G):
    assert realizability_residual(G) <= 1e-10


@PROPS
@given(slh_models(wide=True))
def test_strongly_squeezed_models_realizable_to_rounding(G):
    assert realizability_residual(G) <= 1e-13 * _magnitude(G)


@PROPS
@given(slh_models("a"), slh_models("b"), st.data())
def test_interconnections_realizable(G1, G2, data):
    G = concatenate(G1, G2)
    w = _random_loop(G, data)
    try:
        H = feedback_interconnect(G, w)
    except AlgebraicLoopError:
        assume(False)
    assert H.n_states == G1.n_states + G2.n_states
    gain = _loop_gain(G, w)
    bound = 1e-10 if gain <= 10.0 else 1e-14 * gain ** 2 * _magnitude(H)
    assert realizability_residual(H) <= bound


@PROPS
@given(slh_models("a", wide=True), slh_models("b", wide=True))
def test_series_realizable(G1, G2):
    assume(len(G1.outputs) == len(G2.inputs))
    H = series(G1, G2)
    assert realizability_residual(H) <= 1e-13 * _magnitude(H)


@PROPS
@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_lyapunov_residual(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    A = M - (np.linalg.eigvals(M).real.max() + rng.uniform(0.05, 2.0)) * np.eye(n)
    Q = rng.normal(size=(n, n))
    Q = Q @ Q.T
    X = solve_lyapunov(A, Q)
    assert lyapunov_residual(A, X, Q) <= 1e-10 * max(1.0, np.abs(X).max() * np.abs(A).max())


@PROPS
@given(st.integers(1, 8), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_care_residual_and_stability(n, m, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(n, n))
    Q = C @ C.T + 1e-2 * np.eye(n)
    R = np.diag(rng.uniform(0.1, 2.0, m))
    X = solve_care(A, B, Q, R)
    G = B @ np.linalg.solve(R, B.T)
    assert is_hurwitz(A - G @ X)
    terms = max(1.0, _amax(Q), _amax(A.T @ X), _amax(X @ G @ X))
    assert _care_residual(A, B, Q, R, X) <= 1e-9 * terms
    ref = solve_continuous_are(A, B, Q, R)
    # near-uncontrollable draws make X huge and ill-conditioned; scipy is then
    # the less accurate of the two, so agreement is judged at its residual
    tol = max(1e-8, 10 * _care_residual(A, B, Q, R, ref) / terms)
    np.testing.assert_allclose(X, ref, rtol=max(1e-6, tol * 1e3), atol=1e-8 * _amax(ref))


@PROPS
@given(rate, rate, rate, st.floats(0.0, 100.0), signed)
def test_uncontrolled_cavity_closed_form(k1, k2, k3, kn, det):
    n = steady_covariance(cavity_plant(CavityParams(k1, k2, k3, kn, det)))["plant.a"]
    assert n == pytest.approx(k3 * kn / (k1 + k2 + k3), rel=1e-10, abs=1e-14)


@PROPS
@given(rate, rate, rate, st.floats(0.01, 100.0), signed, signed)
def test_detuning_invariance(k1, k2, k3, kn, d1, d2):
    n1 = steady_covariance(cavity_plant(CavityParams(k1, k2, k3, kn, d1)))["plant.a"]
    n2 = steady_covariance(cavity_plant(CavityParams(k1, k2, k3, kn, d2)))["plant.a"]
    assert n1 == pytest.approx(n2, rel=1e-10)


@PROPS
@given(slh_models("a"), slh_models("b"), st.data())
def test_feedback_reduction_associative(G1, G2, data):
    G = concatenate(G1, G2)
    assume(len(G.outputs) >= 2 and len(G.inputs) >= 2)
    o = data.draw(st.permutations([c.name for c in G.outputs]))[:2]
    i = data.draw(st.permutations([c.name for c in G.inputs]))[:2]
    c1, c2 = (o[0], i[0]), (o[1], i[1])
    try:
        both = feedback_interconnect(G, Wiring((c1, c2)))
        ab = feedback_interconnect(feedback_interconnect(G, Wiring((c1,))), Wiring((c2,)))
        ba = feedback_interconnect(feedback_interconnect(G, Wiring((c2,))), Wiring((c1,)))
    except AlgebraicLoopError:
        assume(False)
    for H in (ab, ba):
        assert [c.name for c in H.inputs] == [c.name for c in both.inputs]
        for X, Y in ((H.A, both.A), (H.B, both.B), (H.C, both.C), (H.D, both.D)):
            np.testing.assert_allclose(X, Y, atol=1e-12 * max(1.0, _amax(Y)))


@PROPS
@given(st.floats(0.05, 5.0), st.floats(1.0, 200.0), st.floats(10.0, 1e4))
def test_probe_force_cancels_with_direct_feedthrough(K, omega, Q):
    p = OptomechParams(omega, Q, K)
    G = concatenate(optomech_plant(p), trivial_controller(0.0))
    G = feedback_interconnect(G, Wiring((("plant.probe", "ctrl.in1"),
                                          ("ctrl.out1", "plant.feedback"))))
    j = 2 * G.input_index("plant.probe") + 1
    for w in (0.0, omega / 2, omega, 2 * omega):
        assert abs(state_transfer(G, 1j * w)[1, j]) <= 1e-10


@PROPS
@given(rate, rate, rate, st.floats(0.0, 100.0), squeeze, st.sampled_from(["squeezer", "opo"]),
       st.booleans())
def test_noise_budget_sums_and_nonnegative(k1, k2, k3, kn, r, kind, byq):
    p = CavityParams(k1, k2, k3, kn)
    ctrl = two_mode_squeezer(r) if kind == "squeezer" else \
        opo_controller(OPOParams(1.0, 0.5, 2.0, 0.2, r_in=r))
    G = concatenate(cavity_plant(p), ctrl)
    try:
        G = feedback_interconnect(G, Wiring((("plant.1", "ctrl.in1"),
                                              ("ctrl.out1", "plant.2"))))
    except AlgebraicLoopError:
        assume(False)
    assume(is_hurwitz(G.A))
    total = steady_covariance(G)["plant.a"]
    nb = noise_budget(G, mode="plant.a", by_quadrature=byq)
    assert sum(nb.values()) == pytest.approx(total, rel=1e-9, abs=1e-12)
    assert min(nb.values()) >= -1e-12 * max(1.0, total)
