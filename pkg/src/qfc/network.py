"""Wiring plants and controllers together at the quadrature ABCD level."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qfc.core import ChannelLabel, LinearModel, Mode, rotation
from qfc.errors import AlgebraicLoopError, InvalidWiringError, RelabelRequiredError

#: reciprocal condition number below which ``I - D_loop`` counts as singular
LOOP_RCOND = 1e-12


@dataclass(frozen=True)
class Wiring:
    """Output-to-input connections plus an optional order for what remains.

    ``connections`` holds ``(output_name, input_name)`` pairs.  When given,
    ``input_order``/``output_order`` must list every unconnected channel.
    """

    connections: tuple[tuple[str, str], ...] = ()
    input_order: tuple[str, ...] | None = None
    output_order: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "connections", tuple(tuple(c) for c in self.connections))
        srcs = [s for s, _ in self.connections]
        dsts = [d for _, d in self.connections]
        if len(set(srcs)) != len(srcs) or len(set(dsts)) != len(dsts):
            raise InvalidWiringError("a channel appears in more than one connection")


def _check_unique(chans: Sequence[ChannelLabel], what: str):
    seen = set()
    for ch in chans:
        if ch.name in seen:
            raise RelabelRequiredError(f"{what} channel name {ch.name!r} used twice; relabel first")
        seen.add(ch.name)


def _block_diag(mats):
    rows = sum(M.shape[0] for M in mats)
    cols = sum(M.shape[1] for M in mats)
    out = np.zeros((rows, cols))
    r = c = 0
    for M in mats:
        out[r:r + M.shape[0], c:c + M.shape[1]] = M
        r += M.shape[0]
        c += M.shape[1]
    return out


def concatenate(*models: LinearModel) -> LinearModel:
    """Direct sum of states and channels (the SLH concatenation product)."""
    inputs = [ch for G in models for ch in G.inputs]
    outputs = [ch for G in models for ch in G.outputs]
    _check_unique(inputs, "input")
    _check_unique(outputs, "output")
    modes, offset = [], 0
    for G in models:
        modes += [Mode(md.name, md.index + offset, md.classical) for md in G.modes]
        offset += G.n_states
    names = [md.name for md in modes]
    if len(set(names)) != len(names):
        raise RelabelRequiredError(f"mode names collide: {names}")

    return LinearModel._trusted(
        A=_block_diag([G.A for G in models]), B=_block_diag([G.B for G in models]),
        C=_block_diag([G.C for G in models]), D=_block_diag([G.D for G in models]),
        inputs=tuple(inputs), outputs=tuple(outputs), modes=tuple(modes),
        a=np.concatenate([G.a for G in models]) if models else np.zeros(0),
        c=np.concatenate([G.c for G in models]) if models else np.zeros(0),
        hybrid=any(G.hybrid for G in models),
        measurements=sum(G.measurements for G in models),
        actuations=sum(G.actuations for G in models),
        name="+".join(G.name for G in models if G.name),
    )


def _quad(idx: Sequence[int]) -> list[int]:
    return [q for i in idx for q in (2 * i, 2 * i + 1)]


def _ordered(remaining: list[int], chans, order, what) -> list[int]:
    if order is None:
        return remaining
    by_name = {chans[i].name: i for i in remaining}
    if sorted(order) != sorted(by_name):
        raise InvalidWiringError(
            f"{what} order {list(order)} must list exactly the free channels {sorted(by_name)}")
    return [by_name[nm] for nm in order]


def feedback_interconnect(G: LinearModel, w: Wiring) -> LinearModel:
    """Close the loops listed in ``w`` and eliminate the connected channels.

    With ``u_I = y_O`` substituted into ``y_O = C_O x + D_OI u_I + D_Or u_r``,
    the loop signal is ``u_I = M (C_O x + D_Or u_r + c_O)`` where
    ``M = (I - D_OI)^{-1}``.
    """
    if not w.connections and w.input_order is None and w.output_order is None:
        return G
    try:
        out_idx = [G.output_index(s) for s, _ in w.connections]
        in_idx = [G.input_index(d) for _, d in w.connections]
    except KeyError as exc:
        raise InvalidWiringError(str(exc)) from None
    in_rest = _ordered([i for i in range(len(G.inputs)) if i not in in_idx],
                       G.inputs, w.input_order, "input")
    out_rest = _ordered([i for i in range(len(G.outputs)) if i not in out_idx],
                        G.outputs, w.output_order, "output")
    O, I = _quad(out_idx), _quad(in_idx)
    Ir, Or = _quad(in_rest), _quad(out_rest)

    A, B, C, D = G.A, G.B, G.C, G.D
    D_loop = D[O][:, I]
    L = np.eye(len(O)) - D_loop
    if L.size:
        # measured against 1 + |D_loop| so that L ~ 0 is caught even when it
        # happens to be well conditioned
        sv = np.linalg.svd(L, compute_uv=False)
        rc = sv[-1] / (1.0 + np.linalg.norm(D_loop, 2))
        if not rc > LOOP_RCOND:
            raise AlgebraicLoopError(f"ill-posed loop: rcond(I - D_loop) = {rc:.3g}")
        M = np.linalg.inv(L)
    else:
        M = L
    B_I = B[:, I]
    D_O, D_r = D[O], D[Or]
    D_rI = D_r[:, I]
    C_O = C[O, :]
    D_Or = D_O[:, Ir]
    c_O = G.c[O]
    return LinearModel._trusted(
        A=A + B_I @ M @ C_O,
        B=B[:, Ir] + B_I @ M @ D_Or,
        C=C[Or, :] + D_rI @ M @ C_O,
        D=D_r[:, Ir] + D_rI @ M @ D_Or,
        inputs=tuple(G.inputs[i] for i in in_rest),
        outputs=tuple(G.outputs[i] for i in out_rest),
        modes=G.modes,
        a=G.a + B_I @ M @ c_O,
        c=G.c[Or] + D_rI @ M @ c_O,
        hybrid=G.hybrid,
        measurements=G.measurements,
        actuations=G.actuations,
        name=G.name,
    )


def series(G1: LinearModel, G2: LinearModel) -> LinearModel:
    """Cascade: every output of ``G1`` drives the same-position input of ``G2``."""
    if len(G1.outputs) != len(G2.inputs):
        raise InvalidWiringError(
            f"series: {len(G1.outputs)} outputs cannot feed {len(G2.inputs)} inputs")
    conns = tuple((o.name, i.name) for o, i in zip(G1.outputs, G2.inputs))
    return feedback_interconnect(concatenate(G1, G2), Wiring(conns))


def static_model(D, inputs: Sequence[str | ChannelLabel], outputs: Sequence[str | ChannelLabel],
                 name: str = "", **kw) -> LinearModel:
    """A memoryless component ``dy = D dw``."""
    as_label = lambda ch: ch if isinstance(ch, ChannelLabel) else ChannelLabel(ch)
    D = np.asarray(D, dtype=float)
    return LinearModel(np.zeros((0, 0)), np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)), D,
                       [as_label(c) for c in inputs], [as_label(c) for c in outputs], (),
                       name=name, **kw)


def phase_shifter(theta: float, name: str = "ps") -> LinearModel:
    return static_model(rotation(theta), [f"{name}.in"], [f"{name}.out"], name=name)


def identity(n_channels: int = 1, name: str = "id") -> LinearModel:
    return static_model(np.eye(2 * n_channels),
                        [f"{name}.in{i + 1}" for i in range(n_channels)],
                        [f"{name}.out{i + 1}" for i in range(n_channels)], name=name)


def relabel(G: LinearModel, prefix: str) -> LinearModel:
    """Prefix every channel and mode name (resolves concatenation collisions)."""
    return G.replace(
        inputs=tuple(ch.renamed(f"{prefix}{ch.name}") for ch in G.inputs),
        outputs=tuple(ch.renamed(f"{prefix}{ch.name}") for ch in G.outputs),
        modes=tuple(Mode(f"{prefix}{md.name}", md.index, md.classical) for md in G.modes),
    )

