"""Synchronous-round max-consensus engines: naive-MC, D-MC and RD-MC.

All state arrays carry the agent axis last and may have any number of
leading batch axes, so one call advances many independent realizations in
lockstep.  Every per-agent reduction is an explicit elementwise loop over
neighbor slots, which keeps results bit-identical whatever the batch size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .graph import Graph
from .noise import LinkNoiseModel, link_noise_block

Engine = Literal["naive", "dmc", "rdmc"]
ENGINES: tuple[str, ...] = ("naive", "dmc", "rdmc")
DIVERGENCE_BOUND = 1e6


class ProtocolOrderError(RuntimeError):
    """A round was requested before the data it consumes exists."""


@dataclass(frozen=True)
class ProblemInstance:
    initial: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.initial, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("initial values must be a non-empty 1-D array")
        a.setflags(write=False)
        object.__setattr__(self, "initial", a)

    @property
    def num_agents(self) -> int:
        return self.initial.size

    @property
    def true_max(self) -> float:
        return float(self.initial.max())


@dataclass(frozen=True)
class PenaltyParams:
    rho_y: float = 1.0
    rho_z: float = 1.0

    def __post_init__(self) -> None:
        if not (self.rho_y > 0 and self.rho_z > 0):
            raise ValueError(f"penalty parameters must be positive, got {self.rho_y}, {self.rho_z}")

    def step_scale(self, degrees: np.ndarray) -> np.ndarray:
        """Per-agent ``n_i = 1 / (rho_y + 2 rho_z d_i)``."""
        return 1.0 / (self.rho_y + 2.0 * self.rho_z * np.asarray(degrees, dtype=float))


def uniform_weights(window: int) -> tuple[float, ...]:
    if window < 1:
        raise ValueError(f"window size must be >= 1, got {window}")
    return (1.0 / window,) * window


def check_weights(window: int, weights: Sequence[float] | None) -> tuple[float, ...]:
    if window < 1:
        raise ValueError(f"window size must be >= 1, got {window}")
    if weights is None:
        return uniform_weights(window)
    w = tuple(float(a) for a in weights)
    if len(w) != window:
        raise ValueError(f"expected {window} window weights, got {len(w)}")
    if any(a < 0 for a in w):
        raise ValueError(f"window weights must be non-negative, got {w}")
    if abs(sum(w) - 1.0) > 1e-12:
        raise ValueError(f"window weights must sum to 1, got {sum(w)!r}")
    return w


def _check_shape(x: np.ndarray, g: Graph) -> None:
    if x.shape[-1] != g.num_agents:
        raise ValueError(f"state has {x.shape[-1]} agents, graph has {g.num_agents}")


def neighbor_sum(values: np.ndarray, g: Graph, noise: np.ndarray | None = None) -> np.ndarray:
    """Sum over neighbors j of ``values[j] + noise[j -> i]`` for each receiver i.

    ``noise`` has the directed-link axis last, ordered as ``g.links``.
    """
    total = np.zeros(values.shape)
    if g.num_links == 0:
        return total
    senders, link_idx, mask = g.slot_tables
    for m in range(senders.shape[1]):
        got = values[..., senders[:, m]]
        if noise is not None:
            got = got + noise[..., link_idx[:, m]]
        total += np.where(mask[:, m], got, 0.0)
    return total


# naive max-consensus

@dataclass(frozen=True)
class NaiveState:
    x: np.ndarray
    k: int = 0


def naive_init(inst: ProblemInstance, batch_shape: tuple[int, ...] = ()) -> NaiveState:
    return NaiveState(np.broadcast_to(inst.initial, batch_shape + inst.initial.shape).copy())


def naive_round(state: NaiveState, g: Graph, noise: np.ndarray | None = None) -> NaiveState:
    x = state.x
    _check_shape(x, g)
    if g.num_links == 0:
        return NaiveState(x.copy(), state.k + 1)
    senders, link_idx, mask = g.slot_tables
    got = x[..., senders]
    if noise is not None:
        got = got + noise[..., link_idx]
    best = np.where(mask, got, -np.inf).max(axis=-1)
    return NaiveState(np.maximum(x, best), state.k + 1)


# D-MC

@dataclass(frozen=True)
class DmcState:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    # sum over neighbors of the noisy x_j(k) received at the end of the previous round
    received: np.ndarray | None
    k: int = 0
    messages: int = 0


def dmc_init(inst: ProblemInstance, batch_shape: tuple[int, ...] = ()) -> DmcState:
    z = np.zeros(batch_shape + (inst.num_agents,))
    # x_j(0) = 0 is known to every agent, nothing is transmitted before round 0
    return DmcState(x=z, y=z.copy(), u=z.copy(), v=z.copy(), received=z.copy())


def dmc_round(
    state: DmcState,
    g: Graph,
    inst: ProblemInstance,
    params: PenaltyParams,
    noise: np.ndarray | None = None,
    fresh_noise: np.ndarray | None = None,
) -> DmcState:
    """One D-MC iteration.

    ``noise`` perturbs this round's broadcast of x(k+1), whose receptions feed
    the v-update now and the x-update of the next round.  With ``fresh_noise``
    the x-update instead uses an independent retransmission of x(k).
    """
    _check_shape(state.x, g)
    if state.received is None and fresh_noise is None:
        raise ProtocolOrderError(f"round {state.k}: no cached receptions for the x-update")
    J = inst.num_agents
    d = g.degrees
    n = params.step_scale(d)
    ry, rz = params.rho_y, params.rho_z
    extra = 0
    if fresh_noise is not None:
        received = neighbor_sum(state.x, g, fresh_noise)
        extra = g.num_links
    else:
        received = state.received

    x = n * (-1.0 / J + ry * (state.y - state.u) - state.v + rz * (d * state.x + received))
    y = np.maximum(x + state.u, inst.initial)
    u = state.u + x - y
    got = neighbor_sum(x, g, noise)
    v = state.v + rz * (d * x - got)
    return DmcState(x, y, u, v, got, state.k + 1, state.messages + g.num_links + extra)


# RD-MC

@dataclass(frozen=True)
class RdmcState:
    # history[..., l, :] is x(k - l); rows past the start are zero padding
    history: np.ndarray
    y: np.ndarray
    u: np.ndarray
    z: np.ndarray
    s: np.ndarray
    weights: tuple[float, ...]
    k: int = 1
    messages: int = 0

    @property
    def x(self) -> np.ndarray:
        return self.history[..., 0, :]

    @property
    def window(self) -> int:
        return len(self.weights)


def rdmc_init(
    inst: ProblemInstance,
    g: Graph,
    params: PenaltyParams,
    window: int = 1,
    weights: Sequence[float] | None = None,
    consistent_start: bool = False,
    batch_shape: tuple[int, ...] = (),
) -> RdmcState:
    """State at k = 1.

    By default this is the reference initialization: x(1) = -n/J,
    u(1) = z(1) = 0, s(1) = -2n/J, with y(1) taken as 0.  With
    ``consistent_start`` the y-projection of the first D-MC round is applied
    instead, y(1) = max(x(1), a), z(1) = 2 y(1), u(1) = x(1) - y(1), which
    makes noiseless RD-MC with window 1 reproduce D-MC exactly.
    """
    w = check_weights(window, weights)
    _check_shape(inst.initial, g)
    J = inst.num_agents
    n = params.step_scale(g.degrees)
    shape = batch_shape + (J,)
    x1 = np.broadcast_to(-n / J, shape).copy()
    history = np.zeros(batch_shape + (max(window, 2), J))
    history[..., 0, :] = x1
    s = np.broadcast_to(-2.0 * n / J, shape).copy()
    if consistent_start:
        y = np.maximum(x1, inst.initial)
        z = 2.0 * y
        u = x1 - y
    else:
        y = np.zeros(shape)
        z = np.zeros(shape)
        u = np.zeros(shape)
    return RdmcState(history, y, u, z, s, w)


def rdmc_round(
    state: RdmcState,
    g: Graph,
    inst: ProblemInstance,
    params: PenaltyParams,
    noise: np.ndarray | None = None,
) -> RdmcState:
    _check_shape(state.s, g)
    d = g.degrees
    n = params.step_scale(d)
    ry, rz = params.rho_y, params.rho_z
    x_k = state.history[..., 0, :]
    x_km1 = state.history[..., 1, :]

    received = neighbor_sum(state.s, g, noise)
    x = (1.0 - ry * n) * x_k - rz * d * n * x_km1 + n * (ry * state.z + rz * received)
    history = np.concatenate([x[..., None, :], state.history[..., :-1, :]], axis=-2)
    xbar = np.zeros_like(x)
    for lag, alpha in enumerate(state.weights):
        xbar += alpha * history[..., lag, :]
    y = np.maximum(x + state.u, inst.initial)
    u = state.u + x - y
    z = 2.0 * y - state.y
    s = 2.0 * xbar - x_k
    return RdmcState(history, y, u, z, s, state.weights, state.k + 1, state.messages + g.num_links)


# drivers

@dataclass
class Trajectory:
    """x(0..K) per agent; rows from ``diverged_at`` onwards are NaN."""

    x: np.ndarray
    y: np.ndarray | None
    diverged_at: int | None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    @property
    def flagged(self) -> np.ndarray:
        f = np.zeros(self.x.shape[0], dtype=bool)
        if self.diverged_at is not None:
            f[self.diverged_at:] = True
        return f


@dataclass
class BatchTrajectory:
    x: np.ndarray            # (B, K+1, J)
    y: np.ndarray | None     # (B, J)
    diverged_at: np.ndarray  # (B,), -1 when the run stayed bounded

    def __getitem__(self, b: int) -> Trajectory:
        at = int(self.diverged_at[b])
        return Trajectory(self.x[b], None if self.y is None else self.y[b], None if at < 0 else at)


def simulate(
    engine: str,
    g: Graph,
    inst: ProblemInstance,
    params: PenaltyParams,
    iterations: int,
    *,
    window: int = 1,
    weights: Sequence[float] | None = None,
    noise: LinkNoiseModel | None = None,
    realizations: Sequence[int] = (0,),
    dmc_redraw: bool = False,
    consistent_start: bool = False,
) -> BatchTrajectory:
    """Run ``engine`` for ``iterations`` rounds on a batch of noise realizations."""
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    _check_shape(inst.initial, g)
    K = iterations
    reals = [int(r) for r in realizations]
    B, J = len(reals), g.num_agents
    noisy = noise is not None and noise.sigma2 > 0.0
    rounds = K - 1 if engine == "rdmc" else K
    w = link_noise_block(noise, g.links, reals, rounds) if noisy else None
    w_fresh = None
    if noisy and engine == "dmc" and dmc_redraw:
        w_fresh = link_noise_block(noise, g.links, reals, rounds, channel=1)

    xs = np.empty((B, K + 1, J))
    diverged_at = np.full(B, -1, dtype=np.int64)

    def record(k: int, x: np.ndarray) -> None:
        xs[:, k, :] = x
        blown = (diverged_at < 0) & ~np.all(np.abs(x) <= DIVERGENCE_BOUND, axis=-1)
        diverged_at[blown] = k

    y_final = None
    with np.errstate(over="ignore", invalid="ignore"):
        if engine == "naive":
            st = naive_init(inst, (B,))
            record(0, st.x)
            for k in range(K):
                st = naive_round(st, g, None if w is None else w[:, k])
                record(k + 1, st.x)
        elif engine == "dmc":
            st = dmc_init(inst, (B,))
            record(0, st.x)
            for k in range(K):
                fresh = None if (w_fresh is None or k == 0) else w_fresh[:, k]
                st = dmc_round(st, g, inst, params, None if w is None else w[:, k], fresh)
                record(k + 1, st.x)
            y_final = st.y
        else:
            st = rdmc_init(inst, g, params, window, weights, consistent_start, (B,))
            record(0, st.history[:, 1, :])
            record(1, st.x)
            for k in range(1, K):
                st = rdmc_round(st, g, inst, params, None if w is None else w[:, k - 1])
                record(k + 1, st.x)
            y_final = st.y

    for b in np.flatnonzero(diverged_at >= 0):
        xs[b, diverged_at[b]:, :] = np.nan
    return BatchTrajectory(xs, y_final, diverged_at)


def run(
    engine: str,
    g: Graph,
    inst: ProblemInstance,
    params: PenaltyParams,
    iterations: int,
    *,
    window: int = 1,
    weights: Sequence[float] | None = None,
    noise: LinkNoiseModel | None = None,
    realization: int = 0,
    **kwargs,
) -> Trajectory:
    batch = simulate(
        engine, g, inst, params, iterations, window=window, weights=weights,
        noise=noise, realizations=[realization], **kwargs,
    )
    return batch[0]
