"""ODE integration: fixed-step euler/rk4 and adaptive Dormand-Prince 5(4).

A vector field is any callable ``f(state, t) -> state`` over Tensors.  Fixed
step methods run on tensor ops, so the same stepper serves plain inference
(under no_grad) and recorded integration for training.  dopri5 is adaptive
with an embedded 4th-order error estimate and a quartic dense-output
interpolant, and is inference-only: recording through an accept/reject loop
is deliberately unsupported.

Fixed-step integration lands on every query time exactly: each inter-query
segment is covered by equal full steps plus one final partial step (or, in
substep mode, by ``substeps`` equal steps of the segment).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..autodiff import Tensor, add, concat, mul, no_grad, reshape
from ..exceptions import (
    ContractError,
    ConvergenceError,
    DivergenceError,
    UnsupportedConfigError,
)

VectorField = Callable[[Tensor, float], Tensor]

FIXED_STEP_METHODS = ("euler", "rk4")
METHODS = FIXED_STEP_METHODS + ("dopri5",)


@dataclass
class SolverConfig:
    method: str = "rk4"
    step: float | None = None      # absolute fixed step; None -> substep mode
    substeps: int = 4              # equal steps per inter-query segment
    rtol: float = 1e-6
    atol: float = 1e-9
    max_steps: int = 100_000

    def validated(self) -> "SolverConfig":
        if self.method not in METHODS:
            raise ContractError(f"solver method {self.method!r} not in {METHODS}")
        if self.step is not None and self.step <= 0:
            raise ContractError(f"solver step must be positive, got {self.step}")
        if self.substeps < 1:
            raise ContractError(f"solver substeps must be >= 1, got {self.substeps}")
        if self.rtol <= 0 or self.atol < 0:
            raise ContractError(f"solver tolerances must be positive (rtol={self.rtol}, atol={self.atol})")
        if self.max_steps < 1:
            raise ContractError(f"solver max_steps must be >= 1, got {self.max_steps}")
        return self


@dataclass
class Trajectory:
    """States evaluated at the query times; states[i] corresponds to times[i]."""

    times: np.ndarray
    states: Tensor  # (T, ...) stacked along axis 0

    def state_array(self) -> np.ndarray:
        return self.states.data


def euler_step(f: VectorField, h: Tensor, t: float, dt: float) -> Tensor:
    return add(h, mul(Tensor(dt), f(h, t)))


def rk4_step(f: VectorField, h: Tensor, t: float, dt: float) -> Tensor:
    half = 0.5 * dt
    k1 = f(h, t)
    k2 = f(add(h, mul(Tensor(half), k1)), t + half)
    k3 = f(add(h, mul(Tensor(half), k2)), t + half)
    k4 = f(add(h, mul(Tensor(dt), k3)), t + dt)
    acc = add(add(k1, mul(Tensor(2.0), k2)), add(mul(Tensor(2.0), k3), k4))
    return add(h, mul(Tensor(dt / 6.0), acc))


_STEppers = {"euler": euler_step, "rk4": rk4_step}


def _check_times(t0: float, times: Sequence[float]) -> np.ndarray:
    ts = np.asarray(list(times), dtype=np.float64)
    if ts.size == 0:
        raise ContractError("integrate: need at least one query time")
    if np.any(ts < t0):
        raise ContractError(f"integrate: query times must be >= t0={t0}")
    if np.any(np.diff(ts) <= 0):
        raise ContractError("integrate: query times must be strictly increasing")
    return ts


def _fixed_step_run(f, h0, t0, ts, cfg) -> Tensor:
    stepper = _STEppers[cfg.method]
    h = h0
    states = []
    t_prev = float(t0)
    for t_q in ts:
        gap = float(t_q) - t_prev
        if gap == 0.0:
            states.append(h)
            continue
        if cfg.step is None:
            n = cfg.substeps
            dt = gap / n
            for j in range(n):
                h = stepper(f, h, t_prev + j * dt, dt)
        else:
            n_full = int(math.floor(gap / cfg.step + 1e-9))
            rem = gap - n_full * cfg.step
            for j in range(n_full):
                h = stepper(f, h, t_prev + j * cfg.step, cfg.step)
            if rem > 1e-12 * max(1.0, abs(float(t_q))):
                h = stepper(f, h, t_prev + n_full * cfg.step, rem)
        if not np.all(np.isfinite(h.data)):
            raise DivergenceError(f"non-finite state while stepping toward t={t_q}")
        states.append(h)
        t_prev = float(t_q)
    return concat([reshape(s, (1,) + s.shape) for s in states], axis=0)


def integrate(f: VectorField, h0: Tensor, t0: float, times: Sequence[float], cfg: SolverConfig) -> Trajectory:
    """Integrate without recording; returns states at the query times."""
    cfg = cfg.validated()
    ts = _check_times(t0, times)
    h0 = h0 if isinstance(h0, Tensor) else Tensor(h0)
    with no_grad():
        if cfg.method == "dopri5":
            dense = dopri5_dense(f, h0.data, t0, float(ts[-1]), cfg)
            states = np.stack([dense.evaluate(t) for t in ts], axis=0)
            return Trajectory(ts, Tensor(states))
        states = _fixed_step_run(f, h0, t0, ts, cfg)
    return Trajectory(ts, states)


def integrate_recorded(
    f: VectorField, h0: Tensor, t0: float, times: Sequence[float], cfg: SolverConfig
) -> Trajectory:
    """Fixed-step integration recorded on the graph (differentiable end to end)."""
    cfg = cfg.validated()
    if cfg.method not in FIXED_STEP_METHODS:
        raise UnsupportedConfigError(
            f"integrate_recorded supports fixed-step methods {FIXED_STEP_METHODS}; "
            f"got {cfg.method!r} (adaptive accept/reject control flow is not differentiable here)"
        )
    ts = _check_times(t0, times)
    return Trajectory(ts, _fixed_step_run(f, h0, t0, ts, cfg))


# -- Dormand-Prince 5(4) --------------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_ERR = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# dense-output weights for the quartic interpolant
_D = np.array(
    [
        -12715105075 / 11282082432,
        0.0,
        87487479700 / 32700410799,
        -10690763975 / 1880347072,
        701980252875 / 199316789632,
        -1453857185 / 822651844,
        69997945 / 29380423,
    ]
)

MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
SAFETY = 0.9


def _field_np(f: VectorField):
    def fn(y: np.ndarray, t: float) -> np.ndarray:
        out = f(Tensor(y), t)
        k = out.data if isinstance(out, Tensor) else np.asarray(out, dtype=np.float64)
        if not np.all(np.isfinite(k)):
            raise DivergenceError(f"vector field returned non-finite values at t={t}")
        return k

    return fn


def _dopri5_stages(fn, y: np.ndarray, t: float, dt: float, k1: np.ndarray | None):
    k = [k1 if k1 is not None else fn(y, t)]
    for i in range(1, 7):
        incr = sum(a * kk for a, kk in zip(_A[i], k))
        k.append(fn(y + dt * incr, t + _C[i] * dt))
    y1 = y + dt * sum(b * kk for b, kk in zip(_B5, k) if b != 0.0)
    err = dt * sum(e * kk for e, kk in zip(_ERR, k) if e != 0.0)
    return y1, err, k


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, rtol: float, atol: float) -> float:
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def dopri5_step(f: VectorField, h: Tensor, t: float, dt: float, rtol: float = 1e-6, atol: float = 1e-9):
    """One trial step: returns (accepted, state, error_estimate, dt_next).

    ``state`` is the 5th-order proposal (returned whether or not it was
    accepted).  ``dt_next`` follows dt * clamp(0.9 * est^(-1/5), 0.2, 5).
    """
    h = h if isinstance(h, Tensor) else Tensor(h)
    fn = _field_np(f)
    y1, err, _ = _dopri5_stages(fn, h.data, t, dt, None)
    est = _error_norm(err, h.data, y1, rtol, atol)
    if est == 0.0:
        factor = MAX_FACTOR
    else:
        factor = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * est ** (-0.2)))
    return est <= 1.0, Tensor(y1), est, dt * factor


class _DenseSegment:
    __slots__ = ("t0", "dt", "rcont")

    def __init__(self, t0, dt, rcont):
        self.t0 = t0
        self.dt = dt
        self.rcont = rcont

    def evaluate(self, t: float) -> np.ndarray:
        th = (t - self.t0) / self.dt
        th1 = 1.0 - th
        r1, r2, r3, r4, r5 = self.rcont
        return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))


class DenseSolution:
    """Accepted dopri5 steps plus the per-step interpolant."""

    def __init__(self, t0: float, y0: np.ndarray):
        self.t0 = t0
        self.segments: list[_DenseSegment] = []
        self.step_points: list[tuple[float, np.ndarray, np.ndarray]] = [(t0, y0.copy(), None)]

    def _push(self, seg: _DenseSegment, t1, y1, f1):
        self.segments.append(seg)
        self.step_points.append((t1, y1.copy(), f1.copy()))

    @property
    def t_end(self) -> float:
        return self.step_points[-1][0]

    def evaluate(self, t: float) -> np.ndarray:
        if not self.segments:
            if t == self.t0:
                return self.step_points[0][1]
            raise ContractError("dense solution is empty")
        if t < self.t0 - 1e-12 or t > self.t_end + 1e-12:
            raise ContractError(f"t={t} outside the integrated range [{self.t0}, {self.t_end}]")
        for seg in self.segments:
            if t <= seg.t0 + seg.dt + 1e-12:
                return seg.evaluate(t)
        return self.segments[-1].evaluate(t)


def dopri5_dense(f: VectorField, y0: np.ndarray, t0: float, t_end: float, cfg: SolverConfig) -> DenseSolution:
    """Adaptive integration from t0 to t_end with dense output on every accepted step."""
    fn = _field_np(f)
    sol = DenseSolution(t0, np.asarray(y0, dtype=np.float64))
    if t_end == t0:
        return sol
    if t_end < t0:
        raise ContractError("dopri5: t_end must be >= t0")
    t = t0
    y = np.asarray(y0, dtype=np.float64).copy()
    dt = (t_end - t0) / 100.0
    k1 = None
    attempts = 0
    while t < t_end:
        if attempts >= cfg.max_steps:
            raise ConvergenceError(
                f"dopri5 exceeded max_steps={cfg.max_steps} (reached t={t} of {t_end})", last_time=t
            )
        attempts += 1
        dt = min(dt, t_end - t)
        y1, err, k = _dopri5_stages(fn, y, t, dt, k1)
        est = _error_norm(err, y, y1, cfg.rtol, cfg.atol)
        factor = MAX_FACTOR if est == 0.0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * est ** (-0.2)))
        if est <= 1.0:
            ydiff = y1 - y
            bspl = dt * k[0] - ydiff
            rcont = (
                y.copy(),
                ydiff,
                bspl,
                ydiff - dt * k[6] - bspl,
                dt * sum(d * kk for d, kk in zip(_D, k) if d != 0.0),
            )
            sol._push(_DenseSegment(t, dt, rcont), t + dt, y1, k[6])
            t = t + dt
            y = y1
            k1 = k[6]  # first-same-as-last
        else:
            k1 = k[0]
        dt = dt * factor
    return sol


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write `time,state_0,...,state_{D-1}` rows (single trajectory only)."""
    arr = traj.state_array()
    if arr.ndim != 2:
        raise ContractError(f"trajectory_to_csv: need (T, D) states, got shape {arr.shape}")
    d = arr.shape[1]
    header = "time," + ",".join(f"state_{i}" for i in range(d))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t, row in zip(traj.times, arr):
            fh.write(f"{float(t)!r}," + ",".join(repr(float(v)) for v in row) + "\n")


def trajectory_from_csv(path) -> Trajectory:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "time" or any(not c.startswith("state_") for c in header[1:]):
            raise ContractError(f"bad trajectory header in {path}: {header}")
        rows = [list(map(float, line.strip().split(","))) for line in fh if line.strip()]
    arr = np.asarray(rows, dtype=np.float64)
    return Trajectory(arr[:, 0], Tensor(arr[:, 1:]))
