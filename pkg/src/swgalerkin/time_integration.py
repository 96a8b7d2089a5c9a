"""Explicit Runge-Kutta time stepping driven by Butcher tableaux."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .errors import BlowUpError, InvalidArgumentError
from .mesh_space import Mesh
from .problems import ProblemConfig
from .semidiscrete import Scheme, SimState, build_scheme


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int
    name: str = ""

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        s = b.size
        if A.shape != (s, s) or c.shape != (s,):
            raise InvalidArgumentError("inconsistent tableau shapes")
        if np.any(np.triu(A) != 0):
            raise InvalidArgumentError("stage matrix must be strictly lower triangular")
        if abs(b.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("weights must sum to one")
        if np.max(np.abs(A.sum(axis=1) - c)) > 1e-12:
            raise InvalidArgumentError("abscissae must equal the row sums of A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return self.b.size


def _fr(rows):
    return np.array([[float(Fraction(v)) for v in row] for row in rows])


RK3 = ButcherTableau(  # Kutta's third-order method
    A=_fr([[0, 0, 0], ["1/2", 0, 0], [-1, 2, 0]]),
    b=_fr([["1/6", "2/3", "1/6"]])[0], c=_fr([[0, "1/2", 1]])[0], order=3, name="rk3")

RK4 = ButcherTableau(
    A=_fr([[0, 0, 0, 0], ["1/2", 0, 0, 0], [0, "1/2", 0, 0], [0, 0, 1, 0]]),
    b=_fr([["1/6", "1/3", "1/3", "1/6"]])[0], c=_fr([[0, "1/2", "1/2", 1]])[0],
    order=4, name="rk4")

RK6 = ButcherTableau(  # Butcher's seven-stage sixth-order method
    A=_fr([
        [0, 0, 0, 0, 0, 0, 0],
        ["1/3", 0, 0, 0, 0, 0, 0],
        [0, "2/3", 0, 0, 0, 0, 0],
        ["1/12", "1/3", "-1/12", 0, 0, 0, 0],
        ["-1/16", "9/8", "-3/16", "-3/8", 0, 0, 0],
        [0, "9/8", "-3/8", "-3/4", "1/2", 0, 0],
        ["9/44", "-9/11", "63/44", "18/11", 0, "-16/11", 0],
    ]),
    b=_fr([["11/120", 0, "27/40", "27/40", "-4/15", "-4/15", "11/120"]])[0],
    c=_fr([[0, "1/3", "2/3", "1/3", "1/2", "1/2", 1]])[0],
    order=6, name="rk6")

TABLEAUX = {"rk3": RK3, "rk4": RK4, "rk6": RK6}


def get_tableau(name_or_path: str | ButcherTableau) -> ButcherTableau:
    if isinstance(name_or_path, ButcherTableau):
        return name_or_path
    key = str(name_or_path).lower()
    if key in TABLEAUX:
        return TABLEAUX[key]
    if Path(name_or_path).is_file():
        return load_tableau(name_or_path)
    raise InvalidArgumentError(f"unknown tableau {name_or_path!r}")


def parse_tableau(text: str, name: str = "") -> ButcherTableau:
    """Plain-text tableau: s rows of A, then b, then c; '#' starts a comment.

    Entries may be decimals or fractions. A comment ``# order: p`` sets the
    nominal order (default: number of stages, capped at 4).
    """
    order = None
    rows = []
    for line in text.splitlines():
        body, _, comment = line.partition("#")
        m = re.search(r"order\s*[:=]\s*(\d+)", comment)
        if m:
            order = int(m.group(1))
        tokens = body.replace(",", " ").split()
        if tokens:
            try:
                rows.append([float(Fraction(tok)) for tok in tokens])
            except (ValueError, ZeroDivisionError):
                raise InvalidArgumentError(f"bad tableau entry in line {line!r}") from None
    if len(rows) < 3:
        raise InvalidArgumentError("tableau needs rows of A, b and c")
    s = len(rows) - 2
    if any(len(row) != s for row in rows):
        raise InvalidArgumentError(f"every tableau row needs {s} entries")
    return ButcherTableau(np.array(rows[:s]), np.array(rows[s]), np.array(rows[s + 1]),
                          order if order is not None else min(s, 4), name)


def load_tableau(path) -> ButcherTableau:
    path = Path(path)
    return parse_tableau(path.read_text(), path.stem)


def format_tableau(tab: ButcherTableau) -> str:
    lines = [f"# {tab.name or 'tableau'}", f"# order: {tab.order}"]
    for row in (*tab.A, tab.b, tab.c):
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


Rhs = Callable[[float, np.ndarray], np.ndarray]


def rk_step_array(rhs: Rhs, t: float, y: np.ndarray, dt: float,
                  tab: ButcherTableau = RK4) -> np.ndarray:
    """One explicit RK step on a flat array; raises BlowUpError on non-finite stages."""
    k = []
    for i in range(tab.stages):
        yi = y
        for j in range(i):
            if tab.A[i, j] != 0.0:
                yi = yi + (dt * tab.A[i, j]) * k[j]
        ki = rhs(t + tab.c[i] * dt, yi)
        if not np.all(np.isfinite(ki)):
            raise BlowUpError(f"non-finite stage {i} at t={t:.6g}", stage=i, t=t,
                              last_state=y.copy())
        k.append(ki)
    out = y.copy()
    for j in range(tab.stages):
        if tab.b[j] != 0.0:
            out += (dt * tab.b[j]) * k[j]
    return out


def rk_step(rhs: Rhs, state: SimState, dt: float, tableau: ButcherTableau = RK4) -> SimState:
    if not dt > 0:
        raise InvalidArgumentError("time step must be positive")
    y = rk_step_array(rhs, state.t, state.y, dt, tableau)
    return SimState(state.t + dt, y, state.spaces)


class Observer:
    """Hook called after every step; ``snapshot_times`` are hit exactly."""

    snapshot_times: tuple = ()

    def start(self, state: SimState):
        pass

    def step(self, state: SimState, dt: float):
        pass

    def snapshot(self, state: SimState):
        pass


class SnapshotRecorder(Observer):
    def __init__(self, times: Iterable[float]):
        self.snapshot_times = tuple(sorted(times))
        self.snapshots: list[SimState] = []

    def snapshot(self, state):
        self.snapshots.append(state.copy())


class SteadyStateMonitor(Observer):
    """Flags the first time the relative change per unit time drops below ``threshold``."""

    def __init__(self, norm: Callable[[np.ndarray], float], threshold: float = 1e-10):
        self.norm = norm
        self.threshold = threshold
        self.reached_at: float | None = None
        self.last_rate = math.inf
        self._prev = None

    def start(self, state):
        self._prev = state.y.copy()

    def step(self, state, dt):
        scale = max(self.norm(state.y), 1e-300)
        self.last_rate = self.norm(state.y - self._prev) / scale / dt
        if self.reached_at is None and self.last_rate < self.threshold:
            self.reached_at = state.t
        self._prev = state.y.copy()


def integrate(rhs: Rhs, state: SimState, T: float, dt: float,
              tableau: ButcherTableau = RK4, observers: Iterable[Observer] = ()) -> SimState:
    """Step from ``state.t`` to ``T`` with step ``dt``.

    Steps follow the grid ``t0 + n dt``; a stop (final time or an observer's
    snapshot time) falling between grid points is reached by splitting that
    step in two, so stops are hit exactly and the grid is left intact.
    """
    t0 = state.t
    if not T > t0:
        raise InvalidArgumentError("final time must exceed the current time")
    if not dt > 0:
        raise InvalidArgumentError("time step must be positive")
    observers = list(observers)
    for o in observers:
        for s in o.snapshot_times:
            if s > T + 1e-12 * max(1.0, abs(T)) or s < t0:
                raise InvalidArgumentError(f"snapshot time {s} outside [{t0}, {T}]")
    stops = sorted({float(s) for o in observers for s in o.snapshot_times if s > t0} | {float(T)})
    stops = [s for s in stops if s <= T]
    tol = 1e-10 * dt
    for o in observers:
        o.start(state)
        if t0 in o.snapshot_times:
            o.snapshot(state)

    t, y, n = t0, state.y, 0
    for stop in stops:
        while True:
            t_grid = t0 + (n + 1) * dt
            if t_grid < stop - tol:
                t_new = t_grid
                n += 1
            else:
                t_new = stop
                if abs(t_grid - stop) <= tol:
                    n += 1
            y = rk_step_array(rhs, t, y, t_new - t, tableau)
            step_dt, t = t_new - t, t_new
            current = SimState(t, y, state.spaces)
            for o in observers:
                o.step(current, step_dt)
            if t == stop:
                for o in observers:
                    if any(abs(stop - s) <= tol for s in o.snapshot_times):
                        o.snapshot(current)
                break
    return SimState(t, y, state.spaces)


@dataclass
class RunResult:
    scheme: Scheme
    initial: SimState
    final: SimState
    snapshots: list = field(default_factory=list)
    dt: float = 0.0
    steps: int = 0


def run(problem: ProblemConfig, mesh: Mesh, r: int = 2, tableau="rk4", ratio: float = 0.1,
        T: float = 1.0, observers: Iterable[Observer] = (), snapshot_times=(),
        dt: float | None = None, continuity: int | None = None, s: int | None = None,
        scheme: Scheme | None = None, **scheme_options) -> RunResult:
    """Build the scheme for ``problem`` and integrate its initial state to ``T``.

    The step is ``ratio * h_max`` unless ``dt`` is given explicitly.
    """
    tab = get_tableau(tableau)
    if scheme is None:
        scheme = build_scheme(problem, mesh, r, continuity, s, **scheme_options)
    if dt is None:
        if not ratio > 0:
            raise InvalidArgumentError("Courant ratio must be positive")
        dt = ratio * mesh.h_max
    recorder = SnapshotRecorder(snapshot_times)
    state0 = scheme.initial_state()
    final = integrate(scheme.rhs, state0, T, dt, tab, [recorder, *observers])
    return RunResult(scheme, state0, final, recorder.snapshots, dt,
                     int(math.ceil((T - state0.t) / dt - 1e-9)))
