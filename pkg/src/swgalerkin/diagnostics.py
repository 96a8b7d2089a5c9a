"""Convergence tables, well-balance drift reports and steady-state sweeps.

Studies return plain table objects that know how to write themselves as
CSV: ``#``-prefixed metadata lines, then a header row, then data. Floats are
written with ``repr`` so identical runs give byte-identical files.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .assembly import sample_points
from .errors import BlowUpError, DryStateError, InvalidArgumentError
from .mesh_space import Mesh, make_perturbed_mesh, make_uniform_mesh
from .problems import GRAVITY, ProblemConfig, lake_at_rest, trapezoid_supercritical
from .steady_state import solve_steady
from .time_integration import run


def parallel_map(fn: Callable, items: Sequence, threads: int = 0) -> list:
    """Ordered map; ``threads=0`` runs serially in the calling thread."""
    items = list(items)
    if threads <= 0 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(stream, header: Sequence[str], rows, metadata: dict | None = None) -> None:
    for key, value in (metadata or {}).items():
        stream.write(f"# {key}: {value}\n")
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


class _CsvTable:
    def csv_header(self) -> list:
        raise NotImplementedError

    def csv_rows(self) -> list:
        raise NotImplementedError

    metadata: dict

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        write_csv(buf, self.csv_header(), self.csv_rows(), self.metadata)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def observed_rates(N: Sequence[float], errors: Sequence[float]) -> list:
    """rate[i] = log(e[i-1]/e[i]) / log(N[i]/N[i-1]); None where undefined."""
    out = [None]
    for i in range(1, len(N)):
        e0, e1 = errors[i - 1], errors[i]
        if not (e0 > 0 and e1 > 0) or not all(map(math.isfinite, (e0, e1))):
            out.append(None)
        else:
            out.append(math.log(e0 / e1) / math.log(N[i] / N[i - 1]))
    return out


@dataclass
class RateTable(_CsvTable):
    N: list
    errors: dict
    metadata: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    @property
    def variables(self) -> tuple:
        return tuple(self.errors)

    def rates(self, var: str) -> list:
        return observed_rates(self.N, self.errors[var])

    def fitted_order(self, var: str) -> float:
        """Least-squares slope of -log(error) against log(N) over the finite rows.

        Robust where each N uses an independently perturbed mesh and the
        pairwise rates scatter.
        """
        e = np.asarray(self.errors[var], float)
        n = np.asarray(self.N, float)
        ok = np.isfinite(e) & (e > 0)
        if ok.sum() < 2:
            return math.nan
        return float(-np.polyfit(np.log(n[ok]), np.log(e[ok]), 1)[0])

    def csv_header(self):
        cols = ["N"]
        for v in self.variables:
            cols += [f"{v}_error", f"{v}_rate"]
        return cols + ["status"]

    def csv_rows(self):
        rates = {v: self.rates(v) for v in self.variables}
        rows = []
        for i, n in enumerate(self.N):
            row = [n]
            for v in self.variables:
                row += [self.errors[v][i], rates[v][i]]
            row.append(self.failures.get(n, "ok"))
            rows.append(row)
        return rows


def build_mesh(N: int, left: float, right: float, perturbation: float = 0.0,
               seed: int = 0) -> Mesh:
    if perturbation:
        return make_perturbed_mesh(N, left, right, perturbation, seed)
    return make_uniform_mesh(N, left, right)


def convergence_study(problem: ProblemConfig, Ns: Sequence[int], r: int = 2,
                      ratio: float = 0.1, T: float = 1.0, s: int | None = None,
                      norm: str = "quadrature", tableau="rk4", dt: float | None = None,
                      continuity: int | None = None, perturbation: float = 0.0,
                      seed: int = 0, threads: int = 0, **scheme_options) -> RateTable:
    """L2 errors of (eta, u) at T against the manufactured solution, one row per N.

    A row whose run blows up (or runs dry) is kept with NaN errors and the
    failure recorded in ``failures``; the remaining rows are unaffected.
    """
    if problem.manufactured is None:
        raise InvalidArgumentError("convergence study needs a manufactured solution")
    Ns = [int(n) for n in Ns]
    if not Ns:
        raise InvalidArgumentError("empty N list")

    def one(N):
        mesh = build_mesh(N, problem.left, problem.right, perturbation, seed)
        try:
            res = run(problem, mesh, r=r, tableau=tableau, ratio=ratio, T=T, dt=dt,
                      continuity=continuity, s=s, **scheme_options)
        except (BlowUpError, DryStateError) as exc:
            return None, f"{type(exc).__name__}: {exc}"
        return res.scheme.errors(res.final.y, res.final.t, norm=norm), None

    results = parallel_map(one, Ns, threads)
    errors = {"eta": [], "u": []}
    failures = {}
    for N, (err, failure) in zip(Ns, results):
        for v in errors:
            errors[v].append(math.nan if err is None else err[v])
        if failure:
            failures[N] = failure
    meta = dict(study="convergence", problem=problem.name, formulation=problem.formulation.value,
                r=r, s=s if s is not None else r + 1, ratio=ratio if dt is None else "",
                dt=dt if dt is not None else "", T=T, norm=norm, tableau=str(tableau),
                perturbation=perturbation, seed=seed if perturbation else "")
    return RateTable(Ns, errors, meta, failures)


@dataclass
class DriftRow:
    init: str
    source_mode: str
    s: int
    l2: float
    linf: float


@dataclass
class DriftTable(_CsvTable):
    rows: list
    metadata: dict = field(default_factory=dict)

    def csv_header(self):
        return ["init", "source_mode", "s", "l2_drift", "linf_drift"]

    def csv_rows(self):
        return [[r.init, r.source_mode, r.s, r.l2, r.linf] for r in self.rows]

    def find(self, source_mode: str, s: int) -> DriftRow:
        for row in self.rows:
            if row.source_mode == source_mode and row.s == s:
                return row
        raise KeyError((source_mode, s))


def well_balance_study(cases: Sequence[tuple] = (("analytic", 3), ("projected", 3),
                                                 ("projected", 5)),
                       r: int = 4, N: int = 50, dt: float | None = 0.01, ratio: float = 0.5,
                       T: float = 1.0, init: str = "projection", amp: float = 0.3,
                       rate: float = 1000.0, tableau="rk4", flux_form: str = "weak",
                       threads: int = 0) -> DriftTable:
    """Lake at rest over a Gaussian dip: drift of the depth ``d_h(T) - d_h(0)``.

    ``init`` picks how both ``d_h(0)`` and the source-term bottom are formed
    from beta: ``"projection"`` (L2) or ``"interpolation"`` (nodal).
    """
    if init not in ("projection", "interpolation"):
        raise InvalidArgumentError(f"unknown init {init!r}")
    cfg = lake_at_rest(amp, rate)
    mesh = make_uniform_mesh(N, cfg.left, cfg.right)
    x_dense = sample_points(mesh, 50)

    def one(case):
        mode, s = case
        res = run(cfg, mesh, r=r, tableau=tableau, ratio=ratio, T=T, dt=dt, s=int(s),
                  source_mode=mode, approx=init, flux_form=flux_form)
        sc = res.scheme
        diff = sc.split(res.final.y)[0] - sc.split(res.initial.y)[0]
        sq = sc.error_quadrature()[0]
        v = sq.values(diff)
        l2 = math.sqrt(sq.integrate(v * v))
        linf = float(np.max(np.abs(sc.spaces[0].evaluate(diff, x_dense))))
        return DriftRow(init, mode, int(s), l2, linf)

    rows = parallel_map(one, list(cases), threads)
    meta = dict(study="well_balance", r=r, N=N, dt=dt if dt is not None else "",
                ratio=ratio if dt is None else "", T=T, amp=amp, rate=rate,
                tableau=str(tableau), flux_form=flux_form)
    return DriftTable(rows, meta)


@dataclass
class SweepRow:
    froude: float
    c: float
    N: int
    max_eta: float
    x_max: float
    steady_max_eta: float
    final_rate: float


@dataclass
class FroudeSweep(_CsvTable):
    rows: list
    profiles: dict
    metadata: dict = field(default_factory=dict)

    def csv_header(self):
        return ["froude", "c", "N", "max_eta", "x_at_max", "steady_max_eta", "final_change_rate"]

    def csv_rows(self):
        return [[r.froude, r.c, r.N, r.max_eta, r.x_max, r.steady_max_eta, r.final_rate]
                for r in self.rows]


def settle_time(cfg: ProblemConfig, factor: float = 6.0) -> float:
    """Time for the slowest (downstream) characteristic to cross the domain ``factor`` times."""
    slow = cfg.u0 - math.sqrt(cfg.g * cfg.bathymetry.far_depth)
    if not slow > 0:
        raise InvalidArgumentError("settle_time needs supercritical inflow")
    return factor * (cfg.right - cfg.left) / slow


def froude_sweep(froudes: Sequence[float], cs: Sequence[float] = (1.0,), N: int = 1000,
                 dt: float = 1.0, T: float | None = None, L: float = 1e6,
                 delta0: float = 500.0, h0: float = 1000.0, g: float = GRAVITY,
                 tableau="rk4", threads: int = 0) -> FroudeSweep:
    """Supercritical flow over a trapezoidal ridge run to a steady state per (Fr, c).

    Each row reports the computed max eta alongside the analytic steady value
    from the depth cubic; ``final_rate`` is the relative L2 change per unit
    time over the last step, a steadiness indicator.
    """
    cases = [(float(fr), float(c)) for c in cs for fr in froudes]

    def one(case):
        fr, c = case
        cfg = trapezoid_supercritical(fr, c, L, delta0, h0, g)
        mesh = make_uniform_mesh(N, 0.0, L)
        t_end = settle_time(cfg) if T is None else T
        probe = t_end - dt
        res = run(cfg, mesh, r=2, tableau=tableau, dt=dt, T=t_end, snapshot_times=[probe])
        sc = res.scheme
        x = mesh.nodes
        eta, _ = sc.physical(res.final.y, x)
        i = int(np.argmax(eta))
        change = sc.physical_difference(res.final.y, res.snapshots[0].y)
        scale = max(float(np.max(sc.physical_norms(res.final.y))), 1e-300)
        rate = float(np.max(change)) / scale / dt
        try:
            prof = solve_steady(cfg.bathymetry, cfg.eta0, cfg.u0, g, "supercritical")
            steady = float(np.max(prof.eta(x)))
        except ArithmeticError:
            steady = math.nan
        return SweepRow(fr, c, N, float(eta[i]), float(x[i]), steady, rate), (x, eta)

    out = parallel_map(one, cases, threads)
    rows = [o[0] for o in out]
    profiles = {(row.froude, row.c): o[1] for row, o in zip(rows, out)}
    meta = dict(study="froude_sweep", N=N, dt=dt, T=T if T is not None else "auto",
                L=L, delta0=delta0, h0=h0, g=g, tableau=str(tableau))
    return FroudeSweep(rows, profiles, meta)


def strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def profile_csv(x, values, name: str, metadata: dict | None = None, path=None) -> str:
    """Two-column (x, value) profile dump."""
    buf = io.StringIO()
    write_csv(buf, ["x", name], zip(np.asarray(x, float), np.asarray(values, float)), metadata)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
