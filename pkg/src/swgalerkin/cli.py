"""Command-line driver: ``swgalerkin {converge,simulate,wellbalance,steady} CONFIG``.

Each run writes CSV results plus ``manifest.json`` into the output directory.
Exit codes: 0 success, 1 configuration error, 2 numerical blow-up.
"""

from __future__ import annotations

import argparse
import io
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import MANIFEST_TOOL, RESOLVERS, build_problem, load_config
from .diagnostics import (build_mesh, convergence_study, froude_sweep, profile_csv,
                          strictly_decreasing, well_balance_study, write_csv)
from .errors import (BlowUpError, ConfigError, DryStateError, InvalidArgumentError,
                     NoSteadyStateError)
from .assembly import sample_points
from .problems import make_bathymetry
from .steady_state import solve_steady, steady_preservation_test
from .time_integration import run

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2


class _Run:
    """Collects outputs and timings for the manifest."""

    def __init__(self, out: Path):
        self.out = out
        self.outputs: list[str] = []
        self.timings: dict[str, float] = {}
        self.notes: list[str] = []

    def write(self, name: str, text: str) -> None:
        (self.out / name).write_text(text)
        self.outputs.append(name)


def _tag(t: float) -> str:
    return f"{t:.6g}".replace("+", "")


def _threads(args) -> int:
    return max(0, int(args.threads))


def cmd_converge(cfg: dict, args, rec: _Run) -> int:
    problem = build_problem(cfg["problem"])
    mesh, space, tm = cfg["mesh"], cfg["space"], cfg["time"]
    t0 = time.perf_counter()
    table = convergence_study(problem, mesh["N"], r=space["r"], ratio=tm["ratio"], T=tm["T"],
                              s=space["s"], norm=cfg["norm"], tableau=tm["tableau"],
                              dt=tm["dt"], continuity=space["continuity"],
                              perturbation=mesh["perturbation"], seed=mesh["seed"],
                              threads=_threads(args), **cfg["scheme"])
    rec.timings["study_s"] = time.perf_counter() - t0
    rec.write("rates.csv", table.to_csv())
    for n, msg in table.failures.items():
        rec.notes.append(f"N={n}: {msg}")
    return EXIT_BLOWUP if table.failures else EXIT_OK


def cmd_simulate(cfg: dict, args, rec: _Run) -> int:
    problem = build_problem(cfg["problem"])
    m, space, tm = cfg["mesh"], cfg["space"], cfg["time"]
    mesh = build_mesh(m["N"], problem.left, problem.right, m["perturbation"], m["seed"])
    x = sample_points(mesh, cfg["samples_per_element"])
    meta = {"problem": problem.name, "formulation": problem.formulation.value,
            "N": m["N"], "r": space["r"]}
    rec.write("bathymetry.csv", profile_csv(x, problem.bathymetry.beta(x), "beta", meta))
    t0 = time.perf_counter()
    status = EXIT_OK
    try:
        res = run(problem, mesh, r=space["r"], tableau=tm["tableau"], ratio=tm["ratio"],
                  T=tm["T"], dt=tm["dt"], snapshot_times=cfg["snapshots"],
                  continuity=space["continuity"], s=space["s"], **cfg["scheme"])
        scheme, snaps = res.scheme, res.snapshots
    except (BlowUpError, DryStateError) as exc:
        rec.notes.append(f"{type(exc).__name__}: {exc}")
        status = EXIT_BLOWUP
        scheme, snaps = None, []
        last = getattr(exc, "last_state", None)
        if last is not None:
            rec.write("blowup_state.csv", profile_csv(np.arange(last.size), last,
                                                      "coefficient", {"t": exc.t}))
    rec.timings["run_s"] = time.perf_counter() - t0
    summary = []
    prev = None
    for snap in snaps:
        eta, u = scheme.physical(snap.y, x)
        sm = dict(meta, t=snap.t)
        rec.write(f"eta_t{_tag(snap.t)}.csv", profile_csv(x, eta, "eta", sm))
        rec.write(f"u_t{_tag(snap.t)}.csv", profile_csv(x, u, "u", sm))
        norms = scheme.physical_norms(snap.y)
        change = (scheme.physical_difference(snap.y, prev.y) if prev is not None
                  else np.array([np.nan, np.nan]))
        summary.append([snap.t, norms[0], norms[1], change[0], change[1]])
        prev = snap
    s = io.StringIO()
    write_csv(s, ["t", "eta_l2", "u_l2", "eta_change_l2", "u_change_l2"], summary, meta)
    rec.write("summary.csv", s.getvalue())
    return status


def cmd_wellbalance(cfg: dict, args, rec: _Run) -> int:
    tm, space = cfg["time"], cfg["space"]
    t0 = time.perf_counter()
    table = well_balance_study([(c["source_mode"], c["s"]) for c in cfg["cases"]],
                               r=space["r"], N=cfg["mesh"]["N"], dt=tm["dt"],
                               ratio=tm["ratio"], T=tm["T"], init=cfg["init"],
                               amp=cfg["bathymetry"]["amp"], rate=cfg["bathymetry"]["rate"],
                               tableau=tm["tableau"], flux_form=cfg["flux_form"],
                               threads=_threads(args))
    rec.timings["study_s"] = time.perf_counter() - t0
    rec.write("drift.csv", table.to_csv())
    return EXIT_OK


def cmd_steady(cfg: dict, args, rec: _Run) -> int:
    t0 = time.perf_counter()
    if cfg["mode"] == "froude_sweep":
        kw = dict(dt=cfg["dt"], T=cfg["T"], L=cfg["L"], delta0=cfg["delta0"], h0=cfg["h0"],
                  g=cfg["g"], tableau=cfg["tableau"], threads=_threads(args))
        sweep = froude_sweep(cfg["froude"], cfg["c"], N=cfg["N"], **kw)
        rec.write("froude_sweep.csv", sweep.to_csv())
        for (fr, c), (x, eta) in sweep.profiles.items():
            rec.write(f"eta_Fr{_tag(fr)}_c{_tag(c)}.csv",
                      profile_csv(x, eta, "eta", {"froude": fr, "c": c, "N": cfg["N"]}))
        for c in cfg["c"]:
            maxes = [r.max_eta for r in sweep.rows if r.c == c]
            if not strictly_decreasing(maxes):
                rec.notes.append(f"c={c}: max eta not strictly decreasing in Fr")
        if cfg["compare_N"]:
            fine = froude_sweep(cfg["froude"], cfg["c"], N=cfg["compare_N"], **kw)
            rec.write("froude_sweep_fine.csv", fine.to_csv())
        rec.timings["study_s"] = time.perf_counter() - t0
        return EXIT_OK
    bspec = dict(cfg["bathymetry"])
    bathy = make_bathymetry(bspec.pop("kind"), **bspec)
    profile = solve_steady(bathy, cfg["eta0"], cfg["u0"], cfg["g"], cfg["branch"])
    m, tm = cfg["mesh"], cfg["time"]
    rep = steady_preservation_test(profile, None, m["N"], cfg["space"]["r"], tm["ratio"],
                                   tm["T"], tm["tableau"], m["perturbation"], m["seed"])
    rec.timings["run_s"] = time.perf_counter() - t0
    s = io.StringIO()
    write_csv(s, ["variable", "l2_drift"], [["eta", rep.eta], ["u", rep.u]],
              {"branch": cfg["branch"], "N": m["N"], "T": tm["T"], "dt": rep.dt})
    rec.write("drift.csv", s.getvalue())
    return EXIT_OK


COMMANDS = {"converge": cmd_converge, "simulate": cmd_simulate,
            "wellbalance": cmd_wellbalance, "steady": cmd_steady}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swgalerkin", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"converge": "L2 error / rate table against a manufactured solution",
             "simulate": "time evolution with profile snapshots",
             "wellbalance": "lake-at-rest drift of the balance-law scheme",
             "steady": "steady-state preservation or Froude-number sweep"}
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config", help="JSON config (or a manifest.json from an earlier run)")
        sp.add_argument("--out", default=None, help="output directory (default: out/<config>)")
        sp.add_argument("--threads", type=int, default=0,
                        help="worker threads for sweeps; 0 = serial")
        sp.add_argument("--seed", type=int, default=None, help="perturbed-mesh seed override")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        raw, manifest_cmd = load_config(args.config)
        if manifest_cmd is not None and manifest_cmd != args.command:
            raise ConfigError(f"manifest was produced by '{manifest_cmd}', not '{args.command}'")
        if args.seed is not None and isinstance(raw.get("mesh"), dict):
            raw = dict(raw, mesh=dict(raw["mesh"], seed=args.seed))
        cfg = RESOLVERS[args.command](raw)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    stem = Path(args.config).stem
    out = Path(args.out) if args.out else Path("out") / stem
    out.mkdir(parents=True, exist_ok=True)
    rec = _Run(out)
    try:
        code = COMMANDS[args.command](cfg, args, rec)
    except (ConfigError, InvalidArgumentError, NoSteadyStateError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
        rec.notes.append(str(exc))
    except (BlowUpError, DryStateError) as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        code = EXIT_BLOWUP
        rec.notes.append(str(exc))
    rec.timings["total_s"] = time.perf_counter() - started
    manifest = {
        "tool": MANIFEST_TOOL, "version": __version__, "command": args.command,
        "config_path": str(Path(args.config).resolve()), "config": cfg,
        "output_dir": str(out.resolve()), "outputs": rec.outputs,
        "threads": _threads(args), "exit_code": code, "notes": rec.notes,
        "timings": rec.timings,
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for note in rec.notes:
        print(note, file=sys.stderr)
    print(f"wrote {len(rec.outputs)} file(s) to {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
