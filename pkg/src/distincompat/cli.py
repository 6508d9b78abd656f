"""Command line front end: scenarios in, CSV and JSON out.

Exit codes: 0 success, 2 a checked bound is violated beyond ``--tol``,
3 solver failure, 4 input error.  Errors are reported as one JSON object
on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bell
from .assemblage import PovmError, WeightedAssemblage, random_povm, random_projective
from .incompat import SolverFailure, incompatibility
from .mub import analytic_incompatibility, build_mub, closed_form_valid, white_noise_robustness
from .solver import IllPosedProgram, SolverTolerances
from .strategies import EnumerationCapExceeded
from .structures import check_subset_bounds, decompose, incompatibility_gain

EXIT_OK, EXIT_BOUND, EXIT_SOLVER, EXIT_INPUT = 0, 2, 3, 4


class InputError(ValueError):
    pass


# ---- scenario handling ------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """Picklable description of one assemblage family."""

    kind: str
    d: int
    m: int
    outcomes: int | None = None
    seed: int = 0
    file: str | None = None

    def build(self, eta: float = 1.0) -> WeightedAssemblage:
        if self.kind == "mub":
            base = build_mub(self.d, self.m).assemblage()
        elif self.kind == "file":
            with open(self.file) as fh:
                base = WeightedAssemblage.from_json(fh.read())
        elif self.kind == "random":
            rng = np.random.default_rng(self.seed)
            if self.outcomes is None:
                base = WeightedAssemblage([random_projective(self.d, rng) for _ in range(self.m)])
            else:
                base = WeightedAssemblage([random_povm(self.d, self.outcomes, rng) for _ in range(self.m)])
        else:
            raise InputError(f"unknown scenario kind {self.kind!r}")
        return base if eta == 1.0 else base.depolarize(eta)

    def analytic(self, eta: float, m: int | None = None) -> float | None:
        m = self.m if m is None else m
        if self.kind != "mub" or not closed_form_valid(self.d, m):
            return None
        return analytic_incompatibility(build_mub(self.d, m), eta)


def eta_grid(args) -> list[float]:
    if args.eta_grid is not None:
        start, stop, steps = args.eta_grid
        steps = int(steps)
        if steps < 1:
            raise InputError("eta grid needs at least one point")
        grid = np.linspace(float(start), float(stop), steps)
    elif args.eta is not None:
        grid = np.array([args.eta])
    else:
        grid = np.array([1.0])
    if np.any(grid < 0) or np.any(grid > 1):
        raise InputError("eta must lie in [0, 1]")
    return [float(e) for e in grid]


def scenario(args) -> Scenario:
    if args.scenario == "file" and not args.file:
        raise InputError("--scenario file needs --file")
    return Scenario(args.scenario, args.d, args.m, args.outcomes, args.seed, args.file)


def parse_subset(text: str | None, m: int) -> tuple[int, ...]:
    if text is None:
        return (0, 1)
    try:
        idx = tuple(int(t) for t in text.split(","))
    except ValueError as exc:
        raise InputError(f"bad subset {text!r}") from exc
    if not idx or min(idx) < 0 or max(idx) >= m or len(set(idx)) >= m:
        raise InputError(f"subset {text!r} must be a nonempty proper subset of 0..{m - 1}")
    return idx


# ---- output -----------------------------------------------------------------

def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def write_csv(rows: list[dict], out) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows:
        w.writerow(rows[0].keys())
        for r in rows:
            w.writerow([fmt(v) for v in r.values()])
    emit(buf.getvalue(), out)


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(data, out) -> None:
    emit(json.dumps(jsonable(data), indent=2) + "\n", out)


def emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def run_map(fn, tasks: list, jobs: int) -> list:
    """Ordered map, optionally over a process pool."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# ---- workers (top level so they pickle) ---------------------------------------

def _incompat_row(task):
    sc, eta = task
    rep = incompatibility(sc.build(eta))
    ana = sc.analytic(eta)
    return {"d": sc.d, "m": sc.m, "eta": eta, "I": rep.value, "lower": rep.dual_objective,
            "gap": rep.gap, "analytic": ana,
            "abs_err": None if ana is None else abs(rep.value - ana)}


def _gain_row(task):
    sc, eta = task
    M = sc.build(eta)
    m = len(M)
    rep = incompatibility_gain(M.subset(range(m - 1)), M[m - 1])
    a_before, a_after = sc.analytic(eta, m - 1), sc.analytic(eta, m)
    return {"eta": eta, "I_before": rep.I_before, "I_after": rep.I_after, "delta": rep.delta,
            "I_N": rep.I_N, "I_G": rep.I_G, "analytic_before": a_before, "analytic_after": a_after,
            "analytic_delta": None if a_before is None or a_after is None else a_after - a_before,
            "hypothesis": rep.hypothesis_holds,
            "slack_gain_vs_N": rep.slack_gain_vs_N, "slack_N_vs_G": rep.slack_N_vs_G}


def _bounds_row(task):
    sc, eta, C = task
    rep = check_subset_bounds(sc.build(eta), C)
    row = {"eta": eta, "I": rep.I, "I_subset": rep.I_subset, "weight": rep.weight,
           "I_partial": rep.I_partial, "lower_slack": rep.lower_slack, "upper_slack": rep.upper_slack}
    if rep.average:
        row.update({"mean_pair": rep.average["mean_subset"], "I_N": rep.average["I_N"],
                    "avg_lower_slack": rep.average["lower_slack"],
                    "avg_upper_slack": rep.average["upper_slack"]})
    return row


def _decompose_row(task):
    sc, eta = task
    return {"eta": eta, **decompose(sc.build(eta)).to_dict()}


# ---- commands ---------------------------------------------------------------

def _slack_violations(rows, keys, tol, when=None) -> int:
    bad = 0
    for r in rows:
        if when is not None and not r.get(when, True):
            continue
        bad += sum(1 for k in keys if r.get(k) is not None and r[k] < -tol)
    return bad


def cmd_mub(args) -> int:
    fam = build_mub(args.d, args.m)
    rob = white_noise_robustness(fam)
    eta = args.eta if args.eta is not None else 1.0
    write_json({"d": args.d, "m": args.m, "T": rob.T, "eta_star": rob.eta_star,
                "heuristic": rob.heuristic, "max_overlap_error": fam.max_overlap_error(),
                "eta": eta, "assemblage": fam.assemblage(eta).to_dict()}, args.out)
    return EXIT_OK


def cmd_incompat(args) -> int:
    sc = scenario(args)
    rows = run_map(_incompat_row, [(sc, e) for e in eta_grid(args)], args.jobs)
    write_csv(rows, args.out)
    bad = sum(1 for r in rows if (r["abs_err"] or 0) > args.tol or r["gap"] > args.tol)
    return EXIT_BOUND if bad else EXIT_OK


def cmd_sweep(args) -> int:
    tasks = []
    for d in args.dims:
        for m in args.ms:
            sc = Scenario("mub", d, m)
            tasks += [(sc, e) for e in eta_grid(args)]
    rows = run_map(_incompat_row, tasks, args.jobs)
    write_csv(rows, args.out)
    bad = sum(1 for r in rows if (r["abs_err"] or 0) > args.tol or r["gap"] > args.tol)
    return EXIT_BOUND if bad else EXIT_OK


def cmd_gain(args) -> int:
    sc = scenario(args)
    if sc.m < 2:
        raise InputError("gain needs at least two settings")
    rows = run_map(_gain_row, [(sc, e) for e in eta_grid(args)], args.jobs)
    write_csv(rows, args.out)
    bad = _slack_violations(rows, ["slack_gain_vs_N"], args.tol, when="hypothesis")
    bad += _slack_violations(rows, ["slack_N_vs_G"], args.tol)
    bad += sum(1 for r in rows if r["analytic_delta"] is not None
               and abs(r["delta"] - r["analytic_delta"]) > args.tol)
    return EXIT_BOUND if bad else EXIT_OK


def cmd_bounds(args) -> int:
    sc = scenario(args)
    C = parse_subset(args.subset, sc.m)
    rows = run_map(_bounds_row, [(sc, e, C) for e in eta_grid(args)], args.jobs)
    write_csv(rows, args.out)
    keys = ["lower_slack", "upper_slack", "avg_lower_slack", "avg_upper_slack"]
    return EXIT_BOUND if _slack_violations(rows, keys, args.tol) else EXIT_OK


def cmd_decompose(args) -> int:
    sc = scenario(args)
    if sc.m != 3:
        raise InputError("decompose needs three settings")
    rows = run_map(_decompose_row, [(sc, e) for e in eta_grid(args)], args.jobs)
    write_json(rows if len(rows) > 1 else rows[0], args.out)
    bad = sum(1 for r in rows if r["slack"] < -args.tol)
    if args.require_tight:
        bad += sum(1 for r in rows if abs(r["slack"]) > args.tol)
    return EXIT_BOUND if bad else EXIT_OK


def shared_state(args) -> np.ndarray:
    d = args.d
    if args.state == "maxent":
        phi = bell.maximally_entangled(d)
        return args.visibility * phi + (1 - args.visibility) * np.eye(d * d) / d ** 2
    if args.state == "random":
        from .linalg import random_density_matrix
        return random_density_matrix(d * d, np.random.default_rng(args.seed))
    if args.state == "file":
        with open(args.state_file) as fh:
            data = json.load(fh)
        return np.asarray(data["re"]) + 1j * np.asarray(data.get("im", 0.0))
    raise InputError(f"unknown state {args.state!r}")


def cmd_steering(args) -> int:
    sc = scenario(args)
    M = sc.build(eta_grid(args)[0])
    sa = bell.steer_from_state(shared_state(args), M)
    rep = bell.steering_distance(sa)
    I = incompatibility(M).value
    out = {"steering": rep.to_dict(), "I": I, "I_minus_S": I - rep.value}
    bad = out["I_minus_S"] < -args.tol
    if sa.settings == 3:
        b = bell.steering_bounds(sa)
        out["bounds"] = b
        bad |= min(v for k, v in b.items() if k.endswith("slack")) < -args.tol
    write_json(out, args.out)
    return EXIT_BOUND if bad else EXIT_OK


def _bob_measurements(kind: str) -> WeightedAssemblage:
    from .assemblage import Povm
    if kind == "mub":
        return build_mub(2, 2).assemblage()
    Z, X = bell.PAULI["Z"], bell.PAULI["X"]
    obs = [(Z + X) / np.sqrt(2), (Z - X) / np.sqrt(2)]
    return WeightedAssemblage([Povm([(np.eye(2) + B) / 2, (np.eye(2) - B) / 2]) for B in obs])


def cmd_nonlocality(args) -> int:
    if args.behavior:
        with open(args.behavior) as fh:
            q = bell.BehaviorTable.from_json(fh.read())
    else:
        sc = scenario(args)
        if sc.d != 2:
            raise InputError("state-generated behaviors are two-qubit only")
        q = bell.behavior_from_state(shared_state(args), sc.build(eta_grid(args)[0]),
                                     _bob_measurements(args.bob))
    rep = bell.nonlocality_distance(q)
    out = {"nonlocality": rep.to_dict()}
    bad = False
    if q.m_A == 3:
        b = bell.nonlocality_bounds(q)
        out["bounds"] = b
        bad = min(v for k, v in b.items() if k.endswith("slack")) < -args.tol
    write_json(out, args.out)
    return EXIT_BOUND if bad else EXIT_OK


def cmd_chsh(args) -> int:
    opt = bell.maximize_avg_chsh(args.seed, args.restarts, single_pair=args.single_pair)
    bound = bell.TSIRELSON if args.single_pair else bell.AVG_CHSH_QUANTUM
    coef = bell.chsh_coefficients(0, 1)[:2] if args.single_pair else bell.avg_chsh_coefficients()
    ns = bell.no_signaling_value(coef)
    row = {"functional": "chsh_12" if args.single_pair else "chsh_123",
           "restarts": args.restarts, "seed": args.seed, "best": opt.value,
           "quantum_bound": bound, "excess": opt.value - bound, "no_signaling": ns}
    write_csv([row], args.out)
    if args.witness:
        with open(args.witness, "w") as fh:
            json.dump(jsonable(opt.to_dict()), fh, indent=2)
    return EXIT_BOUND if opt.value > bound + 1e-6 else EXIT_OK


# ---- parser -----------------------------------------------------------------

COMMANDS = {
    "mub": (cmd_mub, "Build a Heisenberg-Weyl MUB family and its robustness data (JSON)."),
    "incompat": (cmd_incompat, "Incompatibility over an eta grid, against the closed form when known (CSV)."),
    "gain": (cmd_gain, "Gain from appending the last setting, with the N and G bounds (CSV)."),
    "bounds": (cmd_bounds, "Subset bounds for a setting subset C (CSV)."),
    "decompose": (cmd_decompose, "Genuine / pairwise / hollow decomposition of three settings (JSON)."),
    "steering": (cmd_steering, "Steering distance of a shared state with the scenario measurements (JSON)."),
    "nonlocality": (cmd_nonlocality, "Consistent nonlocality distance of a behavior (JSON)."),
    "chsh": (cmd_chsh, "Seesaw maximization of the averaged CHSH functional (CSV)."),
    "sweep": (cmd_sweep, "Grid over dimensions, setting counts and eta for MUB assemblages (CSV)."),
}


class _Parser(argparse.ArgumentParser):
    """Usage errors become input errors (exit 4) instead of argparse's exit 2."""

    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-6, help="bound-check tolerance")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--config", default=None, help="JSON file with option defaults")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for grids")
    common.add_argument("-v", "--verbose", action="store_true")

    scen = argparse.ArgumentParser(add_help=False)
    scen.add_argument("--scenario", choices=["mub", "file", "random"], default="mub")
    scen.add_argument("--d", type=int, default=2)
    scen.add_argument("--m", type=int, default=3)
    scen.add_argument("--outcomes", type=int, default=None,
                      help="outcomes per random POVM (default: random projective)")
    scen.add_argument("--file", default=None, help="assemblage JSON")
    scen.add_argument("--eta", type=float, default=None)
    scen.add_argument("--eta-grid", type=float, nargs=3, default=None, metavar=("START", "STOP", "STEPS"))

    state = argparse.ArgumentParser(add_help=False)
    state.add_argument("--state", choices=["maxent", "random", "file"], default="maxent")
    state.add_argument("--visibility", type=float, default=1.0)
    state.add_argument("--state-file", default=None)

    ap = _Parser(prog="distincompat", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    parsers = {}
    for name, (fn, helptext) in COMMANDS.items():
        parents = [common]
        if name not in ("chsh", "sweep", "mub"):
            parents.append(scen)
        if name in ("steering", "nonlocality"):
            parents.append(state)
        p = sub.add_parser(name, parents=parents, help=helptext, description=helptext)
        p.set_defaults(func=fn)
        parsers[name] = p
    parsers["mub"].add_argument("--d", type=int, default=2)
    parsers["mub"].add_argument("--m", type=int, default=3)
    parsers["mub"].add_argument("--eta", type=float, default=None)
    parsers["bounds"].add_argument("--subset", default=None, help="comma-separated setting indices")
    parsers["decompose"].add_argument("--require-tight", action="store_true")
    parsers["nonlocality"].add_argument("--behavior", default=None, help="behavior JSON")
    parsers["nonlocality"].add_argument("--bob", choices=["chsh", "mub"], default="chsh")
    parsers["chsh"].add_argument("--restarts", type=int, default=20)
    parsers["chsh"].add_argument("--single-pair", action="store_true")
    parsers["chsh"].add_argument("--witness", default=None, help="write the optimal configuration JSON")
    parsers["sweep"].add_argument("--dims", type=int, nargs="+", default=[2])
    parsers["sweep"].add_argument("--ms", type=int, nargs="+", default=[2, 3])
    parsers["sweep"].add_argument("--eta", type=float, default=None)
    parsers["sweep"].add_argument("--eta-grid", type=float, nargs=3, default=None,
                                  metavar=("START", "STOP", "STEPS"))
    return ap, parsers


def apply_config(argv: list[str], parsers: dict) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    for p in parsers.values():
        dests = {a.dest for a in p._actions}
        p.set_defaults(**{k: v for k, v in cfg.items() if k in dests})
    known_dests = set().union(*({a.dest for a in p._actions} for p in parsers.values()))
    unknown = sorted(set(cfg) - known_dests)
    if unknown:
        raise InputError(f"unknown config keys: {unknown}")


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    res = getattr(exc, "result", None)
    if res is not None:
        err["diagnostics"] = jsonable(res.diagnostics())
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap, parsers = build_parser()
    try:
        apply_config(argv, parsers)
        args = ap.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.tol < SolverTolerances().gap:
            raise InputError(f"--tol {args.tol} is below the solver gap tolerance {SolverTolerances().gap}")
        if args.jobs < 1:
            raise InputError("--jobs must be positive")
        return args.func(args)
    except SolverFailure as exc:
        return _fail(EXIT_SOLVER, exc)
    except (InputError, PovmError, bell.SteeringError, bell.BehaviorError, EnumerationCapExceeded,
            IllPosedProgram, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        return _fail(EXIT_INPUT, exc)


if __name__ == "__main__":
    sys.exit(main())
