"""Command-line front end.  Every command prints one JSON document (and
writes it to --out if given) carrying the config echo and library version.

Exit codes: 0 ok, 1 invalid input, 2 engine refusal, 3 cross-check failure.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .lattice import build_lattice, load_problem, make_loop, parse_letter, spanning_tree
from .state_sum import ActionSpec, RefusalError

EXIT_OK, EXIT_INVALID, EXIT_REFUSED, EXIT_CROSSCHECK = 0, 1, 2, 3
THREADS_ENV = "YMLOOPS_THREADS"


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


@dataclass
class RunConfig:
    command: str
    lattice: str | None = None
    loops: str | None = None
    action: str = "wilson"
    coupling: float = 1.0
    N: int = 1
    truncation: int | None = None
    samples: int = 0
    seed: int = 0
    out: str | None = None
    threads: int | None = None
    extra: dict = field(default_factory=dict)


# ------------------------------------------------------------ formatting


def num(x):
    """Decimal string, plus "p/q" for exact rationals."""
    if isinstance(x, Fraction):
        return {"exact": f"{x.numerator}/{x.denominator}", "decimal": repr(float(x))}
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, complex) or isinstance(x, np.complexfloating):
        if abs(x.imag) <= 1e-12 * max(1.0, abs(x.real)):
            return repr(float(x.real))
        return {"real": repr(float(x.real)), "imag": repr(float(x.imag))}
    return repr(float(x))


def parse_label(text: str, N: int):
    """'lp/lm' with comma separated parts, e.g. '2,1/1'; '1/' is the fundamental."""
    from .unitary_rep import HighestWeight

    plus, _, minus = text.partition("/")
    lp = tuple(int(x) for x in plus.split(",") if x.strip())
    lm = tuple(int(x) for x in minus.split(",") if x.strip())
    try:
        return HighestWeight(lp, lm, N)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad label {text!r}: {exc}") from exc


# --------------------------------------------------------------- inputs


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not JSON: {exc}") from exc


def load_inputs(cfg: RunConfig):
    """Lattice from --lattice; loops from --loops (a list or {"loops": [...]}),
    falling back to the loops stored in the lattice file."""
    if cfg.lattice is None:
        raise ValidationError("--lattice is required")
    data = _read_json(cfg.lattice)
    try:
        lat, loops = load_problem({k: data[k] for k in ("d", "extents")} | {"loops": data.get("loops", [])})
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"lattice file needs d and extents: {exc}") from exc
    if cfg.loops is not None:
        ld = _read_json(cfg.loops)
        raw = ld.get("loops", []) if isinstance(ld, dict) else ld
        loops = [make_loop(lat, L) for L in raw]
    return lat, loops


def _action(cfg: RunConfig) -> ActionSpec:
    if cfg.action not in ("wilson", "heat"):
        raise ValidationError(f"unknown action {cfg.action}")
    if cfg.coupling <= 0:
        raise ValidationError("coupling must be positive")
    return ActionSpec(cfg.action, cfg.coupling)


def _check_N(N):
    if N < 1:
        raise ValidationError("N must be >= 1")


# -------------------------------------------------------------- commands


def cmd_wg(cfg):
    from .algebra_core import partitions_of
    from .weingarten import wg

    n = cfg.extra["n"]
    if n < 0:
        raise ValidationError("n must be >= 0")
    rows = [{"cycle_type": list(mu.parts), "wg": num(wg(mu, cfg.N))} for mu in partitions_of(n)]
    if cfg.extra.get("csv"):
        with open(cfg.extra["csv"], "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["cycle_type", "wg"])
            for r in rows:
                wr.writerow([" ".join(map(str, r["cycle_type"])), r["wg"]["exact"]])
    return {"n": n, "N": cfg.N, "table": rows}


def cmd_lattice_describe(cfg):
    return build_lattice(cfg.extra["d"], cfg.extra["extents"]).describe()


def cmd_statesum(cfg):
    from .state_sum import wilson_expectation_statesum

    lat, loops = load_inputs(cfg)
    r = wilson_expectation_statesum(lat, loops, _action(cfg), cfg.N, cfg.truncation)
    return {
        "value": num(r.value), "numerator": num(r.numerator), "denominator": num(r.denominator),
        "shell": num(r.shell), "n_alpha": r.n_alpha, "truncation": r.truncation,
        "cache": {k: num(v) if not isinstance(v, (dict, list, str)) else v for k, v in r.cache.items()},
    }


def cmd_spinfoam(cfg):
    from .channel import defect_ratio
    from .lattice import dual_incidence

    lat, loops = load_inputs(cfg)
    tree = spanning_tree(lat)
    r = defect_ratio(lat, loops, _action(cfg), cfg.N, cfg.truncation, tree=tree)
    g = dual_incidence(lat, tree, loops)
    return {
        "Z_loops": num(r.numerator), "Z_0": num(r.denominator), "ratio": num(r.value), "shell": num(r.shell),
        "defect_support": [f"e{e}" for e in sorted(g.defect_support)], "n_alpha": r.n_alpha,
        "truncation": r.truncation,
    }


def cmd_mc(cfg):
    lat, loops = load_inputs(cfg)
    if cfg.samples < 1:
        raise ValidationError("--samples must be positive")
    val, err, method = _mc_estimate(cfg, lat, loops, _action(cfg), cfg.samples)
    return {"value": num(val), "stderr": num(err), "samples": cfg.samples, "seed": cfg.seed, "method": method}


def _mc_estimate(cfg, lat, loops, act, samples):
    from .montecarlo import lattice_family_estimates

    if not loops:
        return 1.0, 0.0, "trivial"
    val, err, method = lattice_family_estimates(lat, [list(loops)], act, cfg.N, samples, cfg.seed,
                                                tree=spanning_tree(lat))
    return complex(val[0]), float(err[0]), method


def cmd_epe(cfg, lat, loops):
    from .surface import epe_ratio

    kmax = cfg.extra.get("kmax") or 6
    val, shell, _, _ = epe_ratio(lat, loops, cfg.coupling, cfg.N, kmax)
    return val, shell, kmax


def cmd_surface(cfg):
    from .surface import surface_expansion
    from .weingarten import WordSpec, parse_word

    words = [parse_word(w) for w in cfg.extra["words"].split(";")]
    labels = cfg.extra.get("labels")
    labs = [parse_label(x, cfg.N) for x in labels.split(";")] if labels else None
    if labs is None:
        from .unitary_rep import HighestWeight

        labs = [HighestWeight.fundamental(cfg.N)] * len(words)
    if len(labs) != len(words):
        raise ValidationError("one label per word")
    try:
        spec = WordSpec(words, labs)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    classes, total = surface_expansion(spec, coarse=cfg.extra.get("coarse", False))
    return {
        "total": num(total),
        "classes": [
            {"chi": c.chi, "h": c.h, "b": c.b, "omega": num(c.omega), "members": c.members} for c in classes
        ],
    }


def _ml_loops(lat, loops):
    if not loops:
        raise ValidationError("masterloop needs at least one loop")
    return loops


def cmd_masterloop(cfg):
    from . import master_loop as ml

    lat, loops = load_inputs(cfg)
    loops = _ml_loops(lat, loops)
    mode = cfg.extra["mode"]
    e = parse_letter(cfg.extra["edge"])[0] if cfg.extra.get("edge") else None
    if e is not None and not 0 <= e < len(lat.edges):
        raise ValidationError(f"unknown edge e{e}")
    edges = [e] if e is not None else sorted({a for L in loops for a, _ in L.letters})
    if mode == "pointwise":
        from .montecarlo import haar_sample, make_rng

        rng = make_rng(cfg.seed)
        worst = 0.0
        reps = cfg.samples or 50
        for _ in range(reps):
            U = {k: haar_sample(cfg.N, rng) for k in range(len(lat.edges))}
            for a in edges:
                worst = max(worst, ml.loop_laplacian_pointwise(loops, a, U, cfg.N)[2])
        return {"mode": mode, "edges": [f"e{a}" for a in edges], "points": reps, "max_residual": num(worst)}
    if mode == "coefficient":
        from .state_sum import balanced_alphas, gauge_fixed_problem
        from .unitary_rep import labels_box

        trunc = 2 if cfg.truncation is None else cfg.truncation
        labs = labels_box(cfg.N, trunc)
        prob = gauge_fixed_problem(lat, loops)
        worst, count = 0.0, 0
        for combo in balanced_alphas(prob, [labs] * len(lat.plaquettes), with_loops=True):
            alpha = {p: labs[i] for p, i in enumerate(combo)}
            for a in edges:
                worst = max(worst, abs(ml.master_equation_residual(lat, loops, alpha, a, cfg.N).residual))
                count += 1
        return {"mode": mode, "edges": [f"e{a}" for a in edges], "equations": count, "max_residual": num(worst),
                "truncation": trunc}
    if mode == "wilson":
        r = ml.wilson_master_residual(lat, loops, cfg.coupling, cfg.N, cfg.samples or ml.MIN_MC_SAMPLES, cfg.seed)
        return {"mode": mode, "residual": num(r.residual), "stderr": num(r.stderr), "samples": r.samples,
                "terms": r.n_terms, "within_3sigma": r.within()}
    raise ValidationError(f"unknown mode {mode}")


def cmd_crosscheck(cfg):
    """All applicable engines on one problem; deterministic engines must agree
    to 1e-6 plus their shells, Monte Carlo within 3 sigma."""
    from .channel import defect_ratio
    from .state_sum import wilson_expectation_statesum

    lat, loops = load_inputs(cfg)
    act = _action(cfg)
    tree = spanning_tree(lat)
    rows = {}
    t = time.time()
    ss = wilson_expectation_statesum(lat, loops, act, cfg.N, cfg.truncation, tree=tree)
    rows["statesum"] = {"value": ss.value, "shell": ss.shell, "seconds": time.time() - t}
    t = time.time()
    sf = defect_ratio(lat, loops, act, cfg.N, cfg.truncation, tree=tree)
    rows["spinfoam"] = {"value": sf.value, "shell": sf.shell, "seconds": time.time() - t}
    if act.kind == "wilson":
        t = time.time()
        try:
            v, sh, kmax = cmd_epe(cfg, lat, loops)
            rows["epe"] = {"value": v, "shell": sh, "kmax": kmax, "seconds": time.time() - t}
        except OverflowError as exc:
            rows["epe"] = {"skipped": str(exc)}
    t = time.time()
    samples = cfg.samples or 200_000
    val, err, method = _mc_estimate(cfg, lat, loops, act, samples)
    rows["mc"] = {"value": val.real, "stderr": err, "samples": samples, "method": method, "seconds": time.time() - t}

    ok = True
    det = [k for k in ("statesum", "spinfoam", "epe") if "value" in rows.get(k, {})]
    checks = []
    for a, b in itertools.combinations(det, 2):
        tol = 1e-6 + rows[a]["shell"] + rows[b]["shell"]
        diff = abs(rows[a]["value"] - rows[b]["value"])
        checks.append({"pair": f"{a}-{b}", "diff": num(diff), "tol": num(tol), "pass": diff <= tol})
    for a in det:
        tol = 3 * rows["mc"]["stderr"] + rows[a]["shell"]
        diff = abs(rows[a]["value"] - rows["mc"]["value"])
        checks.append({"pair": f"{a}-mc", "diff": num(diff), "tol": num(tol), "pass": diff <= tol})
    ok = all(c["pass"] for c in checks)
    table = {k: {kk: (num(vv) if isinstance(vv, float) else vv) for kk, vv in r.items()} for k, r in rows.items()}
    return {"engines": table, "checks": checks, "pass": ok}


COMMANDS = {
    "wg": cmd_wg,
    "lattice-describe": cmd_lattice_describe,
    "statesum": cmd_statesum,
    "spinfoam": cmd_spinfoam,
    "mc": cmd_mc,
    "surface": cmd_surface,
    "masterloop": cmd_masterloop,
    "crosscheck": cmd_crosscheck,
}


# --------------------------------------------------------------- parsing


def _extents(text):
    try:
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad extents {text!r}") from exc


def _count(text):
    """Integer counts, accepting forms like 1e6."""
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad count {text!r}") from exc
    if v != int(v):
        raise argparse.ArgumentTypeError(f"count must be an integer: {text!r}")
    return int(v)


def build_parser() -> argparse.ArgumentParser:
    env_threads = os.environ.get(THREADS_ENV)
    p = _Parser(prog="ymloops", description=__doc__.splitlines()[0],
                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, problem=True, action=True, mc=False):
        sp.formatter_class = argparse.ArgumentDefaultsHelpFormatter
        sp.add_argument("--out", default=None, help="also write the JSON result here")
        sp.add_argument("--threads", type=int, default=int(env_threads) if env_threads else None,
                        help=f"thread cap (default from ${THREADS_ENV})")
        sp.add_argument("--N", type=int, default=1, help="rank of U(N)")
        if problem:
            sp.add_argument("--lattice", default=None, help="JSON with d, extents and optional loops")
            sp.add_argument("--loops", default=None, help="JSON list of loops or {\"loops\": [...]}")
        if action:
            sp.add_argument("--action", default="wilson", choices=["wilson", "heat"])
            sp.add_argument("--beta", type=float, default=None, help="Wilson coupling")
            sp.add_argument("--t", type=float, default=None, help="heat-kernel time")
            sp.add_argument("--trunc", type=int, default=None, help="label truncation (default 20 at N=1, else 3)")
        if mc:
            sp.add_argument("--samples", type=_count, default=0, help="Monte Carlo samples (0 = command default)")
            sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("wg", help="Weingarten table per cycle type")
    common(sp, problem=False, action=False)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--csv", default=None, help="also write the table as CSV")

    sp = sub.add_parser("lattice-describe", help="edge and plaquette ids")
    common(sp, problem=False, action=False)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--extents", type=_extents, required=True)

    for name, hlp, mc in (("statesum", "character state sum", False), ("spinfoam", "channel model defect ratio", False),
                          ("mc", "reweighted Haar Monte Carlo", True)):
        sp = sub.add_parser(name, help=hlp)
        common(sp, mc=mc)

    sp = sub.add_parser("surface", help="surface expansion of a word integral")
    common(sp, problem=False, action=False)
    sp.add_argument("--words", required=True, help='words separated by ";", e.g. "x y X Y"')
    sp.add_argument("--labels", default=None, help='labels "lp/lm" separated by ";" (default fundamental)')
    sp.add_argument("--coarse", action="store_true")

    sp = sub.add_parser("masterloop", help="master loop equation residuals")
    common(sp, mc=True)
    sp.add_argument("--mode", choices=["pointwise", "coefficient", "wilson"], required=True)
    sp.add_argument("--edge", default=None, help="edge id like e7 (default: every edge on the loops)")

    sp = sub.add_parser("crosscheck", help="compare all engines on one problem")
    common(sp, mc=True)
    sp.add_argument("--kmax", type=int, default=6, help="strong-coupling order for the epe engine")
    return p


def config_from_args(ns) -> RunConfig:
    d = vars(ns).copy()
    cfg = RunConfig(command=d.pop("command"))
    for k in ("lattice", "loops", "out", "threads", "N", "samples", "seed"):
        if k in d:
            setattr(cfg, k, d.pop(k))
    if "action" in d:
        cfg.action = d.pop("action")
        beta, t = d.pop("beta"), d.pop("t")
        if cfg.action == "wilson" and t is not None:
            raise ValidationError("--t is for the heat action")
        if cfg.action == "heat" and beta is not None and cfg.command != "masterloop":
            raise ValidationError("--beta is for the wilson action")
        c = t if cfg.action == "heat" else beta
        cfg.coupling = 1.0 if c is None else c
        cfg.truncation = d.pop("trunc")
    cfg.extra = d
    _check_N(cfg.N)
    if cfg.truncation is not None and cfg.truncation < 0:
        raise ValidationError("--trunc must be >= 0")
    if cfg.samples < 0:
        raise ValidationError("--samples must be >= 0")
    if cfg.threads is not None and cfg.threads < 1:
        raise ValidationError("--threads must be >= 1")
    return cfg


def run(cfg: RunConfig) -> tuple:
    """Dispatch; returns (exit code, JSON document)."""
    doc = {"command": cfg.command, "version": __version__, "config": asdict(cfg)}
    try:
        result = COMMANDS[cfg.command](cfg)
    except ValidationError as exc:
        return EXIT_INVALID, doc | {"error": str(exc), "status": "invalid"}
    except (RefusalError, OverflowError) as exc:
        return EXIT_REFUSED, doc | {"error": str(exc), "status": "refused"}
    except ValueError as exc:
        return EXIT_INVALID, doc | {"error": str(exc), "status": "invalid"}
    doc["result"] = result
    if cfg.command == "crosscheck" and not result["pass"]:
        return EXIT_CROSSCHECK, doc | {"status": "crosscheck failed"}
    return EXIT_OK, doc | {"status": "ok"}


def main(argv=None) -> int:
    try:
        cfg = config_from_args(build_parser().parse_args(argv))
    except ValidationError as exc:
        print(json.dumps({"version": __version__, "status": "invalid", "error": str(exc)}), file=sys.stderr)
        return EXIT_INVALID
    code, doc = run(cfg)
    text = json.dumps(doc, indent=2, default=str)
    print(text)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
