"""``diamondlab`` command-line harness.

Exit codes: 0 all verdicts PASS, 1 some verdict FAIL, 2 usage error, 3 IO error.
Flags override values from ``--config``; ``--save-config`` writes the
effective configuration so a run can be repeated exactly.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bounds as B
from .ensembles import Case, EnsembleParams, RegimeError, certify_ensemble, generate_ensemble
from .haar import SeededRng, default_seed, random_density_matrix
from .matrix_core import ContractError, DimensionError
from .moments import (
    concentration_experiment,
    estimate_c_fourth_moment,
    estimate_c_second_moment,
    estimate_d_fourth_moment,
    estimate_d_second_moment,
    estimate_first_moment_tilted,
    estimate_lipschitz_ratio,
    holder_check,
    judge,
)
from .storage import (
    ArtifactIOError,
    RunConfig,
    read_csv,
    read_ensemble,
    read_json,
    write_csv,
    write_ensemble,
    write_json,
)
from .weingarten import Permutation, haar_moment_closed_form, mc_haar_moment, wg_exact

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


# Per-command defaults. Flags default to None so that a value coming
# from --config is only overridden by flags actually given.
DEFAULTS = {
    "construct": dict(case="equal", dA=4, dB=2, r=2, eps=0.1, M=20, out="ensemble"),
    "certify": dict(input=None, threshold=None, eta=None, out=None),
    "moments": dict(case="tilted", dA=4, dB=4, r=2, eps=0.1, samples=5000, out="moments.csv",
                    concentration=False, workers=1),
    "bounds": dict(dA=16, dB=4, r=4, eps=0.01, cEnsemble=1.0, cPack=1.0, logM=None, out="bounds.json"),
    "simulate": dict(input=None, N=3, auxDim=2, out=None),
    "weingarten-check": dict(d=3, samples=100000, out="weingarten.csv", workers=1),
    "report": dict(dir=".", out=None),
}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="64-bit seed (default: $DIAMONDLAB_SEED or 0)")
    p.add_argument("--config", default=None, help="JSON run config; flags override its values")
    p.add_argument("--save-config", default=None, help="write the effective run config here")


def _case_flags(p):
    p.add_argument("--case", choices=["equal", "tilted"], default=None)
    p.add_argument("--dA", type=int, default=None)
    p.add_argument("--dB", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diamondlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="generate an ensemble and write its manifest")
    _case_flags(p)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_common(p)

    p = sub.add_parser("certify", help="pairwise separation/closeness check of an ensemble")
    p.add_argument("--in", dest="input", default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--out", default=None)
    _add_common(p)

    p = sub.add_parser("moments", help="Monte Carlo moment reports")
    _case_flags(p)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--concentration", action="store_true", default=None)
    p.add_argument("--workers", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("bounds", help="query-complexity lower bounds")
    p.add_argument("--dA", type=int, default=None)
    p.add_argument("--dB", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--cEnsemble", type=float, default=None)
    p.add_argument("--cPack", type=float, default=None)
    p.add_argument("--logM", type=float, default=None)
    p.add_argument("--out", default=None)
    _add_common(p)

    p = sub.add_parser("simulate", help="protocol trace-distance gaps for an ensemble")
    p.add_argument("--in", dest="input", default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--auxDim", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_common(p)

    p = sub.add_parser("weingarten-check", help="closed-form vs Monte Carlo Haar moments")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("report", help="aggregate verdicts from a run directory")
    p.add_argument("--dir", default=None)
    p.add_argument("--out", default=None)
    _add_common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cmd = args.command
    params = dict(DEFAULTS[cmd])
    cfg = RunConfig(cmd)
    if args.config:
        loaded = RunConfig.load(args.config)
        if loaded.command != cmd:
            raise UsageError(f"config is for {loaded.command!r}, not {cmd!r}")
        unknown = set(loaded.params) - set(params)
        if unknown:
            raise UsageError(f"unknown config params {sorted(unknown)}")
        params.update(loaded.params)
        cfg.seed, cfg.out, cfg.tolerances = loaded.seed, loaded.out, loaded.tolerances
    for key in params:
        v = getattr(args, key, None)
        if v is not None:
            params[key] = v
    if args.seed is not None:
        cfg.seed = args.seed
    if cfg.seed is None:
        try:
            cfg.seed = default_seed()
        except ValueError as exc:
            raise UsageError(f"DIAMONDLAB_SEED is not an integer: {exc}") from exc
    if params.get("out") is not None:
        cfg.out = params["out"]
    params["out"] = cfg.out
    cfg.params = params
    return cfg


def _params(p: dict, seed: int) -> EnsembleParams:
    return EnsembleParams(p["dA"], p["dB"], p["r"], p["eps"], M=p.get("M", 1), seed=seed, case=Case(p["case"]))


def _need(p: dict, key: str, flag: str):
    if p.get(key) is None:
        raise UsageError(f"missing required {flag}")
    return p[key]


# -- subcommands ---------------------------------------------------------------------

def cmd_construct(cfg: RunConfig) -> int:
    ens = generate_ensemble(_params(cfg.params, cfg.seed))
    man = write_ensemble(ens, cfg.params["out"])
    print(f"wrote {len(ens)} members to {man}")
    return EXIT_OK


def cmd_certify(cfg: RunConfig) -> int:
    p = cfg.params
    src = Path(_need(p, "input", "--in"))
    loaded = read_ensemble(src)
    eta = p["eta"] if p["eta"] is not None else 2 * loaded.eps
    rep = certify_ensemble(loaded.isometries, sep_threshold=p["threshold"], eta=eta)
    rows = [dict(pair=f"{r.i}-{r.j}", choi_dist=r.choi_dist, iso_dist=r.iso_dist, verdict=r.verdict,
                 threshold=rep.sep_threshold, eta=rep.eta, seed=loaded.manifest["seed"],
                 anchor="Choi distance >= threshold and isometry distance <= eta")
            for r in rep.pairs]
    out = p["out"] or str(src / "certify.csv")
    write_csv(out, "certify", ["pair", "choi_dist", "iso_dist", "verdict", "threshold", "eta", "seed", "anchor"],
              rows)
    print(f"{len(rows)} pairs, min separation {rep.min_separation:.6g}, max closeness {rep.max_closeness:.6g}; "
          f"threshold {rep.sep_threshold:.6g}, eta {rep.eta:.6g} -> {'PASS' if rep.passed else 'FAIL'}")
    print(f"Choi ranks: {sorted(set(rep.choi_ranks))}")
    return EXIT_OK if rep.passed else EXIT_FAIL


MOMENT_COLUMNS = ["quantity", "estimate", "stderr", "target", "relation", "verdict", "samples", "seed", "sigmas",
                  "anchor"]


def cmd_moments(cfg: RunConfig) -> int:
    p = cfg.params
    params = _params(p, cfg.seed)
    n, w = p["samples"], p["workers"]
    rng = SeededRng(cfg.seed)
    if params.case is Case.TILTED:
        reports = [estimate_c_second_moment(params, n, rng, w), estimate_c_fourth_moment(params, n, rng, w),
                   *holder_check(params, n, rng, w), estimate_first_moment_tilted(params, n, rng, w)]
    else:
        reports = [*estimate_d_second_moment(params, n, rng, w), estimate_d_fourth_moment(params, n, rng, w)]
    reports.append(estimate_lipschitz_ratio(params, min(n, 500), 1e-3, rng, w))
    rows = [dict(r.row(), sigmas=4) for r in reports]
    if p["concentration"]:
        conc = concentration_experiment(params, n, rng=rng, workers=w)
        for t in conc.rows:
            rows.append(dict(quantity=f"P(f >= mean + {t.t:.6g})", estimate=t.upper_freq, stderr=t.upper_stderr,
                             target=t.bound, relation="at_most",
                             verdict=judge(t.upper_freq, t.upper_stderr, t.bound, "at_most", n),
                             samples=n, seed=cfg.seed, sigmas=4, anchor="exp(-d t^2 / (12 L^2))"))
    write_csv(p["out"], "moments", MOMENT_COLUMNS, rows)
    for r in rows:
        print(f"{r['verdict']:>4}  {r['quantity']}: {r['estimate']:.6g} (+-{r['stderr']:.2g}) "
              f"{r['relation']} {r['target']:.6g}")
    return EXIT_OK if all(r["verdict"] == "PASS" for r in rows) else EXIT_FAIL


def cmd_bounds(cfg: RunConfig) -> int:
    p = cfg.params
    rep = B.all_bounds(p["dA"], p["dB"], p["r"], p["eps"], p["cEnsemble"], p["cPack"], p["logM"])
    doc = dict(rep.to_dict(), seed=cfg.seed, anchor="Fano bound (2/3) log M - log 2 over per-query information")
    write_json(p["out"], "bounds", doc)
    for k in ("N_general", "N_main_equal", "N_main_tilted", "N_packing"):
        if getattr(rep, k) is not None:
            print(f"{k} = {getattr(rep, k)}")
    for f in rep.flags:
        print(f"note: {f}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    p = cfg.params
    src = Path(_need(p, "input", "--in"))
    loaded = read_ensemble(src)
    tilted = loaded.manifest.get("case") == "tilted"
    trace = B.simulate_protocol_gap(B.ProtocolConfig(loaded.isometries, p["N"], p["auxDim"], seed=cfg.seed,
                                                     flag_register=tilted))
    rows = [dict(step=k + 1, gap=g, bound=trace.bound, verdict="PASS" if g <= trace.bound + 1e-9 else "FAIL",
                 seed=cfg.seed, anchor="||pi_k - xi_k||_1 <= 2 eta")
            for k, g in enumerate(trace.gaps)]
    out = p["out"] or str(src / "simulate.csv")
    write_csv(out, "simulate", ["step", "gap", "bound", "verdict", "seed", "anchor"], rows)
    for r in rows:
        print(f"step {r['step']}: gap {r['gap']:.6g} <= {r['bound']:.6g} {r['verdict']}")
    return EXIT_OK if trace.passed else EXIT_FAIL


def weingarten_cases(d: int, seed: int):
    g = SeededRng(seed, 1).generator()
    e11 = np.zeros((d, d))
    e11[0, 0] = 1
    rho = [random_density_matrix(g, d) for _ in range(4)]
    return [
        ("n1 random states", [rho[0]], [rho[1]]),
        ("n2 random states", rho[:2], rho[2:]),
        ("n2 |U_11|^4", [e11, e11], [e11, e11]),
        ("n2 Tr(U B U^dag)^2 swap", [np.eye(d), rho[0]], [rho[1], np.eye(d)]),
    ]


def cmd_weingarten_check(cfg: RunConfig) -> int:
    p = cfg.params
    d, n = p["d"], p["samples"]
    rows = []
    for idx, (name, a, b) in enumerate(weingarten_cases(d, cfg.seed)):
        cf = haar_moment_closed_form(a, b, d)
        est, se = mc_haar_moment(a, b, d, n, SeededRng(cfg.seed, 100 + idx), p["workers"])
        z = abs(est - cf) / se if se > 0 else (0.0 if est == cf else float("inf"))
        rows.append(dict(case=name, closed_form=cf, estimate=est, stderr=se, z_score=z,
                         verdict="PASS" if z <= 4 else "FAIL", samples=n, seed=cfg.seed, sigmas=4,
                         anchor="sum over alpha, beta of Wg(beta alpha^-1) Tr_beta^-1(B) Tr_alpha gamma(A)"))
    for d_ in range(2, 9):
        for cyc in ("(1)", "(1)(2)", "(12)"):
            rows.append(dict(case=f"Wg{cyc} d={d_}", closed_form=str(wg_exact(Permutation.parse(cyc), d_)),
                             estimate="", stderr=0.0, z_score=0.0, verdict="PASS", samples=0, seed=cfg.seed,
                             sigmas=4, anchor="exact rational table"))
    write_csv(p["out"], "weingarten-check",
              ["case", "closed_form", "estimate", "stderr", "z_score", "verdict", "samples", "seed", "sigmas",
               "anchor"], rows)
    for r in rows[:4]:
        print(f"{r['verdict']:>4}  {r['case']}: closed {r['closed_form']:.6g} est {r['estimate']:.6g} z={r['z_score']:.2f}")
    return EXIT_OK if all(r["verdict"] == "PASS" for r in rows) else EXIT_FAIL


SUMMARY_COLUMNS = ["source", "item", "verdict", "seed", "samples", "anchor"]


def report_summary(directory) -> list[dict]:
    """Collect every verdict-bearing row from CSV and JSON reports under ``directory``."""
    d = Path(directory)
    if not d.is_dir():
        raise ArtifactIOError(f"{d} is not a directory")
    rows = []
    for path in sorted(d.rglob("*.csv")):
        if path.name == "summary.csv":
            continue
        for rec in read_csv(path):
            if "verdict" not in rec:
                raise ArtifactIOError(f"{path}: no verdict column")
            item = rec.get("quantity") or rec.get("case") or rec.get("pair") or rec.get("step") or rec.get("name")
            if rec.get("criterion"):
                item = f"criterion {rec['criterion']}: {rec.get('name', '')}"
            rows.append(dict(source=str(path.relative_to(d)), item=item, verdict=rec["verdict"],
                             seed=rec.get("seed", ""), samples=rec.get("samples", ""),
                             anchor=rec.get("anchor", rec.get("detail", ""))))
    for path in sorted(d.rglob("*.json")):
        doc = read_json(path)
        if "verdict" in doc:
            rows.append(dict(source=str(path.relative_to(d)), item=doc.get("item", path.stem),
                             verdict=doc["verdict"], seed=doc.get("seed", ""), samples=doc.get("samples", ""),
                             anchor=doc.get("anchor", "")))
    return rows


def cmd_report(cfg: RunConfig) -> int:
    p = cfg.params
    rows = report_summary(p["dir"])
    out = p["out"] or str(Path(p["dir"]) / "summary.csv")
    write_csv(out, "report", SUMMARY_COLUMNS, rows)
    fails = [r for r in rows if r["verdict"] != "PASS"]
    print(f"{len(rows)} verdicts, {len(fails)} not PASS -> {'FAIL' if fails else 'PASS'}")
    for r in fails:
        print(f"  {r['verdict']}: {r['source']}: {r['item']}")
    return EXIT_FAIL if fails else EXIT_OK


COMMANDS = {
    "construct": cmd_construct,
    "certify": cmd_certify,
    "moments": cmd_moments,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "weingarten-check": cmd_weingarten_check,
    "report": cmd_report,
}


def run(cfg: RunConfig) -> int:
    return COMMANDS[cfg.command](cfg)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        if args.save_config:
            cfg.save(args.save_config)
        return run(cfg)
    except (UsageError, RegimeError, DimensionError, ContractError, ValueError) as exc:
        print(f"diamondlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArtifactIOError, OSError) as exc:
        print(f"diamondlab: IO error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
