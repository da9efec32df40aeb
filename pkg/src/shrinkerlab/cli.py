"""Command-line front end.  Outputs land under $SHRINKERLAB_OUTPUT (default ./shrinkerlab-output)."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import flow as fl
from .errors import ShrinkerLabError
from .experiments import EXPERIMENTS, ExperimentConfig, VerificationRecord, run_experiment
from .gaussian import entropy, f_functional
from .geometry import CylinderSamples, SampledCurve, shrinker_residual
from .heatkernel import TruncatedKernel, reproducing_defect, semigroup_defect
from .io import build_model, load_trajectory, read_curve_csv, save_trajectory, write_curve_csv, write_rows
from .regress import regression_compare
from .spectral import dirichlet_spectrum, solve_manifold

OUTPUT_ENV = "SHRINKERLAB_OUTPUT"


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "shrinkerlab-output"))


def _out(args, default: str) -> Path:
    path = Path(args.out) if getattr(args, "out", None) else output_root() / default
    path.mkdir(parents=True, exist_ok=True)
    return path


def _report(records: list[VerificationRecord], out: Path | None = None) -> int:
    for r in records:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: lhs={r.lhs:.6g} rhs={r.rhs:.6g} slack={r.slack:.3g}")
    if out is not None:
        write_rows(out / "records.csv", [r.row() for r in records],
                   ["name", "lhs", "rhs", "slack", "tol", "passed", "provenance"])
    return 0 if all(r.passed for r in records) else 1


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected two integers 'coarse,refine'") from exc
    return a, b


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def cmd_model(args) -> int:
    model = build_model(args.manifest)
    out = _out(args, "model")
    summary = {"dim": model.dim, "ambient_dim": model.ambient_dim, "num_nodes": model.num_nodes,
               "F": f_functional(model) if not isinstance(model, SampledCurve) or model.closed or model.tail_certified else None}
    if isinstance(model, SampledCurve):
        write_curve_csv(model, out / "curve.csv")
        if model.closed:
            summary["shrinker_residual"] = shrinker_residual(model).max_residual
    else:
        write_rows(out / "nodes.csv", [dict(zip([f"x{i+1}" for i in range(model.ambient_dim)], row)) for row in model.nodes])
    (out / "model.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_entropy(args) -> int:
    model = build_model(args.model)
    coarse, refine = args.entropy_grid
    rep = entropy(model, coarse=coarse, refine_iters=refine)
    out = _out(args, "entropy")
    (out / "entropy.json").write_text(rep.to_json())
    print(f"lambda = {rep.value:.12g}  (c = {rep.scale:.6g}, x0 = {np.round(rep.shift, 6).tolist()})")
    return 0


def cmd_spectrum(args) -> int:
    model = build_model(args.model)
    out = _out(args, "spectrum")
    if args.dirichlet_radius is not None:
        beta = dirichlet_spectrum(model, args.dirichlet_radius, args.count)
        write_rows(out / "dirichlet.csv", [{"index": i, "r": args.dirichlet_radius, "beta": b} for i, b in enumerate(beta)])
        values = beta
    else:
        dec = solve_manifold(model, args.count)
        write_rows(out / "spectrum.csv", dec.to_csv_rows())
        values = dec.eigenvalues
    for i, v in enumerate(values):
        print(f"{i:4d}  {v:.12g}")
    return 0


def cmd_heatkernel(args) -> int:
    model = build_model(args.model)
    dec = solve_manifold(model, min(args.count, model.num_nodes // 4))
    ker = TruncatedKernel.from_decomposition(dec, mu_max=args.modes)
    out = _out(args, "heatkernel")
    if args.check == "semigroup":
        rep = semigroup_defect(ker, args.t, args.s)
        records = [VerificationRecord.le("semigroup defect", rep.max_abs, args.tol, 0.0, "heat kernel semigroup property")]
    else:
        records = []
        for i in range(ker.size):
            rep = reproducing_defect(ker, ker.modes[:, i], args.t_small)
            records.append(VerificationRecord.close(f"reproducing law mode {i}", rep.defect, rep.closed_form, args.tol,
                                                    "heat kernel reproducing property"))
    return _report(records, out)


def cmd_flow_run(args) -> int:
    curve = read_curve_csv(args.initial)
    controls = fl.FlowControls(scheme=args.scheme, cfl=args.cfl, kappa_stop=args.kappa_stop,
                               record_every=args.record_every)
    fields = {"x1": curve.nodes[:, 0].copy(), "one": np.ones(curve.num_nodes)}
    if args.until_singularity:
        traj = fl.run_to_singularity(curve, fields, controls, t0=args.t0)
    else:
        if args.t_end is None:
            raise ShrinkerLabError("give --until-singularity or --t-end")
        traj = fl.run_flow(curve, fields, controls, t0=args.t0, t_end=args.t_end)
    out = _out(args, "flow")
    series = fl.gaussian_functionals(traj) if traj.T is not None else None
    save_trajectory(traj, out, series)
    print(f"{len(traj.states)} states saved to {out}; T = {traj.T}, p = {traj.p}")
    return 0


def cmd_flow_diagnose(args) -> int:
    traj = load_trajectory(args.run)
    out = _out(args, "diagnose")
    center = fl.Center.of(traj)
    name = args.field or traj.field_names()[0]
    i1, i2 = args.pair if args.pair else (0, len(traj.states) - 1)
    if args.experiment in ("linear-growth", "quadratic-growth"):
        mode = args.experiment.split("-")[0]
        rep = fl.growth_experiment(traj, name, i1, i2, mode, args.mu, center)
        records = [VerificationRecord.le(f"{mode} growth of {name}", rep.lhs, rep.rhs, 1e-12,
                                         f"caloric functions grow at least {mode}ly" if mode == "linear"
                                         else "caloric functions grow essentially quadratically")]
    elif args.experiment == "zeta":
        z = fl.zeta_projection(traj.states[i2], name, center)
        write_rows(out / "zeta.csv", [{"index": i, "zeta": zi, "a": ai} for i, (zi, ai) in enumerate(zip(z.zeta, z.a))])
        records = [VerificationRecord.le("projection orthogonality defect", z.orthogonality_defect, 1e-8, 0.0,
                                         "projection onto constants and coordinates")]
    else:
        funcs = args.fields.split(",") if args.fields else traj.field_names()
        rep = fl.good_scale_experiment(traj, funcs, args.omega, args.delta, args.d, center)
        write_rows(out / "scales.csv", [{"m": m, "a": a} for m, a in enumerate(rep.a)])
        records = [VerificationRecord.le(f"good-scale lower bound m={m}", rep.bound, s, 0.0, "lower bound at good scales")
                   for m, s in rep.sums.items()]
    return _report(records, out)


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    return _report(run_experiment(cfg))


def cmd_verify_all(args) -> int:
    names = args.only.split(",") if args.only else list(EXPERIMENTS)
    root = _out(args, "verify-all")
    status = 0
    for name in names:
        print(f"== {name}")
        status |= _report(run_experiment(ExperimentConfig(name, str(root / name), seed=args.seed)))
    return status


def cmd_regress(args) -> int:
    tolerances = dict(kv.split("=", 1) for kv in args.tol or [])
    rep = regression_compare(args.run, args.golden, {k: float(v) for k, v in tolerances.items()}, args.default_tol)
    print(rep.summary())
    return 0 if rep.passed else 1


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shrinkerlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("model", help="build a model from a JSON manifest and write its nodes")
    m.add_argument("manifest")
    m.add_argument("--out")
    m.set_defaults(func=cmd_model)

    e = sub.add_parser("entropy", help="entropy of a model")
    e.add_argument("--model", required=True)
    e.add_argument("--entropy-grid", type=_pair, default=(21, 30), metavar="COARSE,REFINE")
    e.add_argument("--out")
    e.set_defaults(func=cmd_entropy)

    s = sub.add_parser("spectrum", help="drift Laplacian eigenvalues (whole or Dirichlet on a ball)")
    s.add_argument("--model", required=True)
    s.add_argument("--count", type=int, default=12)
    s.add_argument("--dirichlet-radius", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    h = sub.add_parser("heatkernel", help="semigroup or reproducing checks of the truncated heat kernel")
    h.add_argument("--model", required=True)
    h.add_argument("--modes", type=float, default=6.0, help="keep eigenvalues up to this value")
    h.add_argument("--count", type=int, default=40)
    h.add_argument("--check", choices=("semigroup", "reproducing"), default="semigroup")
    h.add_argument("--t", type=float, default=0.5)
    h.add_argument("--s", type=float, default=0.5)
    h.add_argument("--t-small", type=float, default=0.01)
    h.add_argument("--tol", type=float, default=1e-6)
    h.add_argument("--out")
    h.set_defaults(func=cmd_heatkernel)

    f = sub.add_parser("flow", help="curve shortening runs and diagnostics")
    fsub = f.add_subparsers(dest="flow_command", required=True)
    fr = fsub.add_parser("run")
    fr.add_argument("--initial", required=True, help="curve CSV")
    fr.add_argument("--until-singularity", action="store_true")
    fr.add_argument("--t0", type=float, default=0.0)
    fr.add_argument("--t-end", type=float)
    fr.add_argument("--scheme", choices=("explicit", "implicit"), default="explicit")
    fr.add_argument("--cfl", type=float, default=0.2)
    fr.add_argument("--kappa-stop", type=float, default=50.0)
    fr.add_argument("--record-every", type=int, default=0)
    fr.add_argument("--out")
    fr.set_defaults(func=cmd_flow_run)
    fd = fsub.add_parser("diagnose")
    fd.add_argument("--run", required=True, help="trajectory directory written by 'flow run'")
    fd.add_argument("--experiment", required=True, choices=("linear-growth", "quadratic-growth", "zeta", "scales"))
    fd.add_argument("--field")
    fd.add_argument("--fields", help="comma-separated field names for 'scales', constant first")
    fd.add_argument("--pair", type=_pair, metavar="I1,I2")
    fd.add_argument("--mu", type=float, default=0.1)
    fd.add_argument("--omega", type=float, default=4.0)
    fd.add_argument("--delta", type=float, default=1.0)
    fd.add_argument("--d", type=float, default=1.0)
    fd.add_argument("--out")
    fd.set_defaults(func=cmd_flow_diagnose)

    r = sub.add_parser("run", help="run one experiment from an INI config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify-all", help="run every registered experiment")
    v.add_argument("--only", help="comma-separated subset of: " + ", ".join(EXPERIMENTS))
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify_all)

    g = sub.add_parser("regress", help="numeric diff of a run directory against a golden one")
    g.add_argument("run")
    g.add_argument("golden")
    g.add_argument("--tol", action="append", metavar="NAME=REL", help="per-quantity relative tolerance")
    g.add_argument("--default-tol", type=float, default=1e-4)
    g.set_defaults(func=cmd_regress)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ShrinkerLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
