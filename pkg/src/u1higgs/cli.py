"""Command-line entry point.

Subcommands: lattice, sample, gaugefix, norms, loopexp, verify.  Structured
outputs are JSON, tabular outputs CSV; every run writes a manifest (seed,
full configuration, outputs) from which the producing command can be
reconstructed.  Floats are serialized with 17 significant digits so files
round-trip bit-exactly; a fixed seed makes reruns byte-identical.

Exit codes: 0 success / all verdicts pass, 1 verdict failure, 2 usage
error, 3 numerical or resource error.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys

import numpy as np

from . import __version__
from .gauge_core import GaugeField, GaugeTransform, apply_gauge, load_gauge_field, psi
from .gauge_fixing import gauge_fix
from .lattice_geom import (
    ConfigurationError,
    DomainError,
    Rect,
    ResourceError,
    build_lattice,
)
from .loop_expansion import (
    MultiGraph,
    NumericalError,
    OperatorAssignment,
    RadialMeasure,
    expansion_value,
)
from .mc_verify import EXPERIMENTS
from .norms import log_oneform, norm_report
from .rng import stream
from .sampler import ChainConfig, PotentialSpec, sample_interacting, sample_pure_angles

USAGE_ERROR, VERDICT_FAIL, NUMERICAL_ERROR = 2, 1, 3


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _dump_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True, default=_json_default)
        f.write("\n")


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Rect):
        return {"x0": x.x0, "y0": x.y0, "w": x.w, "h": x.h, "scale": x.scale}
    raise TypeError(f"not JSON serializable: {type(x)}")


def _write_manifest(outdir, command, config, seed, outputs):
    _dump_json(os.path.join(outdir, "manifest.json"), {
        "package": "u1higgs", "version": __version__, "command": command,
        "config": config, "seed": seed, "outputs": sorted(outputs),
    })


def _ensure_outdir(args):
    out = args.out or os.environ.get("U1HIGGS_OUT", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _seed_of(args):
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    return secrets.randbits(48)


def _potential(args) -> PotentialSpec:
    return PotentialSpec("quartic", c=getattr(args, "potential_c", 1.0))


# ---------------------------------------------------------------- lattice

def cmd_lattice(args):
    geom = build_lattice(args.N)
    out = _ensure_outdir(args)
    outputs = []
    if args.dump:
        path = os.path.join(out, "geometry.json")
        _dump_json(path, geom.to_json_dict())
        outputs.append("geometry.json")
    print(f"lattice N={args.N}: {geom.node_count} nodes, "
          f"{geom.pos_bond_count} bonds, {geom.plaquette_count} plaquettes")
    _write_manifest(out, "lattice", {"N": args.N, "dump": args.dump}, None, outputs)
    return 0


# ---------------------------------------------------------------- sample

def _write_chain_csv(path, X, stats_fn=None):
    """CSV: step, flattened plaquette angles, derived statistic."""
    with open(path, "w", newline="\n") as f:
        n_plaq = X.shape[1] * X.shape[2]
        header = ["step"] + [f"X{i}" for i in range(n_plaq)] + ["sum_sq"]
        f.write(",".join(header) + "\n")
        for i, x in enumerate(X):
            flat = x.T.reshape(-1)  # geometry row-major order
            row = [str(i)] + [fmt(v) for v in flat] + [fmt((x ** 2).sum())]
            f.write(",".join(row) + "\n")


def cmd_sample(args):
    geom = build_lattice(args.N)
    seed = _seed_of(args)
    out = _ensure_outdir(args)
    config = {"mode": args.mode, "N": args.N, "samples": args.samples,
              "seed": seed, "method": args.method,
              "potential_c": args.potential_c, "burn_in": args.burn_in,
              "thin": args.thin, "chains": args.chains, "threads": args.threads}
    if args.mode == "pure":
        gen = stream(seed, geom.N, tag="")
        X = sample_pure_angles(geom, gen, count=args.samples)
        acc = None
    else:
        cfg = ChainConfig(samples=args.samples, burn_in=args.burn_in,
                          thin=args.thin, n_chains=args.chains, seed=seed)
        res = sample_interacting(geom, _potential(args), cfg,
                                 method=args.method, threads=args.threads)
        X = res.flat()
        acc = res.acceptance.tolist()
        config["proposal_std"] = res.proposal_std
        config["iat"] = res.iat
    _write_chain_csv(os.path.join(out, "samples.csv"), X)
    g = psi(geom, X[-1])
    g.dump_json(os.path.join(out, "field.json"))
    manifest_cfg = dict(config)
    if acc is not None:
        manifest_cfg["acceptance"] = acc
    _write_manifest(out, "sample", manifest_cfg, seed,
                    ["samples.csv", "field.json"])
    print(f"wrote {len(X)} samples to {out}/samples.csv (seed {seed})")
    return 0


# ---------------------------------------------------------------- gaugefix

def cmd_gaugefix(args):
    with open(args.field) as f:
        g = load_gauge_field(f.read())
    out = _ensure_outdir(args)
    betas = tuple(args.beta) if args.beta else (0.5,)
    u, rep = gauge_fix(g, args.alpha, betas=betas, kappa=args.kappa,
                       force_m=args.force_m)
    fixed = apply_gauge(g, u)
    _dump_json(os.path.join(out, "transform.json"),
               {"N": g.geom.N, "angles": u.angles.tolist()})
    fixed.dump_json(os.path.join(out, "fixed_field.json"))
    report = {
        "alpha": rep.alpha, "flatness": rep.flatness_value,
        "flatness_argmax": rep.flatness_argmax,
        "theorem_m": rep.theorem_m, "used_m": rep.used_m,
        "fallback": rep.fallback, "forced_scale": rep.forced_scale,
        "violations": rep.violations,
        "violations_per_scale": rep.smallness_violations_per_scale,
        "axial_thin_sup": rep.axial_thin_sup,
        "axial_max_bond_log": rep.axial_max_bond_log,
        "hypothesis_simple": rep.hypothesis_simple,
        "hypothesis_landau": rep.hypothesis_landau,
        "norms": {str(k): v for k, v in rep.norms.items()},
        "trivial_bound": {str(k): v for k, v in rep.trivial_bound.items()},
        "gr_bound": {str(k): v for k, v in rep.gr_bound.items()},
    }
    _dump_json(os.path.join(out, "report.json"), report)
    _write_manifest(out, "gaugefix",
                    {"field": args.field, "alpha": args.alpha,
                     "betas": list(betas), "kappa": args.kappa,
                     "force_m": args.force_m}, None,
                    ["transform.json", "fixed_field.json", "report.json"])
    print(f"gauge fixed: m={rep.used_m} fallback={rep.fallback} "
          f"violations={rep.violations}")
    return 0


# ---------------------------------------------------------------- norms

def cmd_norms(args):
    with open(args.field) as f:
        g = load_gauge_field(f.read())
    A = log_oneform(g)
    rep = norm_report(A, args.alpha)
    out = _ensure_outdir(args)
    _dump_json(os.path.join(out, "norms.json"), rep)
    _write_manifest(out, "norms", {"field": args.field, "alpha": args.alpha},
                    None, ["norms.json"])
    print(f"|A|_gr = {rep['norm_gr']:.6g}, |A|_rho = {rep['seminorm_rho']:.6g}, "
          f"|A|_alpha = {rep['norm_full']:.6g}")
    return 0


# ---------------------------------------------------------------- loopexp

def _parse_matrix(entry, dim):
    M = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            v = entry[i][j]
            M[i, j] = complex(v[0], v[1]) if isinstance(v, (list, tuple)) else v
    return M


def _parse_measure(spec):
    kind = spec.get("kind", "gaussian_type")
    if kind == "gaussian_type":
        return RadialMeasure.gaussian_type()
    if kind == "dirac0":
        return RadialMeasure.dirac0()
    if kind == "discrete":
        return RadialMeasure.discrete([tuple(p) for p in spec["points"]])
    raise DomainError(f"unsupported measure kind {kind!r} in graph file")


def cmd_loopexp(args):
    with open(args.graph) as f:
        desc = json.load(f)
    fieldtag = desc.get("field", "C")
    dim = int(desc.get("dim", 1))
    vertices = tuple(desc["vertices"])
    edges = tuple((e["from"], e["to"]) for e in desc["edges"])
    G = MultiGraph(vertices, edges)
    mats = tuple(_parse_matrix(e["matrix"], dim) if "matrix" in e
                 else np.array([[e["value"]]]) for e in desc["edges"])
    M = OperatorAssignment(fieldtag, dim, mats, G)
    lam = {v: _parse_measure(desc.get("measures", {}).get(str(v), {}))
           for v in vertices}
    res = expansion_value(G, M, lam, args.max_total)
    out = _ensure_outdir(args)
    path = os.path.join(out, "ledger.csv")
    with open(path, "w", newline="\n") as f:
        f.write("multiset,total_length,contribution_re,contribution_im\n")
        for (sig, tl, contrib) in res.ledger:
            c = complex(contrib)
            f.write(f"\"{sig}\",{tl},{fmt(c.real)},{fmt(c.imag)}\n")
    _write_manifest(out, "loopexp",
                    {"graph": args.graph, "max_total": args.max_total}, None,
                    ["ledger.csv"])
    v = complex(res.value)
    print(f"expansion value = {v.real:.12g}{v.imag:+.3g}i  "
          f"(truncation {args.max_total}, tail majorant {res.tail_majorant:.3g}, "
          f"{len(res.ledger)} terms)")
    return 0


# ---------------------------------------------------------------- verify

def _append_csv_ledger(path, result):
    header = "name,verdict,estimate,stderr,reference,sample_size,seed\n"
    exists = os.path.exists(path)
    with open(path, "a", newline="\n") as f:
        if not exists:
            f.write(header)
        ref = "" if result.reference is None else fmt(result.reference)
        f.write(f"{result.name},{result.verdict},{fmt(result.estimate)},"
                f"{fmt(result.stderr)},{ref},{result.sample_size},{result.seed}\n")


def cmd_verify(args):
    if args.experiment not in EXPERIMENTS:
        print(f"unknown experiment {args.experiment!r}; choose from "
              f"{sorted(EXPERIMENTS)}", file=sys.stderr)
        return USAGE_ERROR
    kwargs = {}
    if args.config:
        with open(args.config) as f:
            kwargs.update(json.load(f))
    if args.N is not None:
        kwargs["N"] = args.N
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.samples is not None:
        kwargs["samples"] = args.samples
    if args.eta is not None:
        kwargs["eta"] = args.eta
    if args.mode is not None:
        kwargs["mode"] = args.mode
    if "N_list" in kwargs:
        kwargs["N_list"] = tuple(kwargs["N_list"])
    result = EXPERIMENTS[args.experiment](**kwargs)
    out = _ensure_outdir(args)
    _append_csv_ledger(os.path.join(out, "results.csv"), result)
    _dump_json(os.path.join(out, f"report_{args.experiment}.json"),
               result.to_json_dict())
    _write_manifest(out, "verify",
                    {"experiment": args.experiment, **{k: (list(v) if isinstance(v, tuple) else v)
                                                       for k, v in kwargs.items()}},
                    kwargs.get("seed"), ["results.csv",
                                         f"report_{args.experiment}.json"])
    print(f"{result.name}: {result.verdict} (estimate {result.estimate:.6g}, "
          f"reference {result.reference})")
    return 0 if result.verdict in ("pass", "informational") else VERDICT_FAIL


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="u1higgs",
                                description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=os.cpu_count(),
                   help="worker parallelism (results are thread-count independent)")
    sub = p.add_subparsers(dest="command")

    q = sub.add_parser("lattice", help="build and dump a lattice geometry")
    q.add_argument("--N", type=int, required=True)
    q.add_argument("--dump", action="store_true")
    q.add_argument("--out")
    q.set_defaults(func=cmd_lattice)

    q = sub.add_parser("sample", help="draw pure-gauge or interacting samples")
    q.add_argument("mode", choices=["pure", "interacting"])
    q.add_argument("--N", type=int, required=True)
    q.add_argument("--samples", type=int, required=True)
    q.add_argument("--seed", type=int)
    q.add_argument("--method", default="loop-expansion",
                   choices=["monte-carlo", "loop-expansion", "quadrature",
                            "constant"])
    q.add_argument("--potential-c", type=float, default=1.0)
    q.add_argument("--burn-in", type=int, default=1000)
    q.add_argument("--thin", type=int, default=4)
    q.add_argument("--chains", type=int, default=2)
    q.add_argument("--out")
    q.set_defaults(func=cmd_sample)

    q = sub.add_parser("gaugefix", help="run the gauge-fixing pipeline")
    q.add_argument("--field", required=True, help="gauge-field JSON")
    q.add_argument("--alpha", type=float, default=0.5)
    q.add_argument("--beta", type=float, action="append")
    q.add_argument("--kappa", type=float, default=0.25)
    q.add_argument("--force-m", type=int, default=None)
    q.add_argument("--out")
    q.set_defaults(func=cmd_gaugefix)

    q = sub.add_parser("norms", help="Holder-Besov norms of log g")
    q.add_argument("--field", required=True)
    q.add_argument("--alpha", type=float, default=0.5)
    q.add_argument("--out")
    q.set_defaults(func=cmd_norms)

    q = sub.add_parser("loopexp", help="evaluate a loop expansion on a multigraph")
    q.add_argument("--graph", required=True, help="multigraph description JSON")
    q.add_argument("--max-total", type=int, default=12)
    q.add_argument("--out")
    q.set_defaults(func=cmd_loopexp)

    q = sub.add_parser("verify", help="run a verification experiment")
    q.add_argument("experiment")
    q.add_argument("--config", help="JSON file with experiment parameters")
    q.add_argument("--N", type=int)
    q.add_argument("--seed", type=int)
    q.add_argument("--samples", type=int)
    q.add_argument("--eta", type=float)
    q.add_argument("--mode")
    q.add_argument("--out")
    q.set_defaults(func=cmd_verify)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE_ERROR if e.code not in (0, None) else 0
    if not getattr(args, "command", None):
        parser.print_help()
        return USAGE_ERROR
    try:
        return args.func(args)
    except (DomainError, ConfigurationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except (ResourceError, NumericalError) as e:
        print(f"error: {e}", file=sys.stderr)
        return NUMERICAL_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
