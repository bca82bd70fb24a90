"""Command-line front end: every run reads/writes plain files and a manifest.

Exit codes: 0 on success, 1 on a domain failure (infeasible schedule, solver
failure, norm drift, ...), 2 on I/O, schema, or usage errors. Each command
writes its outputs atomically and drops a manifest JSON (next to a single
output file, or manifest.json inside an output directory) recording command,
version, parameters, seeds, and paths, so any artifact can be reproduced
exactly. `study` accepts a previously written manifest as its parameter
source, so replaying one reproduces the outputs bit-identically; only the
wall_time_s field varies between runs.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__
from ._util import atomic_write_text, derive_seeds, format_sig
from .convex import ConvexConfig, optimize_convex
from .direct import DirectConfig, optimize_direct
from .dynamics import evolve
from .errors import InstanceFormatError, SpoError
from .experiments import (compare_spo, epsilon_sweep, mine_hard_instances,
                          run_perturbation_study)
from .pauli import QuboInstance, random_instance, read_instance, write_instance
from .schedule import (RESTRICTIONS, linear_schedule, read_schedule_csv,
                       write_schedule_csv)
from .spectrum import gap_profile, min_gap, write_profile_csv

STUDY_KINDS = ("perturb", "mine", "eps_sweep", "compare")


def _write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _write_manifest(path: str, command: str, params: dict, seeds, inputs,
                    outputs, t0: float, extra: dict | None = None) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "parameters": params,
        "seeds": [int(s) for s in seeds],
        "input_paths": list(inputs),
        "output_paths": list(outputs),
        "wall_time_s": time.perf_counter() - t0,
    }
    if extra:
        doc.update(extra)
    _write_json(path, doc)


def _args_params(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func" and not k.startswith("_")}


def _default_fbound(inst: QuboInstance, fbound: float | None) -> float:
    if fbound is not None:
        if fbound <= 0:
            raise ValueError(f"--fbound must be positive, got {fbound}")
        return fbound
    return max(inst.coupling_scale(), 1e-12)


def _load_schedule(args, inst: QuboInstance, inputs: list):
    if getattr(args, "schedule", None):
        inputs.append(args.schedule)
        return read_schedule_csv(args.schedule)
    return linear_schedule(inst.n_qubits, args.N, _default_fbound(inst, args.fbound),
                           args.eps)


def cmd_gen(args) -> int:
    t0 = time.perf_counter()
    seeds = derive_seeds(args.seed, args.count)
    outputs = []
    if args.count == 1 and args.out.endswith(".json"):
        inst = random_instance(args.n, seeds[0])
        write_instance(inst, args.out)
        outputs.append(args.out)
        manifest_path = args.out + ".manifest.json"
    else:
        os.makedirs(args.out, exist_ok=True)
        for k, s in enumerate(seeds):
            path = os.path.join(args.out, f"instance_{k:04d}.json")
            write_instance(random_instance(args.n, s), path)
            outputs.append(path)
        manifest_path = os.path.join(args.out, "manifest.json")
    _write_manifest(manifest_path, "gen", _args_params(args), seeds, [], outputs, t0)
    print(f"wrote {len(outputs)} instance file(s)")
    return 0


def cmd_gap(args) -> int:
    t0 = time.perf_counter()
    inputs = [args.instance]
    inst = read_instance(args.instance)
    sched = _load_schedule(args, inst, inputs)
    profile = gap_profile(inst, sched, k=args.k, threads=args.threads)
    write_profile_csv(profile, args.out)
    g_full, i_full = min_gap(profile, scope="full")
    g_int, i_int = min_gap(profile, scope="interior")
    _write_manifest(args.out + ".manifest.json", "gap", _args_params(args),
                    [inst.seed], inputs, [args.out], t0)
    print(f"min gap {format_sig(g_full)} at i={i_full} "
          f"(s={format_sig(i_full / sched.n_intervals)}); "
          f"interior min {format_sig(g_int)} at i={i_int}")
    return 0


def cmd_optimize(args) -> int:
    t0 = time.perf_counter()
    inputs = [args.instance]
    inst = read_instance(args.instance)
    fb = _default_fbound(inst, args.fbound)
    if args.method == "convex":
        cfg = ConvexConfig(p=args.p, eta=args.eta, xi=args.xi, f_bound=fb,
                           slew=args.eps, N=args.N)
        sched, report = optimize_convex(inst, cfg, threads=args.threads)
        report_obj = {
            "method": "convex",
            "iterations": [r.to_json_dict() for r in report.iterations],
            "final_min_gap": float(report.final_min_gap),
            "i_min": int(report.i_min),
            "endpoint_gap_floor": float(report.endpoint_gap_floor),
            "best_case_already": bool(report.best_case_already),
            "termination": report.termination,
            "wall_time_s": float(report.wall_time_s),
        }
        final_gap, i_min = report.final_min_gap, report.i_min
    else:
        init = linear_schedule(inst.n_qubits, args.N, fb, args.eps)
        sched, report = optimize_direct(inst, init, DirectConfig(), threads=args.threads)
        report_obj = {"method": "direct", **report.to_dict()}
        final_gap, i_min = report.final_min_gap, report.i_min
    write_schedule_csv(sched, args.out)
    report_path = args.out + ".report.json"
    _write_json(report_path, report_obj)
    _write_manifest(args.out + ".manifest.json", "optimize", _args_params(args),
                    [inst.seed], inputs, [args.out, report_path], t0)
    print(f"{args.method}: interior min gap {format_sig(final_gap)} at i={i_min}")
    return 0


def cmd_evolve(args) -> int:
    t0 = time.perf_counter()
    inputs = [args.instance]
    inst = read_instance(args.instance)
    sched = _load_schedule(args, inst, inputs)
    times = args.T or [10.0]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "p_succ", "norm_drift", "steps"])
    doubling_deltas = []
    for T in times:
        res = evolve(inst, sched, T, args.substeps)
        w.writerow([format_sig(T), format_sig(res.p_succ, 12),
                    format_sig(res.norm_drift, 3), res.steps])
        line = (f"T={format_sig(T)}: p_succ={format_sig(res.p_succ)} "
                f"(drift {res.norm_drift:.2e}, {res.steps} steps)")
        if args.check_doubling:
            fine = evolve(inst, sched, T, args.substeps, substep_multiplier=2)
            delta = abs(fine.p_succ - res.p_succ)
            doubling_deltas.append({"T": float(T), "delta_p_succ": delta})
            line += f"; doubled substeps move p_succ by {delta:.3e}"
        print(line)
    atomic_write_text(args.out, buf.getvalue())
    extra = {"doubling_deltas": doubling_deltas} if args.check_doubling else None
    _write_manifest(args.out + ".manifest.json", "evolve", _args_params(args),
                    [inst.seed], inputs, [args.out], t0, extra=extra)
    return 0


# --- study: schema-validated parameter maps, one per kind ------------------
# Each entry: key -> (required, default, caster). Casters raise ValueError
# mentioning the key on a bad value.

def _cast_scalar(key, typ):
    def cast(v):
        if v is None:
            raise ValueError(f"study manifest: key {key!r} must not be null")
        try:
            return typ(v)
        except (TypeError, ValueError):
            raise ValueError(f"study manifest: key {key!r} must be {typ.__name__}, "
                             f"got {v!r}") from None
    return cast


def _cast_optional(key, typ):
    inner = _cast_scalar(key, typ)
    return lambda v: None if v is None else inner(v)


def _cast_choice(key, choices):
    def cast(v):
        if v not in choices:
            raise ValueError(f"study manifest: key {key!r} must be one of "
                             f"{choices}, got {v!r}")
        return v
    return cast


def _cast_float_list(key):
    def cast(v):
        if not isinstance(v, (list, tuple)) or not v:
            raise ValueError(f"study manifest: key {key!r} must be a nonempty list")
        return [_cast_scalar(key, float)(x) for x in v]
    return cast


STUDY_SCHEMAS = {
    "perturb": {
        "n": (True, None, lambda k: _cast_scalar(k, int)),
        "instances": (False, 50, lambda k: _cast_scalar(k, int)),
        "perturbations": (False, 200, lambda k: _cast_scalar(k, int)),
        "restriction": (False, "unrestricted", lambda k: _cast_choice(k, RESTRICTIONS)),
        "T": (False, 10.0, lambda k: _cast_scalar(k, float)),
        "seed": (False, 0, lambda k: _cast_scalar(k, int)),
        "N": (False, 50, lambda k: _cast_scalar(k, int)),
        "eps": (False, 2.5, lambda k: _cast_scalar(k, float)),
        "fbound": (False, None, lambda k: _cast_optional(k, float)),
        "substeps": (False, 1, lambda k: _cast_optional(k, int)),
        "normalization": (False, "norm_sq", lambda k: _cast_choice(k, ("norm_sq", "norm"))),
        "bins": (False, 40, lambda k: _cast_scalar(k, int)),
    },
    "mine": {
        "n": (True, None, lambda k: _cast_scalar(k, int)),
        "pool": (False, 2000, lambda k: _cast_scalar(k, int)),
        "keep": (False, 30, lambda k: _cast_scalar(k, int)),
        "T": (False, 10.0, lambda k: _cast_scalar(k, float)),
        "seed": (False, 0, lambda k: _cast_scalar(k, int)),
        "N": (False, 50, lambda k: _cast_scalar(k, int)),
        "eps": (False, 2.5, lambda k: _cast_scalar(k, float)),
        "substeps": (False, 1, lambda k: _cast_optional(k, int)),
    },
    "eps_sweep": {
        "instance": (True, None, lambda k: _cast_scalar(k, str)),
        "eps_list": (True, None, _cast_float_list),
        "fbound": (False, None, lambda k: _cast_optional(k, float)),
        "N": (False, 50, lambda k: _cast_scalar(k, int)),
    },
    "compare": {
        "instance": (True, None, lambda k: _cast_scalar(k, str)),
        "method": (False, "convex", lambda k: _cast_choice(k, ("convex", "direct"))),
        "T_list": (False, [5.0, 10.0, 20.0, 40.0], _cast_float_list),
        "eps": (False, 2.5, lambda k: _cast_scalar(k, float)),
        "fbound": (False, None, lambda k: _cast_optional(k, float)),
        "N": (False, 50, lambda k: _cast_scalar(k, int)),
        "substeps": (False, None, lambda k: _cast_optional(k, int)),
    },
}


def _validate_study_params(kind: str, raw: dict) -> dict:
    schema = STUDY_SCHEMAS[kind]
    params = {}
    for key in raw:
        if key != "kind" and key not in schema:
            raise ValueError(f"study manifest: unknown key {key!r} for kind {kind!r}")
    for key, (required, default, make_cast) in schema.items():
        if key in raw:
            params[key] = make_cast(key)(raw[key])
        elif required:
            raise ValueError(f"study manifest: missing required key {key!r} "
                             f"for kind {kind!r}")
        else:
            params[key] = default
    return params


def _study_params_from_args(kind: str, args) -> dict:
    eps_list = args.eps or []
    t_list = args.T or []
    raw: dict = {}
    if kind == "perturb":
        raw = {"n": args.n, "instances": args.instances,
               "perturbations": args.perturbations, "restriction": args.restriction,
               "seed": args.seed, "N": args.N, "fbound": args.fbound,
               "normalization": args.normalization, "bins": args.bins}
        if t_list:
            raw["T"] = t_list[0]
        if eps_list:
            raw["eps"] = eps_list[0]
        if args.substeps is not None:
            raw["substeps"] = args.substeps
    elif kind == "mine":
        raw = {"n": args.n, "pool": args.pool, "keep": args.keep,
               "seed": args.seed, "N": args.N}
        if t_list:
            raw["T"] = t_list[0]
        if eps_list:
            raw["eps"] = eps_list[0]
        if args.substeps is not None:
            raw["substeps"] = args.substeps
    elif kind == "eps_sweep":
        raw = {"instance": args.instance, "eps_list": eps_list or None,
               "fbound": args.fbound, "N": args.N}
        if raw["instance"] is None:
            raise ValueError("study manifest: missing required key 'instance' "
                             "for kind 'eps_sweep'")
        if not eps_list:
            raise ValueError("study manifest: missing required key 'eps_list' "
                             "for kind 'eps_sweep' (repeat --eps)")
    elif kind == "compare":
        raw = {"instance": args.instance, "method": args.method,
               "fbound": args.fbound, "N": args.N}
        if raw["instance"] is None:
            raise ValueError("study manifest: missing required key 'instance' "
                             "for kind 'compare'")
        if t_list:
            raw["T_list"] = t_list
        if eps_list:
            raw["eps"] = eps_list[0]
        if args.substeps is not None:
            raw["substeps"] = args.substeps
    raw = {k: v for k, v in raw.items() if v is not None}
    return _validate_study_params(kind, raw)


def _resolve_study(args) -> tuple[str, dict]:
    if args.manifest:
        with open(args.manifest) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"study manifest {args.manifest}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValueError(f"study manifest {args.manifest}: expected a JSON object")
        raw = data.get("parameters", data)
        if not isinstance(raw, dict):
            raise ValueError("study manifest: key 'parameters' must be an object")
        kind = raw.get("kind", args.kind)
        if kind is None:
            raise ValueError("study manifest: missing required key 'kind' "
                             "(or pass --kind)")
        if kind not in STUDY_KINDS:
            raise ValueError(f"study manifest: key 'kind' must be one of "
                             f"{STUDY_KINDS}, got {kind!r}")
        if args.kind is not None and args.kind != kind:
            raise ValueError(f"study manifest: key 'kind' is {kind!r} but "
                             f"--kind says {args.kind!r}")
        return kind, _validate_study_params(kind, raw)
    if args.kind is None:
        raise ValueError("study: --kind is required when no --manifest is given")
    return args.kind, _study_params_from_args(args.kind, args)


def _float_csv(path: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    atomic_write_text(path, buf.getvalue())


def _histogram(values, bins: int):
    lo, hi = float(np.min(values)), float(np.max(values))
    if lo == hi:  # degenerate spread: one unit-wide bin centered on the value
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(np.asarray(values, dtype=np.float64), bins=edges)
    rows = [[format_sig(edges[b], 12), format_sig(edges[b + 1], 12), int(counts[b])]
            for b in range(bins)]
    return [float(e) for e in edges], rows


def _run_study_perturb(params: dict, out_dir: str, threads: int, t0: float) -> None:
    records, summary = run_perturbation_study(
        n=params["n"], n_instances=params["instances"],
        n_perturbations=params["perturbations"], restriction=params["restriction"],
        T=params["T"], seed=params["seed"], N=params["N"],
        f_bound=params["fbound"], slew=params["eps"],
        substeps_per_interval=params["substeps"],
        normalization=params["normalization"], threads=threads)
    rec_path = os.path.join(out_dir, "records.csv")
    _float_csv(rec_path,
               ["instance_index", "instance_seed", "perturbation_index",
                "perturbation_seed", "restriction", "T", "omega", "delta_p",
                "baseline_min_gap", "perturbed_min_gap", "baseline_p_succ",
                "perturbed_p_succ"],
               ([r.instance_index, r.instance_seed, r.perturbation_index,
                 r.perturbation_seed, r.restriction, format_sig(r.T, 12),
                 format_sig(r.omega, 12), format_sig(r.delta_p, 12),
                 format_sig(r.baseline_min_gap, 12), format_sig(r.perturbed_min_gap, 12),
                 format_sig(r.baseline_p_succ, 12), format_sig(r.perturbed_p_succ, 12)]
                for r in records))
    sum_path = os.path.join(out_dir, "summary.json")
    _write_json(sum_path, summary.to_dict())
    omega_edges, omega_rows = _histogram([r.omega for r in records], params["bins"])
    dp_edges, dp_rows = _histogram([r.delta_p for r in records], params["bins"])
    hist_o = os.path.join(out_dir, "hist_omega.csv")
    hist_d = os.path.join(out_dir, "hist_delta_p.csv")
    _float_csv(hist_o, ["bin_lo", "bin_hi", "count"], omega_rows)
    _float_csv(hist_d, ["bin_lo", "bin_hi", "count"], dp_rows)
    _write_manifest(os.path.join(out_dir, "manifest.json"), "study",
                    {"kind": "perturb", **params}, [params["seed"]], [],
                    [rec_path, sum_path, hist_o, hist_d], t0,
                    extra={"histograms": {"omega_edges": omega_edges,
                                          "delta_p_edges": dp_edges}})
    print(f"{params['restriction']}: mean omega {summary.mean_omega:+.6f}, "
          f"mean delta_p {summary.mean_delta_p:+.6f}, "
          f"{summary.n_succ_increase}/{summary.n_instances} instances improved "
          f"({summary.n_resampled} resamples)")


def _run_study_mine(params: dict, out_dir: str, threads: int, t0: float) -> None:
    kept, pool = mine_hard_instances(
        n=params["n"], pool_size=params["pool"], T=params["T"], keep=params["keep"],
        seed=params["seed"], N=params["N"], slew=params["eps"],
        substeps_per_interval=params["substeps"], threads=threads, with_pool=True)
    header = ["pool_index", "seed", "p_succ", "min_gap", "s_min"]

    def rows(recs):
        return ([r.pool_index, r.seed, format_sig(r.p_succ, 12),
                 format_sig(r.min_gap, 12), format_sig(r.s_min, 12)] for r in recs)

    kept_path = os.path.join(out_dir, "kept.csv")
    pool_path = os.path.join(out_dir, "pool.csv")
    _float_csv(kept_path, header, rows(kept))
    _float_csv(pool_path, header, rows(pool))
    sum_path = os.path.join(out_dir, "summary.json")
    summary = {
        "n": params["n"], "pool": params["pool"], "keep": params["keep"],
        "T": params["T"],
        "median_s_min_kept": float(np.median([r.s_min for r in kept])),
        "median_s_min_pool": float(np.median([r.s_min for r in pool])),
        "median_p_succ_pool": float(np.median([r.p_succ for r in pool])),
        "hardest_seed": int(kept[0].seed),
        "hardest_p_succ": float(kept[0].p_succ),
    }
    _write_json(sum_path, summary)
    _write_manifest(os.path.join(out_dir, "manifest.json"), "study",
                    {"kind": "mine", **params}, [params["seed"]], [],
                    [kept_path, pool_path, sum_path], t0)
    print(f"kept {len(kept)}/{params['pool']}; hardest: seed {kept[0].seed}, "
          f"p_succ {format_sig(kept[0].p_succ)}, min gap {format_sig(kept[0].min_gap)} "
          f"at s={format_sig(kept[0].s_min)}; median s_min "
          f"{summary['median_s_min_kept']:.3f} kept vs {summary['median_s_min_pool']:.3f} pool")


def _run_study_eps_sweep(params: dict, out_dir: str, threads: int, t0: float) -> None:
    inst = read_instance(params["instance"])
    rows = epsilon_sweep(inst, params["eps_list"], f_bound=params["fbound"],
                         N=params["N"], threads=threads)
    sweep_path = os.path.join(out_dir, "sweep.csv")
    _float_csv(sweep_path, ["eps", "min_gap"],
               ([format_sig(eps, 12), format_sig(gap, 12)] for eps, gap in rows))
    _write_manifest(os.path.join(out_dir, "manifest.json"), "study",
                    {"kind": "eps_sweep", **params}, [inst.seed],
                    [params["instance"]], [sweep_path], t0)
    for eps, gap in rows:
        print(f"eps={format_sig(eps)}: interior min gap {format_sig(gap)}")


def _run_study_compare(params: dict, out_dir: str, threads: int, t0: float) -> None:
    inst = read_instance(params["instance"])
    comparison = compare_spo(inst, params["T_list"], method=params["method"],
                             N=params["N"], f_bound=params["fbound"],
                             slew=params["eps"],
                             substeps_per_interval=params["substeps"],
                             threads=threads)
    cmp_path = os.path.join(out_dir, "compare.csv")
    _float_csv(cmp_path, ["T", "p_succ_linear", "p_succ_spo"],
               ([format_sig(T, 12), format_sig(a, 12), format_sig(b, 12)]
                for T, a, b in comparison.rows))
    sched_path = os.path.join(out_dir, "schedule.csv")
    write_schedule_csv(comparison.schedule, sched_path)
    gaps_path = os.path.join(out_dir, "gaps.json")
    _write_json(gaps_path, {
        "method": comparison.method,
        "min_gap_linear": float(comparison.min_gap_linear),
        "i_min_linear": int(comparison.i_min_linear),
        "min_gap_optimized": float(comparison.min_gap_optimized),
        "i_min_optimized": int(comparison.i_min_optimized),
    })
    _write_manifest(os.path.join(out_dir, "manifest.json"), "study",
                    {"kind": "compare", **params}, [inst.seed],
                    [params["instance"]], [cmp_path, sched_path, gaps_path], t0)
    for T, p_lin, p_opt in comparison.rows:
        print(f"T={format_sig(T)}: linear {format_sig(p_lin)} -> "
              f"{params['method']} {format_sig(p_opt)}")


def cmd_study(args) -> int:
    t0 = time.perf_counter()
    kind, params = _resolve_study(args)
    os.makedirs(args.out, exist_ok=True)
    runner = {"perturb": _run_study_perturb, "mine": _run_study_mine,
              "eps_sweep": _run_study_eps_sweep, "compare": _run_study_compare}[kind]
    runner(params, args.out, args.threads, t0)
    return 0


def _add_common(p: argparse.ArgumentParser, *, instance: bool = False,
                schedule: bool = False) -> None:
    if instance:
        p.add_argument("--instance", required=True, help="instance JSON path")
    if schedule:
        p.add_argument("--schedule", default=None,
                       help="schedule CSV path (default: linear schedule)")
    p.add_argument("--eps", type=float, default=2.5,
                   help="slew-rate budget per unit s (default 2.5)")
    p.add_argument("--fbound", type=float, default=None,
                   help="amplitude bound (default: max |h|, |J| of the instance)")
    p.add_argument("--N", type=int, default=50, help="grid intervals (default 50)")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    p.add_argument("--out", required=True, help="output path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="spo",
        description="Adiabatic schedule path optimization for QUBO annealing")
    ap.add_argument("--version", action="version", version=f"spo {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate random instance files")
    p.add_argument("--n", type=int, required=True, help="qubit count")
    p.add_argument("--count", type=int, default=1, help="number of instances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True,
                   help="output .json path (count=1) or directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("gap", help="spectral profile along a schedule")
    _add_common(p, instance=True, schedule=True)
    p.add_argument("--k", type=int, default=6, help="eigenlevels per grid point")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("optimize", help="maximize the interior min gap")
    _add_common(p, instance=True)
    p.add_argument("--method", choices=("direct", "convex"), default="convex")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--p", type=int, default=5, help="excited-subspace rank (convex)")
    p.add_argument("--eta", type=float, default=None,
                   help="trust-region radius (default 0.1 * fbound)")
    p.add_argument("--xi", type=float, default=1e-4, help="stopping tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evolve", help="simulate the anneal, report success probability")
    _add_common(p, instance=True, schedule=True)
    p.add_argument("--T", type=float, action="append",
                   help="total anneal time; repeat for a sweep (default 10)")
    p.add_argument("--substeps", type=int, default=None,
                   help="fixed substeps per interval (default: norm-adaptive)")
    p.add_argument("--check-doubling", action="store_true", dest="check_doubling",
                   help="re-run each T with doubled substeps and report the "
                        "p_succ shift (self-convergence check)")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser(
        "study",
        help="ensemble studies: perturb | mine | eps_sweep | compare")
    p.add_argument("--kind", choices=STUDY_KINDS, default=None,
                   help="study kind (may come from --manifest instead)")
    p.add_argument("--manifest", default=None,
                   help="JSON parameter map or a previously written study "
                        "manifest; replaying one reproduces its outputs")
    p.add_argument("--n", type=int, default=None, help="qubit count")
    p.add_argument("--instance", default=None, help="instance JSON path "
                   "(eps_sweep/compare kinds)")
    p.add_argument("--instances", type=int, default=50,
                   help="ensemble size (perturb)")
    p.add_argument("--perturbations", type=int, default=200,
                   help="perturbations per instance (perturb)")
    p.add_argument("--restriction", choices=RESTRICTIONS, default="unrestricted")
    p.add_argument("--pool", type=int, default=2000, help="pool size (mine)")
    p.add_argument("--keep", type=int, default=30, help="instances to keep (mine)")
    p.add_argument("--method", choices=("convex", "direct"), default="convex")
    p.add_argument("--T", type=float, action="append",
                   help="anneal time; repeat for compare sweeps")
    p.add_argument("--eps", type=float, action="append",
                   help="slew budget; repeat (ascending) for eps_sweep")
    p.add_argument("--fbound", type=float, default=None)
    p.add_argument("--N", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalization", choices=("norm_sq", "norm"), default="norm_sq")
    p.add_argument("--substeps", type=int, default=None)
    p.add_argument("--bins", type=int, default=40,
                   help="histogram bins for perturb outputs")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_study)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InstanceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SpoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
