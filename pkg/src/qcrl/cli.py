"""Command line: optimize, traverse, sweep, qeed and interp verbs.

Exit codes: 0 success, 1 config or input error, 2 optimizer best effort
(target not met), 3 traversal aborted, 4 unsupported model for the verb,
5 requested angle out of range.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from .errors import OutOfRange, QCRLError, TraversalAborted, Unsupported
from .gradients import evaluate, s1_fn, s2_fn, theta as theta_fn, undesired as undesired_fn
from .levelset import (ConstraintSet, CorrectionConfig, TraversalConfig, TraversalRecord, amplitude_bounds,
                       interpolate, optimize_beginning, ripv_run, theta_from_span)
from .models import DEFAULT_GATE_TIME, PRESET_AXES, build_preset, initial_pulse
from .pulses import basis_from_dict, max_amplitude
from .robustness import (NoiseDistribution, NoiseLaw, default_delta_grid, integral_robustness,
                         qeed_curve, susceptibility_report, sweep_infidelity)
from .dynamics import DEFAULT_NT, propagate
from .schema import BEGINNING_SCHEMA, CONFIG_SCHEMA, RECORD_SCHEMA

log = logging.getLogger("qcrl")

EXIT_OK, EXIT_CONFIG, EXIT_BEST_EFFORT, EXIT_ABORTED, EXIT_UNSUPPORTED, EXIT_RANGE = range(6)
DEFAULT_SELECT_EVERY = 100


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _field_path(err: jsonschema.ValidationError) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    validate(cfg, CONFIG_SCHEMA, "config")
    return cfg


def validate(obj, schema, what: str) -> None:
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(schema).iter_errors(obj))
    if err is not None:
        raise ConfigError(f"{what} error at {_field_path(err)}: {err.message}")


def build_model(cfg: dict):
    m = cfg["model"]
    T = float(m.get("gate_time", DEFAULT_GATE_TIME))
    basis = None
    if "basis" in m:
        spec = dict(m["basis"])
        spec["gate_time"] = T
        try:
            basis = basis_from_dict(spec)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config error at $.model.basis: {exc}") from None
    return build_preset(m["preset"], basis, T)


def _resolve_seed(cfg: dict, args) -> int | None:
    return args.seed if args.seed is not None else cfg.get("seed")


def _nt(cfg: dict, args) -> int:
    return int(args.nt or cfg.get("nt", DEFAULT_NT))


def _out_dir(cfg: dict, args) -> Path:
    out = Path(args.out or cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _section(cfg: dict, name: str) -> dict:
    if name not in cfg:
        raise ConfigError(f"config error at $.{name}: section required for this verb")
    return cfg[name]


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_records(path, records) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_records(path) -> list[TraversalRecord]:
    out = []
    try:
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    d = json.loads(line)
                    validate(d, RECORD_SCHEMA, f"record {len(out)}")
                    out.append(TraversalRecord.from_dict(d))
    except OSError as exc:
        raise ConfigError(f"cannot read records {path}: {exc}") from None
    if not out:
        raise ConfigError(f"no records in {path}")
    return out


def _check_params(model, A, what):
    if A.size != model.n_params:
        raise ConfigError(f"{what}: {A.size} parameters, model expects {model.n_params}")


def cmd_optimize(cfg: dict, args) -> int:
    sec = cfg.get("optimize", {})
    model = build_model(cfg)
    nt = _nt(cfg, args)
    seed = _resolve_seed(cfg, args)
    if "A_init" in sec:
        A0 = np.concatenate([np.asarray(a, dtype=float) for a in sec["A_init"]])
        _check_params(model, A0, "$.optimize.A_init")
    else:
        if seed is None:
            raise ConfigError("config error at $.seed: a seed is required for a random initial pulse")
        A0 = initial_pulse(model, np.random.default_rng(seed), sec.get("area", 2 * np.pi),
                           sec.get("init_scale", 0.05))
    sigma, und_axes = PRESET_AXES[cfg["model"]["preset"]]
    bound = sec.get("amplitude_bound")
    res = optimize_beginning(
        model, A0, tuple(sec.get("weights", (1.0, 0.0))), S1_target=sec.get("S1_target", 2.5),
        max_iters=sec.get("max_iters", 5000), nt=nt, undesired_axes=und_axes,
        undesired_weight=sec.get("undesired_weight", 1.0), S2_target=sec.get("S2_target"),
        method=sec.get("method", "gd"), bounds=amplitude_bounds(model, bound) if bound else None)
    report = susceptibility_report(model, res.A, nt)
    th = float(evaluate([theta_fn(sigma)], model, res.A, nt)[0])
    out = {
        "model": cfg["model"],
        "A": [list(map(float, a)) for a in model.split(res.A)],
        "theta": th,
        "S1": {a.label: a.S1 for a in report.axes},
        "S2": {a.label: a.S2 for a in report.axes},
        "success": bool(res.success),
        "iterations": int(res.iterations),
        "seed": seed,
        "norm_kind": report.norm_kind,
    }
    path = _out_dir(cfg, args) / "beginning.json"
    _write_json(path, out)
    log.info("wrote %s (S1 = %.6g, success = %s)", path, res.S1, res.success)
    return EXIT_OK if res.success else EXIT_BEST_EFFORT


def _load_beginning(path, model):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read beginning pulse {path}: {exc}") from None
    validate(d, BEGINNING_SCHEMA, "beginning pulse")
    A = np.concatenate([np.asarray(a, dtype=float) for a in d["A"]])
    _check_params(model, A, "beginning pulse")
    return A


def _constraints(model, preset: str, sec: dict) -> ConstraintSet:
    flags = {"s1": True, "s2": False, "undesired": True}
    flags.update(sec.get("constraints", {}))
    fns = []
    if flags["s1"]:
        fns += [s1_fn(n.operator, f"s1_{n.label}") for n in model.noises]
    if flags["s2"]:
        fns += [s2_fn(n.operator, f"s2_{n.label}") for n in model.noises]
    if flags["undesired"]:
        fns += [undesired_fn(s, f"vartheta_{i}") for i, s in enumerate(PRESET_AXES[preset][1])]
    return ConstraintSet(fns, None)


def cmd_traverse(cfg: dict, args) -> int:
    sec = _section(cfg, "traverse")
    model = build_model(cfg)
    nt = _nt(cfg, args)
    preset = cfg["model"]["preset"]
    A0 = _load_beginning(sec["beginning"], model)
    sigma, _ = PRESET_AXES[preset]
    cs = _constraints(model, preset, sec)
    dtheta = float(sec["dtheta"])
    if "theta_range" in sec:
        rng = tuple(sec["theta_range"])
    else:
        th0 = float(evaluate([theta_fn(sigma)], model, A0, nt)[0])
        rng = theta_from_span(th0, float(sec.get("span", 0.0)), dtheta)
    corr = sec.get("correction")
    tc = TraversalConfig(dtheta, rng, max_iters=sec.get("max_iters", 100_000),
                         eps_irr=sec.get("eps_irr", 1e-6), step_tol=sec.get("step_tol"),
                         correction=CorrectionConfig(**corr) if corr else None)
    out = _out_dir(cfg, args)
    status, error, last = "complete", None, None
    code = EXIT_OK
    try:
        records = ripv_run(model, A0, sigma, cs, tc, nt)
    except TraversalAborted as exc:
        records = exc.records or []
        status, error, last = "aborted", f"{type(exc).__name__}: {exc}", exc.index
        code = EXIT_ABORTED
        log.error("traversal aborted: %s (last good record %s)", exc, last)
    write_records(out / "records.jsonl", records)
    cons = []
    for i, fn in enumerate(cs.functionals):
        vals = [r.constraint_values[i] for r in records] or [float("nan")]
        cons.append({"label": fn.label, "target": float(cs.targets[i]) if cs.targets is not None else None,
                     "min": float(min(vals)), "max": float(max(vals))})
    thetas = [r.theta for r in records] or [float("nan")]
    _write_json(out / "summary.json", {
        "n_records": len(records), "status": status, "error": error, "last_good_index": last,
        "theta_min": float(min(thetas)), "theta_max": float(max(thetas)), "constraints": cons,
    })
    return code


def _select(records, every: int):
    sel = records[::every]
    if records[-1] is not sel[-1]:
        sel.append(records[-1])
    return sel


def cmd_sweep(cfg: dict, args) -> int:
    sec = _section(cfg, "sweep")
    model = build_model(cfg)
    nt = _nt(cfg, args)
    records = read_records(sec["records"])
    every = args.select_every or sec.get("select_every", DEFAULT_SELECT_EVERY)
    if "delta_rel" in sec:
        grid = np.sort(np.asarray(sec["delta_rel"], dtype=float))
    else:
        grid = default_delta_grid(**sec.get("grid", {}))
    labels = [n.label for n in model.noises]
    wanted = sec.get("noises", labels)
    for w in wanted:
        if w not in labels:
            raise ConfigError(f"config error at $.sweep.noises: unknown noise {w!r}; model has {labels}")
    sel = _select(records, every)

    def job(rec):
        A = rec.flat_A
        om = max(max_amplitude(c.basis, a) for c, a in zip(model.controls, model.split(A)))
        rows = []
        for w in wanted:
            inf = sweep_infidelity(model, A, grid, nt, labels.index(w), om)
            rows += [(rec.index, rec.theta, w, om, d, v) for d, v in zip(grid, inf)]
        return rows

    with ThreadPoolExecutor(max_workers=os.cpu_count() or 1) as ex:
        results = list(ex.map(job, sel))
    out = _out_dir(cfg, args)
    with open(out / "sweep.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "theta", "noise", "omega_m", "delta_rel", "infidelity"])
        for rows in results:
            for idx, th, w, om, d, v in rows:
                wr.writerow([idx, _fmt(th), w, _fmt(om), _fmt(d), _fmt(v)])

    if "noise" in cfg:
        seed = _resolve_seed(cfg, args)
        if seed is None:
            raise ConfigError("config error at $.seed: a seed is required for Monte-Carlo robustness")
        laws = tuple(NoiseLaw(l["kind"], l.get("value", 0.0)) for l in cfg["noise"]["laws"])
        dist = NoiseDistribution(laws, cfg["noise"].get("n_samples", 1000), seed)
        with open(out / "integral.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["index", "theta", "mean_fidelity", "stderr"])
            for rec in sel:
                ir = integral_robustness(model, rec.flat_A, dist, nt, detailed=True)
                wr.writerow([rec.index, _fmt(rec.theta), _fmt(ir.mean), _fmt(ir.stderr)])
    return EXIT_OK


def cmd_qeed(cfg: dict, args) -> int:
    sec = _section(cfg, "qeed")
    model = build_model(cfg)
    if model.dim != 2:
        raise Unsupported(f"error curves need a two-level model, {cfg['model']['preset']} has d = {model.dim}")
    nt = _nt(cfg, args)
    records = read_records(sec["records"])
    every = args.select_every or sec.get("select_every", DEFAULT_SELECT_EVERY)
    labels = [n.label for n in model.noises]
    label = sec.get("noise", labels[0])
    if label not in labels:
        raise ConfigError(f"config error at $.qeed.noise: unknown noise {label!r}; model has {labels}")
    H_n0 = model.noise_operator(label)
    out = _out_dir(cfg, args)
    sub = out / "qeed"
    sub.mkdir(exist_ok=True)
    entries = []
    for rec in _select(records, every):
        name = f"qeed_{rec.index:06d}.csv"
        qeed_curve(propagate(model, rec.flat_A, nt), H_n0).to_csv(sub / name)
        entries.append({"index": rec.index, "theta": rec.theta, "file": f"qeed/{name}"})
    _write_json(out / "qeed_manifest.json", {"noise": label, "entries": entries})
    return EXIT_OK


def cmd_interp(cfg: dict, args) -> int:
    sec = _section(cfg, "interp")
    model = build_model(cfg)
    nt = _nt(cfg, args)
    records = read_records(sec["records"])
    th = float(sec["theta"])
    parts = interpolate(records, th)
    A = np.concatenate(parts)
    sigma, _ = PRESET_AXES[cfg["model"]["preset"]]
    # nearest record fixes the logarithm branch
    near = min(records, key=lambda r: abs(r.theta - th))
    hint = None
    if not model.is_single_commuting():
        from .gradients import evaluate_bundle
        hint = evaluate_bundle([theta_fn(sigma)], model, near.flat_A, nt, derivatives=False).eta
    extracted = float(evaluate([theta_fn(sigma)], model, A, nt, hint=hint)[0])
    _write_json(_out_dir(cfg, args) / "interp.json", {
        "theta": th, "A": [list(map(float, a)) for a in parts], "theta_extracted": extracted})
    return EXIT_OK


COMMANDS = {
    "optimize": cmd_optimize,
    "traverse": cmd_traverse,
    "sweep": cmd_sweep,
    "qeed": cmd_qeed,
    "interp": cmd_interp,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcrl", description="Robust pulse families by level-set traversal.")
    p.add_argument("verb", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--out", help="output directory (overrides config 'out')")
    p.add_argument("--seed", type=int, help="random seed (overrides config 'seed')")
    p.add_argument("--nt", type=int, help="time steps (overrides config 'nt')")
    p.add_argument("--select-every", type=int, dest="select_every",
                   help="keep every k-th record for sweep/qeed")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("QCRL_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.nt is not None and args.nt < 16:
        print("error: --nt must be >= 16", file=sys.stderr)
        return EXIT_CONFIG
    if args.select_every is not None and args.select_every < 1:
        print("error: --select-every must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.verb](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Unsupported as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except OutOfRange as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except QCRLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
