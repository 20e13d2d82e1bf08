"""Command-line front end: ``qrwalk <group> <command> ...``.

Exit codes: 0 success, 1 a checked criterion failed, 2 malformed input,
3 a precondition of the requested computation does not hold.

Relative ``--out`` paths are placed under ``$QRWALK_OUTPUT_DIR`` when it is
set.  Every CSV report starts with ``# schema=v1`` and ``# seed=...``; the
timestamp line is dropped with ``--no-timestamp`` so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import inspect
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as _rng
from . import serialization as ser
from .channel import (
    ConsistencyError,
    OverlapError,
    channel_from_unitary,
    channels_equal,
    random_classical_unitary,
)
from .limit import (
    DEFAULT_HS,
    ALIASES,
    PRESETS,
    DriverSynthesisError,
    estimate_limit_tensors,
    model_for,
    preset,
    synthesize_driver,
    verify_brackets,
    weak_convergence_study,
)
from .numerics import DimensionError
from .obtuse import ObtuseError, ObtuseRV, obtuse_from_probabilities, validate_obtuse
from .tensor3 import tensor_from_rv, verify_double_symmetry
from .walk import (
    channel_power,
    full_tensor_evolution,
    monte_carlo_channel,
    simulate_walk,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_PRECONDITION = 0, 1, 2, 3
OUTPUT_ENV = "QRWALK_OUTPUT_DIR"
RESIDUAL_TOL = 1e-9


class Precondition(Exception):
    """Maps to exit code 3."""


# -- helpers -----------------------------------------------------------------------


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if not path.is_absolute() and os.environ.get(OUTPUT_ENV):
        path = Path(os.environ[OUTPUT_ENV]) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _family_params(args) -> dict:
    keys = {"p": "p", "tau": "tau", "dim_sys": "dim_sys", "op_seed": "seed", "o_scale": "o_scale",
            "q_scale": "q_scale", "scale": "scale"}
    return {dst: getattr(args, src) for src, dst in keys.items() if getattr(args, src, None) is not None}


def _make_family(name: str, params: dict):
    key = ALIASES.get(name, name)
    if key not in PRESETS:
        raise ser.FormatError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS) + sorted(ALIASES))}")
    accepted = inspect.signature(PRESETS[key]).parameters
    unknown = sorted(set(params) - set(accepted))
    if unknown:
        raise ser.FormatError(f"preset {key} does not take {', '.join(unknown)}")
    return preset(key, **params)


def _family_from_arg(arg: str, args):
    """A preset name, or a JSON file ``{"preset": ..., "params": {...}}``; flags override file params."""
    if arg in PRESETS or arg in ALIASES:
        return _make_family(arg, _family_params(args))
    doc = ser.load_json(arg)
    if not isinstance(doc, dict) or "preset" not in doc:
        raise ser.FormatError("family JSON needs a 'preset' field")
    params = dict(doc.get("params", {}))
    params.update(_family_params(args))
    return _make_family(doc["preset"], params)


def _classical_unitary(args):
    if getattr(args, "random", False):
        if args.dim_sys is None or args.dim_env is None:
            raise ser.FormatError("--random needs --dim-sys and --dim-env")
        return random_classical_unitary(args.dim_sys, args.dim_env, _rng.instance_rng(args.seed))
    if args.preset:
        return _make_family(args.preset, _family_params(args))(args.h)
    if not args.file:
        raise ser.FormatError("give an input FILE, --preset NAME or --random")
    return ser.classical_unitary_from_json(ser.load_json(args.file))


def _parse_probs(text: str) -> np.ndarray:
    try:
        return np.array([float(Fraction(x.strip())) for x in text.split(",") if x.strip()])
    except (ValueError, ZeroDivisionError) as exc:
        raise ser.FormatError(f"cannot parse probabilities {text!r}: {exc}") from None


def _parse_hs(text: str | None, default) -> np.ndarray:
    if text is None:
        return np.asarray(default, dtype=float)
    try:
        return np.array([float(Fraction(x.strip())) for x in text.split(",") if x.strip()])
    except ValueError as exc:
        raise ser.FormatError(f"cannot parse step sizes {text!r}: {exc}") from None


def _channel_doc(path: str):
    doc = ser.load_json(path)
    if isinstance(doc, dict) and "branches" in doc:
        u = ser.classical_unitary_from_json(doc)
        omega = np.zeros((u.dim_env, u.dim_env))
        omega[0, 0] = 1.0
        return channel_from_unitary(u.u_total, omega, u.dim_sys, u.dim_env)
    return ser.channel_from_json(doc)


# -- obtuse / tensor3 --------------------------------------------------------------


def cmd_obtuse_validate(args) -> int:
    vectors = ser.obtuse_from_json(ser.load_json(args.file))
    try:
        system = validate_obtuse(vectors, tol=args.tol)
    except ObtuseError as exc:
        print(f"not obtuse: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(ser.dumps(ser.obtuse_to_json(system)), args.out)
    return EXIT_OK


def cmd_obtuse_from_probs(args) -> int:
    try:
        system = obtuse_from_probabilities(_parse_probs(args.probs))
    except ObtuseError as exc:
        raise ser.FormatError(str(exc)) from None
    _emit(ser.dumps(ser.obtuse_to_json(system)), args.out)
    return EXIT_OK


def cmd_tensor_from_rv(args) -> int:
    system = validate_obtuse(ser.obtuse_from_json(ser.load_json(args.file)))
    _emit(ser.dumps(ser.tensor_to_json(tensor_from_rv(ObtuseRV(system)), tol=args.drop)), args.out)
    return EXIT_OK


def cmd_tensor_check(args) -> int:
    report = verify_double_symmetry(ser.tensor_from_json(ser.load_json(args.file)), tol=args.tol)
    print(report)
    return EXIT_OK if report.passed else EXIT_FAIL


# -- channel -----------------------------------------------------------------------


def cmd_channel_decompose(args) -> int:
    u = _classical_unitary(args)
    dec = u.decomposition
    doc = {
        "probabilities": [float(p) for p in dec.probabilities],
        "values": [ser.enc_vector(v) for v in dec.rv.values],
        "A": ser.enc_matrix(dec.a),
        "B": [ser.enc_matrix(b) for b in dec.b],
        "reconstruction_residual": dec.residual,
        "trace_formula_residual": dec.trace_residual,
        "branch_residual": dec.branch_residual,
    }
    _emit(ser.dumps(doc), args.out)
    return EXIT_OK if dec.residual <= RESIDUAL_TOL else EXIT_FAIL


def cmd_channel_from_branches(args) -> int:
    _emit(ser.dumps(ser.classical_unitary_to_json(_classical_unitary(args))), args.out)
    return EXIT_OK


def cmd_channel_check_equal(args) -> int:
    a, b = _channel_doc(args.a), _channel_doc(args.b)
    if a.dim != b.dim:
        raise ser.FormatError(f"channels act on different dimensions ({a.dim} vs {b.dim})")
    equal = channels_equal(a, b, args.tol)
    print("equal" if equal else "different")
    return EXIT_OK if equal else EXIT_FAIL


# -- walk --------------------------------------------------------------------------


def cmd_walk_simulate(args) -> int:
    if args.steps < 0 or args.trials < 1:
        raise ser.FormatError("--steps must be >= 0 and --trials >= 1")
    u = _classical_unitary(args)
    d = u.dim_sys
    rare = int(np.argmin(u.probabilities))
    meta = {"steps": args.steps, "trials": args.trials, "rare_outcome": rare + 1}
    if u.dim_env > 1 and args.steps > 0:
        firsts = []
        for t in range(args.trials):
            tr_out = simulate_walk(u, args.steps, args.seed, trial=t, keep_path=False, verify=False).outcome_indices
            hit = np.flatnonzero(tr_out == rare)
            firsts.append(str(hit[0] + 1) if hit.size else "none")
        meta["first_rare_step"] = ";".join(firsts)
    entries = [f"v{a + 1}{b + 1}_{part}" for a in range(d) for b in range(d) for part in ("re", "im")]
    rep = ser.CsvReport(["trial", "step", "outcome"] + entries, args.seed, not args.no_timestamp, meta)
    for t in range(args.trials):
        traj = simulate_walk(u, args.steps, args.seed, trial=t, keep_path=not args.terminal_only)
        rows = range(args.steps + 1) if not args.terminal_only else [args.steps]
        for k, v in zip(rows, traj.unitaries):
            outcome = int(traj.outcome_indices[k - 1]) + 1 if k > 0 else ""
            flat = [x for z in v.ravel() for x in (float(z.real), float(z.imag))]
            rep.row([t, k, outcome] + flat)
    _emit(rep.text(), args.out)
    if args.verify_oracle:
        if args.steps > 3:
            raise Precondition("--verify-oracle needs --steps <= 3")
        rho = np.zeros((d, d), dtype=complex)
        rho[0, 0] = 1.0
        exact = channel_power(u, rho, args.steps)
        tensor = full_tensor_evolution(u, args.steps, rho)
        mc, se = monte_carlo_channel(u, rho, args.steps, max(args.trials, 1000), args.seed, args.jobs)
        gap_tensor = float(np.linalg.norm(tensor - exact))
        gap_mc = float(np.linalg.norm(mc - exact))
        se_f = float(np.sqrt(np.sum(se**2)))
        ok = gap_tensor <= 1e-10 and gap_mc <= 4 * se_f + 1e-12
        print(f"oracle: |tensor - L^n|={gap_tensor:.3e}, |monte carlo - L^n|={gap_mc:.3e} (4 se={4 * se_f:.3e}) "
              f"{'ok' if ok else 'MISMATCH'}", file=sys.stderr)
        if not ok:
            return EXIT_FAIL
    return EXIT_OK


# -- limit -------------------------------------------------------------------------


def _tensors_doc(m) -> dict:
    n = m.n
    return {
        "probe_hs": [float(h) for h in m.probe_hs],
        "M0": ser.enc_matrix(m.m0),
        "Mk": [ser.enc_matrix(m.mk[:, :, k]) for k in range(n)],
        "error_M0": [[float(x) for x in row] for row in m.error_m0],
        "error_Mk": [[[float(x) for x in m.error_mk[i, j]] for j in range(n)] for i in range(n)],
        "flagged": bool(m.any_flagged),
    }


def cmd_limit_tensors(args) -> int:
    fam = _family_from_arg(args.family, args)
    m = estimate_limit_tensors(fam, _parse_hs(args.hs, DEFAULT_HS))
    _emit(ser.dumps(_tensors_doc(m)), args.out)
    return EXIT_FAIL if m.any_flagged else EXIT_OK


def _model(args, fam):
    if args.model:
        return ser.model_from_json(ser.load_json(args.model))
    return model_for(fam)


def cmd_limit_model(args) -> int:
    fam = _family_from_arg(args.family, args)
    _emit(ser.dumps(ser.model_to_json(_model(args, fam))), args.out)
    return EXIT_OK


def cmd_limit_brackets(args) -> int:
    fam = _family_from_arg(args.family, args)
    m = estimate_limit_tensors(fam)
    driver = synthesize_driver(m)
    report = verify_brackets(driver, m, args.t, args.dt, args.trials, args.seed)
    print(f"driver: {driver.kind}, {driver.n_brownian} Brownian, {driver.n_poisson} Poisson")
    print(report)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_limit_converge(args) -> int:
    fam = _family_from_arg(args.family, args)
    model = _model(args, fam)
    if model.dim_sys != fam(0.01).dim_sys:
        raise ser.FormatError("model and family act on different system dimensions")
    hs = _parse_hs(args.hs, (4e-2, 1e-2, 2.5e-3))
    report = weak_convergence_study(
        fam, model, args.t, hs, args.trials, seed=args.seed, sde_dt=args.sde_dt, jobs=args.jobs, ks_h=args.ks_h
    )
    meta = {"family": fam.name, "t": args.t, "trials": args.trials, "sde_dt": args.sde_dt}
    rep = ser.CsvReport(["h", "observable", "discrete_mean", "sde_mean", "abs_error", "stderr"], args.seed,
                        not args.no_timestamp, meta)
    for r in report.rows:
        rep.row([r.h, r.observable, r.discrete_mean, r.sde_mean, r.abs_error, r.stderr])
    for h, e, s in zip(report.hs, report.errors, report.sigmas):
        rep.row([float(h), "max-entry-error", "", "", float(e), float(s)])
    if report.ks is not None:
        rep.row([report.ks.h, "ks-first-jump", "", "", report.ks.statistic, ""])
    _emit(rep.text(), args.out)
    orders = ", ".join(f"{o:.2f}" for o in report.orders)
    print(f"errors {', '.join(f'{e:.4g}' for e in report.errors)}; empirical orders {orders}; "
          f"trend {'ok' if report.trend_ok else 'NOT met'}", file=sys.stderr)
    if report.ks is not None:
        print(f"first-jump KS distance at h={report.ks.h:g}: {report.ks.statistic:.4f}", file=sys.stderr)
    return EXIT_OK if report.trend_ok else EXIT_FAIL


# -- parser ------------------------------------------------------------------------


def _add_instance_flags(p: argparse.ArgumentParser, random_ok: bool = True) -> None:
    p.add_argument("file", nargs="?", help="classical unitary JSON (branches)")
    p.add_argument("--preset", help=f"named family: {', '.join(sorted(PRESETS) + sorted(ALIASES))}")
    p.add_argument("--h", type=float, default=0.01, help="step size for --preset (default 0.01)")
    if random_ok:
        p.add_argument("--random", action="store_true", help="Haar-random instance")
        p.add_argument("--dim-env", type=int)
    _add_family_flags(p)


def _add_family_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=float, help="branch probability (dim2-diffusive)")
    p.add_argument("--tau", type=float, help="phase (dim2-diffusive)")
    p.add_argument("--dim-sys", type=int)
    p.add_argument("--op-seed", type=int, help="seed of the preset's operators")
    p.add_argument("--o-scale", type=float)
    p.add_argument("--q-scale", type=float)
    p.add_argument("--scale", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrwalk",
        description="Repeated quantum interactions as random walks on the unitary group. "
        "The environment reference state is the first basis vector; for another pure state, "
        "rotate the environment basis before building the branches.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads for Monte Carlo batches")
    groups = parser.add_subparsers(dest="group", required=True)

    def out_flag(p):
        p.add_argument("--out", help=f"output file (relative paths go under ${OUTPUT_ENV})")

    ob = groups.add_parser("obtuse", help="obtuse systems").add_subparsers(dest="cmd", required=True)
    p = ob.add_parser("validate", help="check a system and print its probabilities")
    p.add_argument("file")
    p.add_argument("--tol", type=float, default=1e-10)
    out_flag(p)
    p.set_defaults(func=cmd_obtuse_validate)
    p = ob.add_parser("from-probs", help="canonical system for a law, e.g. 1/2,1/3,1/6")
    p.add_argument("probs")
    out_flag(p)
    p.set_defaults(func=cmd_obtuse_from_probs)

    te = groups.add_parser("tensor3", help="3-tensors of obtuse random variables").add_subparsers(dest="cmd", required=True)
    p = te.add_parser("from-rv", help="tensor of an obtuse system JSON")
    p.add_argument("file")
    p.add_argument("--drop", type=float, default=0.0, help="omit coefficients with modulus <= DROP")
    out_flag(p)
    p.set_defaults(func=cmd_tensor_from_rv)
    p = te.add_parser("check", help="verify the symmetry families")
    p.add_argument("file")
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_tensor_check)

    ch = groups.add_parser("channel", help="classical unitaries and channels").add_subparsers(dest="cmd", required=True)
    p = ch.add_parser("decompose", help="p, v, A, B_j and reconstruction residual")
    _add_instance_flags(p)
    p.add_argument("--seed", type=int, default=0, help="seed for --random")
    out_flag(p)
    p.set_defaults(func=cmd_channel_decompose)
    p = ch.add_parser("from-branches", help="assemble a classical unitary from {'branches': [...]}")
    _add_instance_flags(p)
    p.add_argument("--seed", type=int, default=0, help="seed for --random")
    out_flag(p)
    p.set_defaults(func=cmd_channel_from_branches)
    p = ch.add_parser("check-equal", help="compare two channels (Krauss or classical unitary JSON)")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_channel_check_equal)

    wk = groups.add_parser("walk", help="discrete random walk").add_subparsers(dest="cmd", required=True)
    p = wk.add_parser("simulate", help="trajectories as CSV")
    _add_instance_flags(p)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--terminal-only", action="store_true", help="one row per trial with V_n")
    p.add_argument("--verify-oracle", action="store_true", help="cross-check against exact evolutions (steps <= 3)")
    p.add_argument("--no-timestamp", action="store_true")
    out_flag(p)
    p.set_defaults(func=cmd_walk_simulate)

    li = groups.add_parser("limit", help="continuous-time limit").add_subparsers(dest="cmd", required=True)
    p = li.add_parser("tensors", help="extrapolated limit tensors")
    p.add_argument("family", help="preset name or family JSON")
    p.add_argument("--hs", help="comma-separated decreasing step sizes")
    _add_family_flags(p)
    out_flag(p)
    p.set_defaults(func=cmd_limit_tensors)
    p = li.add_parser("model", help="limit SDE model JSON for a family")
    p.add_argument("family")
    p.add_argument("--model", help=argparse.SUPPRESS)
    _add_family_flags(p)
    out_flag(p)
    p.set_defaults(func=cmd_limit_model)
    p = li.add_parser("brackets", help="synthesise the driver and verify its brackets")
    p.add_argument("family")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    _add_family_flags(p)
    p.set_defaults(func=cmd_limit_brackets)
    p = li.add_parser("converge", help="weak-convergence report as CSV")
    p.add_argument("family")
    p.add_argument("model", nargs="?", help="SDE model JSON (default: closed form with synthesised driver)")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--hs", help="comma-separated decreasing step sizes (default 0.04,0.01,0.0025)")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--sde-dt", type=float, default=2.5e-4)
    p.add_argument("--ks-h", type=float, help="step size for the first-jump KS row (Poisson families)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-timestamp", action="store_true")
    _add_family_flags(p)
    out_flag(p)
    p.set_defaults(func=cmd_limit_converge)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except BrokenPipeError:  # output piped into e.g. head
        return EXIT_OK
    except (OverlapError, DriverSynthesisError, Precondition) as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ConsistencyError as exc:
        print(f"internal consistency check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ser.FormatError, ObtuseError, DimensionError, OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
