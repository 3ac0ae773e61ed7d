"""Command-line interface.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .bloch import STANDARD_SIX, SixFrame, TetraFrame, outcome_probabilities, rotation_matrix, six_state_probabilities
from .clicks import make_rng, sample_clicks, trial_seed
from .errors import ConfigError
from .estimation import AUTO, FORCE_BOUNDARY, ml_estimate_four, ml_estimate_six
from .harness import EXPERIMENTS, ExperimentConfig, draw_state, format_value, parse_state, run_experiment
from .network import circuit_json
from .pair import (
    TwoQubitState,
    orientation_dyadic,
    q_from_json,
    q_to_json,
    reconstruct_two_qubit,
    sample_joint,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _frame(args, six=False):
    if args.rotation is None:
        return STANDARD_SIX if six else TetraFrame()
    R = np.asarray(args.rotation, dtype=float).reshape(3, 3)
    return SixFrame(R) if six else TetraFrame(R)


def _state_arg(values):
    """``--state`` takes three numbers or one named spec."""
    if len(values) == 3:
        return [float(v) for v in values]
    if len(values) == 1:
        return values[0]
    raise ValueError("--state takes three numbers or one name")


def _emit(args, payload, rows=None, columns=None):
    """Write ``payload`` as JSON, or ``rows`` as CSV, to ``--out`` or stdout."""
    if args.format == "csv" and rows is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(r[c]) for c in columns])
        text = buf.getvalue()
    else:
        text = json.dumps(payload, indent=1) + "\n"
    if args.out and args.out != "-":
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_probabilities(args):
    state = np.asarray(args.state, dtype=float)
    if args.six:
        p = six_state_probabilities(state, _frame(args, six=True))
    else:
        p = outcome_probabilities(state, _frame(args))
    rows = [{"outcome": j, "probability": float(x)} for j, x in enumerate(p)]
    _emit(args, {"probabilities": [float(x) for x in p]}, rows, ("outcome", "probability"))


def cmd_estimate(args):
    if len(args.counts) == 6:
        est = ml_estimate_six(args.counts, _frame(args, six=True))
    elif len(args.counts) == 4:
        est = ml_estimate_four(args.counts, _frame(args), args.mode)
    else:
        raise ValueError("--counts takes four (tetrahedron) or six (three-axis) values")
    d = est.to_json()
    row = {"Sx": d["S"][0], "Sy": d["S"][1], "Sz": d["S"][2], "mu": d["mu"], "branch": d["branch"], "loglik": d["loglik"]}
    _emit(args, d, [row], tuple(row))


def cmd_simulate(args):
    parsed = parse_state(_state_arg(args.state))
    frame = _frame(args)
    rows = []
    for t in range(args.trials):
        sd = trial_seed(args.seed, t)
        rng = make_rng(sd)
        s = draw_state(parsed, rng)
        counts = sample_clicks(s, frame, args.N, rng, seed=sd)
        est = ml_estimate_four(counts, frame, args.mode)
        rows.append(
            {
                "trial": t,
                "seed": sd,
                "N": args.N,
                "n1": counts.n[0],
                "n2": counts.n[1],
                "n3": counts.n[2],
                "n4": counts.n[3],
                "Sx": float(est.S[0]),
                "Sy": float(est.S[1]),
                "Sz": float(est.S[2]),
                "branch": est.branch,
                "sq_dist": float(np.sum((est.S - s) ** 2)),
            }
        )
    columns = ("trial", "seed", "N", "n1", "n2", "n3", "n4", "Sx", "Sy", "Sz", "branch", "sq_dist")
    _emit(args, {"rng": "PCG64", "trials": rows}, rows, columns)


def _run_config(args, cfg_dict):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    result = run_experiment(cfg)
    sys.stdout.write(json.dumps({"trials": result["trials"], "summary": result["summary"]}) + "\n")


def cmd_adaptive(args):
    strategy = {"kind": args.strategy, "alignment": args.alignment}
    if args.misalignment:
        strategy["misalignment_deg"] = args.misalignment
    cfg = {
        "experiment": "custom",
        "N": args.N,
        "trials": args.trials,
        "seed": args.seed,
        "state": _state_arg(args.state),
        "strategy": strategy,
        "mode": args.mode,
        "out": args.out or ".",
        "format": args.format,
        "workers": args.workers,
    }
    _run_config(args, cfg)


def cmd_pair(args):
    if args.action == "reconstruct":
        if args.q is None:
            raise ValueError("pair reconstruct needs --q with 16 values")
        state, positive = reconstruct_two_qubit(q_from_json(args.q))
        payload = {"t": state.t.tolist(), "rho": state.to_json(), "positive": positive}
        rows = [{"index": i, "re": z[0], "im": z[1]} for i, z in enumerate(state.to_json())]
        _emit(args, payload, rows, ("index", "re", "im"))
    else:
        R = rotation_matrix(args.axis, args.angle)
        frame_b = TetraFrame(R)
        counts = sample_joint(TwoQubitState.singlet(), TetraFrame(), frame_b, args.pairs, make_rng(args.seed))
        q = counts / counts.sum()
        O = orientation_dyadic(q)
        payload = {
            "q": q_to_json(q),
            "orientation": O.tolist(),
            "true_rotation": R.tolist(),
            "frobenius_error": float(np.linalg.norm(O - R)),
        }
        rows = [{"index": i, "q": v} for i, v in enumerate(q_to_json(q))]
        _emit(args, payload, rows, ("index", "q"))


def cmd_circuit(args):
    doc = circuit_json()
    rows = [
        {
            "step": i,
            "kind": g["kind"],
            "phi": g.get("phi", ""),
            "target": g.get("target", ",".join(g.get("targets", []))),
            "control": g.get("control", ""),
        }
        for i, g in enumerate(doc["gates"])
    ]
    _emit(args, doc, rows, ("step", "kind", "phi", "target", "control"))


def cmd_figure(args):
    if args.config:
        with open(args.config) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError({"<file>": f"invalid JSON: {exc}"}) from exc
        if not isinstance(data, dict):
            raise ConfigError({"<root>": "config must be a JSON object"})
    else:
        data = {}
    data.setdefault("experiment", args.name)
    if data["experiment"] != args.name:
        raise ConfigError({"experiment": f"config says {data['experiment']!r} but the verb asked for {args.name!r}"})
    for key in ("trials", "N", "workers"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    data.setdefault("seed", args.seed)
    data.setdefault("out", args.out or ".")
    data.setdefault("format", args.format)
    _run_config(args, data)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed; trial t uses seed + t")
    common.add_argument("--out", default=None, help="output file (single-result verbs) or directory (experiments)")
    common.add_argument("--format", choices=("csv", "json"), default="json")

    parser = argparse.ArgumentParser(prog="tetratomo", description="Four-outcome qubit tomography toolkit")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("probabilities", parents=[common], help="detection probabilities for a state")
    p.add_argument("--state", type=float, nargs=3, required=True)
    p.add_argument("--rotation", type=float, nargs=9, help="frame rotation matrix, row-major")
    p.add_argument("--six", action="store_true", help="three-axis (six-outcome) device")
    p.set_defaults(func=cmd_probabilities)

    p = sub.add_parser("estimate", parents=[common], help="ML estimate from click counts")
    p.add_argument("--counts", type=int, nargs="+", required=True)
    p.add_argument("--mode", choices=(AUTO, FORCE_BOUNDARY), default=AUTO)
    p.add_argument("--rotation", type=float, nargs=9)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", parents=[common], help="simulate click counts and estimates")
    p.add_argument("--state", nargs="+", default=["random-pure"])
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--mode", choices=(AUTO, FORCE_BOUNDARY), default=AUTO)
    p.add_argument("--rotation", type=float, nargs=9)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("adaptive", parents=[common], help="run a measurement strategy")
    p.add_argument("--strategy", choices=("static", "premeasure", "selflearn"), default="static")
    p.add_argument("--alignment", choices=("parallel", "antiparallel", "random"), default="parallel")
    p.add_argument("--state", nargs="+", default=["random-pure"])
    p.add_argument("--N", type=int, nargs="+", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--mode", choices=(AUTO, FORCE_BOUNDARY), default=FORCE_BOUNDARY)
    p.add_argument("--misalignment", type=float, default=0.0, help="degrees (static only)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_adaptive)

    p = sub.add_parser("pair", parents=[common], help="two-qubit reconstruction and frame calibration")
    p.add_argument("action", choices=("reconstruct", "calibrate"))
    p.add_argument("--q", type=float, nargs=16, help="joint probabilities, row-major")
    p.add_argument("--pairs", type=int, default=10**6)
    p.add_argument("--axis", type=float, nargs=3, default=[0.0, 0.0, 1.0])
    p.add_argument("--angle", type=float, default=0.3, help="radians")
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("circuit", parents=[common], help="dump the gate network")
    p.set_defaults(func=cmd_circuit)

    p = sub.add_parser("figure", parents=[common], help="regenerate figure data")
    p.add_argument("name", choices=[e for e in EXPERIMENTS if e != "custom"])
    p.add_argument("--config", help="JSON file mirroring the experiment config")
    p.add_argument("--trials", type=int)
    p.add_argument("--N", type=int, nargs="+")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_figure)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_INPUT
    except ArithmeticError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (ValueError, TypeError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
