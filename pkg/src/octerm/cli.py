"""octerm: termination values of one-counter stochastic games.

Every command prints one JSON document (or a text rendering with
--format text).  Exit status: 0 success, 1 invalid model or flags,
2 internal error or exceeded cap.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .errors import DEFAULT_ENUM_CAP, DEFAULT_SEGMENT_CAP, OctermError
from .model import BUILTIN_TEXT, Config, ModelError, OcSsg, builtin_example, parse_ocssg, parse_rational, validate
from .oracle import DEFAULT_TABLE_CAP
from .report import SCHEMA_VERSION, dumps, rational


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _epsilon(text: str) -> Fraction:
    try:
        eps = parse_rational(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    if not 0 < eps < 1:
        raise argparse.ArgumentTypeError("epsilon must lie strictly between 0 and 1")
    return eps


def _nonneg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("expected a non-negative integer")
    return value


def _positive(text: str) -> int:
    value = _nonneg(text)
    if value == 0:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = Parser(prog="octerm", description="Approximate termination values of one-counter stochastic games.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    def add(name, help, model=True):
        sp = sub.add_parser(name, help=help)
        if model:
            sp.add_argument("--model", required=True, help="model file, or builtin:NAME")
        sp.add_argument("--format", choices=("json", "text"), default="json")
        return sp

    def caps(sp):
        sp.add_argument("--enum-cap", type=_positive, default=DEFAULT_ENUM_CAP,
                        help="maximal number of counterless strategies enumerated (default 2^20)")

    def start(sp):
        sp.add_argument("--state", required=True)
        sp.add_argument("--counter", type=_nonneg, required=True)

    def pipeline(sp):
        sp.add_argument("--no-prune", action="store_true", help="keep unreachable states of the rising construction")
        sp.add_argument("--rising", choices=("auto", "always", "never"), default="auto",
                        help="when to apply the rising construction (default: only if an idling strategy exists)")

    def segment(sp):
        sp.add_argument("--segment-cap", type=_positive, default=DEFAULT_SEGMENT_CAP,
                        help=f"maximal number of states of the segment game (default {DEFAULT_SEGMENT_CAP})")

    add("check", "validate a model")
    sp = add("qualitative", "LimInf values, value-1 set and counterless strategies")
    caps(sp)
    sp = add("bound", "tail certificate and counter bound N")
    sp.add_argument("--epsilon", type=_epsilon, required=True)
    sp.add_argument("--dump-rising", metavar="PATH", help="write the rising model (if built) in model format")
    caps(sp)
    pipeline(sp)
    sp = add("approx", "epsilon-approximation of the termination value")
    start(sp)
    sp.add_argument("--epsilon", type=_epsilon, required=True)
    sp.add_argument("--values", choices=("none", "state", "all"), default="state",
                    help="which rows of the value table to include (default: the start state)")
    sp.add_argument("--timings", action="store_true", help="include wall-clock timings (not reproducible)")
    caps(sp)
    pipeline(sp)
    segment(sp)
    sp = add("oracle", "exact finite-horizon lower/upper bounds")
    start(sp)
    sp.add_argument("--horizon", type=_nonneg, required=True)
    sp.add_argument("--table-cap", type=_positive, default=DEFAULT_TABLE_CAP)
    sp = add("simulate", "Monte-Carlo termination frequency under the pipeline's strategies")
    start(sp)
    sp.add_argument("--horizon", type=_nonneg, required=True)
    sp.add_argument("--runs", type=_positive, required=True)
    sp.add_argument("--seed", type=_nonneg, required=True)
    sp.add_argument("--epsilon", type=_epsilon, default=Fraction(1, 100),
                    help="epsilon of the strategies computed when --strategy is absent (default 1/100)")
    sp.add_argument("--strategy", metavar="REPORT", help="approx report JSON whose sigma_bar/pi_bar are replayed")
    caps(sp)
    pipeline(sp)
    segment(sp)
    sp = add("example", "print a built-in model", model=False)
    sp.add_argument("--name", required=True, choices=sorted(BUILTIN_TEXT))
    return p


def load_model(spec: str) -> OcSsg:
    if spec.startswith("builtin:"):
        try:
            return builtin_example(spec[len("builtin:"):])
        except KeyError as exc:
            raise UsageError(exc.args[0])
    try:
        text = Path(spec).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read model: {exc}")
    return parse_ocssg(text)


def _state(model: OcSsg, name: str) -> int:
    if name not in model.index:
        raise UsageError(f"unknown state {name!r}")
    return model.index[name]


def _doc(kind: str, body: dict) -> dict:
    return {"schema": f"octerm/{kind}/{SCHEMA_VERSION}", **body}


# ---------------------------------------------------------------------------
# commands


def cmd_check(args):
    try:
        model = load_model(args.model)
        diags = validate(model)
    except ModelError as exc:
        diags = exc.diagnostics
    doc = _doc("check", {"valid": not diags, "diagnostics": [d.to_json() for d in diags]})
    text = "ok\n" if not diags else "".join(f"error [{d.code}] {d}\n" for d in diags)
    return doc, text, 0 if not diags else 1


def cmd_qualitative(args):
    from .qualitative import liminf_values_ssg

    model = load_model(args.model)
    res = liminf_values_ssg(model, args.enum_cap)
    doc = _doc("qualitative", res.to_json(model))
    lines = [f"{'state':<12} {'nu':>12}  in T"]
    for q in range(model.n_states):
        lines.append(f"{model.name(q):<12} {rational(res.nu[q]):>12}  {'yes' if q in res.T else ''}")
    return doc, "\n".join(lines) + "\n", 0


def cmd_bound(args):
    from .approx import termination_tail_bound
    from .qualitative import liminf_values_ssg

    model = load_model(args.model)
    lim = liminf_values_ssg(model, args.enum_cap)
    tail = termination_tail_bound(
        model, lim.pi_star, args.epsilon, cap=args.enum_cap, prune=not args.no_prune, rising=args.rising, T=lim.T,
    )
    if args.dump_rising:
        if tail.rising is None:
            raise UsageError("no rising model was built (use --rising always to force one)")
        Path(args.dump_rising).write_text(tail.rising.dump(tail.collapsed), encoding="utf-8")
    body = {
        "epsilon": rational(args.epsilon),
        "N": tail.N,
        "route": tail.route,
        "lp_states": None if tail.lp_model is None else tail.lp_model.n_states,
        "certificate": None if tail.certificate is None else tail.certificate.to_json(),
    }
    if tail.certificate is None:
        text = "every state has value 1; N = 0\n"
    else:
        c = tail.certificate
        cj = c.to_json()
        text = (
            f"route      {tail.route}\nx_bar      {rational(c.x_bar)}\nz_span     {rational(c.z_span)}\n"
            f"c          [{cj['c'][0][:20]}, {cj['c'][1][:20]}]\nh          {c.h}\nN          {tail.N}\n"
        )
    return _doc("bound", body), text, 0


def cmd_approx(args):
    from .approx import approximate_termination

    model = load_model(args.model)
    start = Config(_state(model, args.state), args.counter)
    rep = approximate_termination(
        model, start, args.epsilon, cap=args.enum_cap, prune=not args.no_prune, rising=args.rising,
        segment_cap=args.segment_cap,
    )
    doc = rep.to_json(model, values=args.values, timings=args.timings)
    text = (
        f"value({args.state}, {args.counter}) = {rational(rep.value)}  (~{float(rep.value):.6f}, eps {rational(rep.epsilon)})\n"
        f"N = {rep.N}, route {rep.route}\n"
    )
    return doc, text, 0


def cmd_oracle(args):
    from .oracle import finite_horizon_bounds

    model = load_model(args.model)
    start = Config(_state(model, args.state), args.counter)
    bp = finite_horizon_bounds(model, start, args.horizon, args.table_cap)
    body = {"state": args.state, "counter": args.counter, "horizon": args.horizon, **bp.to_json()}
    text = f"{float(bp.lower):.12f} <= v({args.state}, {args.counter}) <= {float(bp.upper):.12f}\n"
    return _doc("oracle", body), text, 0


def cmd_simulate(args):
    from .approx import approximate_termination, strategy_from_json
    from .oracle import simulate

    model = load_model(args.model)
    start = Config(_state(model, args.state), args.counter)
    if args.strategy:
        try:
            report = json.loads(Path(args.strategy).read_text(encoding="utf-8"))
            sigma = strategy_from_json(report["sigma_bar"], model)
            pi = strategy_from_json(report["pi_bar"], model) if report.get("pi_bar") else None
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot load strategies from {args.strategy}: {exc}")
    else:
        rep = approximate_termination(
            model, start, args.epsilon, cap=args.enum_cap, prune=not args.no_prune, rising=args.rising,
            segment_cap=args.segment_cap,
        )
        sigma, pi = rep.sigma_bar, rep.pi_bar
    sim = simulate(model, sigma, pi, start, args.horizon, args.runs, args.seed)
    body = {"state": args.state, "counter": args.counter, **sim.to_json()}
    text = f"{sim.terminated}/{sim.runs} runs terminated (frequency {float(sim.frequency):.6f} +- {sim.stderr:.6f})\n"
    return _doc("simulate", body), text, 0


def cmd_example(args):
    text = builtin_example(args.name).to_text()
    return None, text, 0


COMMANDS = {
    "check": cmd_check,
    "qualitative": cmd_qualitative,
    "bound": cmd_bound,
    "approx": cmd_approx,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "example": cmd_example,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        doc, text, code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"octerm: error: {exc}", file=stderr)
        return 1
    except ModelError as exc:
        for d in exc.diagnostics:
            print(f"octerm: invalid model: {d}", file=stderr)
        return 1
    except (OctermError, ArithmeticError, RecursionError, MemoryError) as exc:
        print(f"octerm: {exc}", file=stderr)
        return 2
    except ValueError as exc:
        print(f"octerm: error: {exc}", file=stderr)
        return 1
    if doc is None or args.format == "text":
        stdout.write(text)
    else:
        stdout.write(dumps(doc))
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
