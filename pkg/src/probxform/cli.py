"""Command-line driver: parse, check, transform, sample, chain, ess and the
experiment recipes.

Exit codes: 0 success, 2 validation (parse/type/arguments), 3 transformation
error, 4 runtime or sampling error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .disintegrate import density, disintegrate, observe
from .errors import (
    DegenerateChain, EvalError, ParseError, ProbxformError, TransformError, TypeCheckError,
    ValidationError,
)
from .expect import expect
from .ir import Expr, Lam, Var, fresh
from .mcmc import gibbs, mh
from .normalize import condition, normalize
from .sampler import Chain, ess, evaluate, make_rng, run_chain, sample_many, value_to_json
from .simplify import RewriteTrace, simplify
from .syntax import parse, pretty
from .typecheck import MeasureT, PairT, infer_free

EXIT_OK, EXIT_VALIDATION, EXIT_TRANSFORM, EXIT_RUNTIME = 0, 2, 3, 4

PASSES = ("observe", "disintegrate", "density", "expect", "normalize", "condition", "mh",
          "gibbs", "simplify")


class UsageError(ValidationError):
    pass


class PassError(ProbxformError):
    """A pass failed; carries the pass index and the underlying error."""

    def __init__(self, index: int, name: str, err: ProbxformError):
        self.index, self.name, self.err = index, name, err
        super().__init__(f"pass {index} ({name}): {err}")


@dataclass
class PipelineSpec:
    input: str
    passes: list = field(default_factory=list)
    output: str | None = None
    proposal: str | None = None
    integrand: str | None = None
    at: str | None = None
    trace: str | None = None
    dump_dir: str | None = None
    seed: int = 0
    n: int = 0
    env: dict = field(default_factory=dict)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def _load(path_or_text: str) -> Expr:
    """A program from a file, or inline source if no such file exists."""
    p = Path(path_or_text)
    if path_or_text == "-" or p.is_file():
        return parse(_read(path_or_text))
    return parse(path_or_text)


def _parse_env(items: list[str] | None) -> dict:
    env = {}
    for item in items or []:
        for part in item.split(","):
            if not part.strip():
                continue
            if "=" not in part:
                raise UsageError(f"bad --env binding {part!r}; expected name=value")
            k, v = part.split("=", 1)
            env[k.strip()] = evaluate(parse(v))
    return env


# -- pipeline -----------------------------------------------------------------

def _measure_type(e: Expr):
    t, _ = infer_free(e)
    return t


def _check_input(name: str, e: Expr) -> None:
    """Reject pass inputs of the wrong shape before running anything."""
    t = _measure_type(e)
    needs_measure = name != "simplify"
    if needs_measure and not isinstance(t, MeasureT):
        raise TypeCheckError(f"{name} needs a measure, got {t}")
    if name in ("disintegrate", "condition") and not isinstance(t.of, PairT):
        raise TypeCheckError(f"{name} needs a measure over pairs, got {t}")


def apply_pass(name: str, e: Expr, spec: PipelineSpec, trace: RewriteTrace | None = None,
               context: Expr | None = None) -> Expr:
    if name == "simplify":
        return simplify(e, trace=trace, context=context)
    if name == "disintegrate":
        return disintegrate(e)
    if name == "condition":
        return condition(e)
    if name == "normalize":
        return normalize(e)
    if name == "gibbs":
        return gibbs(e).expr
    if name == "mh":
        if spec.proposal is None:
            raise UsageError("mh needs --proposal FILE")
        return mh(_load(spec.proposal), e).expr
    if name == "observe":
        if spec.at is None:
            raise UsageError("observe needs --point EXPR")
        return observe(e, parse(spec.at))
    if name == "density":
        if spec.at is not None:
            return density(e, parse(spec.at))
        t = fresh("t")
        return Lam(t, density(e, Var(t)))
    if name == "expect":
        if spec.integrand is None:
            raise UsageError("expect needs --integrand FILE-or-EXPR")
        return expect(e, _load(spec.integrand))
    raise UsageError(f"unknown pass {name!r}; choose from {', '.join(PASSES)}")


def run_pipeline(spec: PipelineSpec) -> tuple[Expr, RewriteTrace | None]:
    for name in spec.passes:
        if name not in PASSES:
            raise UsageError(f"unknown pass {name!r}; choose from {', '.join(PASSES)}")
    e = _load(spec.input)
    original = e
    _measure_type(e)
    trace = RewriteTrace() if spec.trace else None
    for i, name in enumerate(spec.passes):
        try:
            _check_input(name, e)
            e = apply_pass(name, e, spec, trace, context=original)
        except UsageError:
            raise
        except ProbxformError as err:
            raise PassError(i, name, err) from err
        if spec.dump_dir:
            d = Path(spec.dump_dir)
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{i:02d}-{name}.ppt").write_text(pretty(e) + "\n")
    return e, trace


# -- commands -----------------------------------------------------------------

def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_parse(args) -> int:
    _emit(pretty(_load(args.file)) + "\n", args.output)
    return EXIT_OK


def cmd_check(args) -> int:
    e = _load(args.file)
    t, env = infer_free(e)
    if args.json:
        print(json.dumps({"type": str(t), "free": {k.text: str(v) for k, v in env.items()}}))
    else:
        print(t)
    return EXIT_OK


def cmd_transform(args) -> int:
    passes = [p.strip() for chunk in args.passes for p in chunk.split(",") if p.strip()]
    spec = PipelineSpec(args.file, passes, args.output, args.proposal, args.integrand, args.at,
                        args.trace, args.dump_dir)
    e, trace = run_pipeline(spec)
    _emit(pretty(e) + "\n", args.output)
    if trace is not None:
        text = trace.to_json()
        if args.trace == "-":
            sys.stderr.write(text + "\n")
        else:
            Path(args.trace).write_text(text + "\n")
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be positive")
    m = _load(args.file)
    env = _parse_env(args.env)
    out = []
    for v, w in sample_many(m, args.n, env, make_rng(args.seed)):
        out.append(json.dumps({"value": value_to_json(v), "weight": float(w)}))
    _emit("\n".join(out) + "\n", args.output)
    return EXIT_OK


def cmd_chain(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be positive")
    kernel = _load(args.kernel)
    env = _parse_env(args.env)
    init = evaluate(parse(args.init), env)
    ch: Chain = run_chain(kernel, init, args.n, env=env, kind=args.kind, seed=args.seed)
    _emit("\n".join(ch.jsonl()) + "\n", args.output)
    return EXIT_OK


def _field(v, path: str):
    for step in (p for p in path.split(".") if p != ""):
        v = v[int(step)]
    return float(v)


def cmd_ess(args) -> int:
    xs = []
    for line in _read(args.file).splitlines():
        if line.strip():
            xs.append(_field(json.loads(line)["value"], args.field))
    val = ess(xs)
    if args.json:
        print(json.dumps({"ess": val, "n": len(xs), "ess_per_sample": val / len(xs)}))
    else:
        print(f"ess {val:.1f} of {len(xs)} ({val / len(xs):.3f} per sample)")
    return EXIT_OK


def cmd_experiment(args) -> int:
    from . import experiments as X
    if args.which == "kalman":
        obs = tuple(float(v) for v in args.obs.split(","))
        if len(obs) != 2:
            raise UsageError("--obs needs two comma-separated numbers")
        rep = X.experiment_kalman(args.seed, args.n, obs).to_json()
        if not args.json:
            print(f"posterior means  noiseT {rep['means']['noiseT']:.4f} (se {rep['std_errors']['noiseT']:.4f})"
                  f"  noiseE {rep['means']['noiseE']:.4f} (se {rep['std_errors']['noiseE']:.4f})")
            print(f"ESS per sample   noiseT {rep['ess_per_sample']['noiseT']:.3f}"
                  f"  noiseE {rep['ess_per_sample']['noiseE']:.3f}")
            print(f"accept rate      {rep['accept_rate']:.3f}")
    else:
        rep = X.experiment_gmm(args.seed, args.n_points, args.sweeps).to_json()
        if not args.json:
            for i, a in enumerate(rep["accuracy"], 1):
                print(f"sweep {i}: accuracy {a:.3f}")
    if args.json:
        print(json.dumps(rep))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="probxform", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and pretty-print a program")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("check", help="print the type of a program")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("transform", help="apply a pipeline of passes")
    p.add_argument("file")
    p.add_argument("--pass", dest="passes", action="append", default=[],
                   help=f"comma-separated passes from: {', '.join(PASSES)}")
    p.add_argument("--proposal", help="proposal kernel for mh")
    p.add_argument("--integrand", help="integrand Lam for expect (file or inline)")
    p.add_argument("--point", "--at", dest="at", help="point for observe or density (inline expression)")
    p.add_argument("--trace", help="write the simplify rewrite trace as JSON ('-' for stderr)")
    p.add_argument("--dump-dir", help="write each intermediate program here")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_transform)

    p = sub.add_parser("sample", help="draw weighted samples as JSON lines")
    p.add_argument("file")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--env", action="append", help="name=value bindings")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("chain", help="run a transition kernel")
    p.add_argument("--kernel", required=True)
    p.add_argument("--init", required=True, help="initial state (inline expression)")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=("mh", "gibbs"), default="mh")
    p.add_argument("--env", action="append")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_chain)

    p = sub.add_parser("ess", help="effective sample size of a JSONL chain")
    p.add_argument("file")
    p.add_argument("--field", default="", help="dotted path into the value, e.g. 0.1")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_ess)

    p = sub.add_parser("experiment", help="run an experiment recipe")
    p.add_argument("which", choices=("kalman", "gmm"))
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n", type=int, default=20000, help="chain length (kalman)")
    p.add_argument("--obs", default="0,1", help="observation m1,m2 (kalman)")
    p.add_argument("--n-points", type=int, default=30, help="data points (gmm)")
    p.add_argument("--sweeps", type=int, default=5, help="Gibbs sweeps (gmm)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_experiment)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except PassError as err:
        code = EXIT_TRANSFORM if isinstance(err.err, TransformError) else \
            EXIT_VALIDATION if isinstance(err.err, (ParseError, TypeCheckError)) else EXIT_RUNTIME
        print(f"error: {err}", file=sys.stderr)
        return code
    except (ParseError, TypeCheckError, ValidationError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except TransformError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_TRANSFORM
    except (EvalError, DegenerateChain, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except ProbxformError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
