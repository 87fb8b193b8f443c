import json
import shutil
import subprocess
import sys

import pytest

from conftest import CORPUS, GOLDENS, equivalent
from probxform.cli import EXIT_OK, EXIT_RUNTIME, EXIT_TRANSFORM, EXIT_VALIDATION, main
from probxform.ir import Var, alpha_equal, free_vars, substitute
from probxform.simplify import simplify
from probxform.syntax import parse
from probxform.typecheck import typecheck

KALMAN = "src/probxform/programs/kalman.ppt"
PROPOSAL = "src/probxform/programs/proposal.ppt"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_empty_pipeline_is_byte_stable(capsys, tmp_path, path):
    code, first, _ = run(capsys, "transform", str(path))
    assert code == EXIT_OK
    f = tmp_path / "again.ppt"
    f.write_text(first)
    code, second, _ = run(capsys, "transform", str(f))
    assert code == EXIT_OK and first == second


def test_kalman_pipeline(capsys, kalman_progs):
    code, out, _ = run(capsys, "transform", KALMAN, "--pass", "disintegrate,simplify")
    assert code == EXIT_OK
    assert alpha_equal(parse(out), kalman_progs.kalman3)
    assert alpha_equal(parse(out), simplify(parse((GOLDENS / "kalman2.ppt").read_text())))


def test_kalman3_body_to_kernel(capsys, tmp_path, kalman_progs):
    body = tmp_path / "k3body.ppt"
    body.write_text(str(kalman_progs.kalman3.body))
    code, out, _ = run(capsys, "transform", str(body), "--pass", "mh", "--pass", "simplify",
                       "--proposal", PROPOSAL)
    assert code == EXIT_OK
    k = parse(out)
    (obs,) = free_vars(k)
    k5 = kalman_progs.kalman5
    assert equivalent(substitute(k, obs, Var(k5.var)), k5.body, context=kalman_progs.model)


def test_observe_and_density_points(capsys):
    code, out, _ = run(capsys, "transform", "x <~ Uniform(0, 2); Uniform(x, 3)",
                       "--pass", "observe", "--point", "y")
    assert code == EXIT_OK
    assert alpha_equal(parse(out), parse("x <~ Uniform(0, 2); Weight(If(x<y<3, 1/(3-x), 0), y)"))
    code, out, _ = run(capsys, "transform", "x <~ Uniform(0, 2); y <~ Uniform(x, 3); Dirac((x, y))",
                       "--pass", "density", "--at", "(x, y)")
    assert alpha_equal(parse(out), parse("If(0<x<2, If(x<y<3, 1/(3-x), 0)/(2-0), 0)"))


def test_expect_pass(capsys):
    code, out, _ = run(capsys, "transform", "x <~ Uniform(0, 2); Uniform(x, 3)",
                       "--pass", "expect", "--integrand", "Lam(y, y)")
    assert code == EXIT_OK
    assert alpha_equal(parse(out), parse("Int(0, 2, x, Int(x, 3, y, y)/(3-x))/(2-0)"))


def test_dump_dir_and_trace(capsys, tmp_path):
    dump, trace = tmp_path / "dump", tmp_path / "trace.json"
    code, out, _ = run(capsys, "transform", KALMAN, "--pass", "disintegrate,simplify",
                       "--dump-dir", str(dump), "--trace", str(trace))
    assert code == EXIT_OK
    assert sorted(p.name for p in dump.iterdir()) == ["00-disintegrate.ppt", "01-simplify.ppt"]
    steps = json.loads(trace.read_text())
    assert steps and {"rule", "before", "after"} <= steps[0].keys()


@pytest.mark.parametrize("passes", ["disintegrate,simplify", "condition,simplify", "simplify",
                                    "disintegrate", "gibbs,simplify", "normalize"])
def test_outputs_reparse_and_typecheck(capsys, passes):
    src = "x <~ Normal(0, 1); y <~ Normal(x, 1); Dirac((x, y))"
    code, out, _ = run(capsys, "transform", src, "--pass", passes)
    assert code == EXIT_OK
    typecheck(parse(out))


@pytest.mark.parametrize("argv,code", [
    (["transform", "x <~ ; 1"], EXIT_VALIDATION),
    (["transform", "Weight(-1, 2)"], EXIT_VALIDATION),
    (["check", "Weight(-1, 2)"], EXIT_VALIDATION),
    (["transform", "Dirac(3)", "--pass", "observe", "--point", "y"], EXIT_TRANSFORM),
    (["transform", "x <~ Normal(0,1); y <~ Normal(0,1); Dirac((x+y, x))", "--pass", "disintegrate"],
     EXIT_TRANSFORM),
    (["transform", "Normal(0, 1)", "--pass", "disintegrate"], EXIT_VALIDATION),
    (["transform", "Normal(0, 1)", "--pass", "bogus"], EXIT_VALIDATION),
    (["transform", "Normal(0, 1)", "--pass", "mh"], EXIT_VALIDATION),
    (["sample", "Normal(0, -1)", "--n", "2"], EXIT_RUNTIME),
    (["sample", "Normal(0, 1)", "--n", "0"], EXIT_VALIDATION),
    (["experiment", "kalman", "--n", "0"], EXIT_VALIDATION),
    (["nonsense"], EXIT_VALIDATION),
])
def test_exit_codes(capsys, argv, code):
    assert run(capsys, *argv)[0] == code


def test_pass_error_names_index(capsys):
    code, _, err = run(capsys, "transform", "Dirac(3)", "--pass", "simplify,observe", "--point", "y")
    assert code == EXIT_TRANSFORM and "pass 1 (observe)" in err


def test_sample_jsonl_is_reproducible(capsys):
    a = run(capsys, "sample", "x <~ Normal(m, 1); Weight(2, x)", "--n", "5", "--seed", "3",
            "--env", "m=1.5")[1]
    b = run(capsys, "sample", "x <~ Normal(m, 1); Weight(2, x)", "--n", "5", "--seed", "3",
            "--env", "m=1.5")[1]
    rows = [json.loads(line) for line in a.splitlines()]
    assert a == b and len(rows) == 5 and all(r["weight"] == 2.0 for r in rows)


def test_chain_and_ess(capsys, tmp_path):
    kernel = tmp_path / "k.ppt"
    kernel.write_text("Lam(s, n <~ Uniform(3, 8); Dirac((n, 1)))")
    out = tmp_path / "c.jsonl"
    code, _, _ = run(capsys, "chain", "--kernel", str(kernel), "--init", "5", "--n", "500",
                     "--seed", "2", "-o", str(out))
    assert code == EXIT_OK
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(rows) == 500 and rows[0].keys() == {"value", "weight", "ratio", "accepted"}
    code, text, _ = run(capsys, "ess", str(out), "--json")
    rep = json.loads(text)
    assert rep["n"] == 500 and rep["ess_per_sample"] > 0.8


def test_experiment_json_is_reproducible(capsys):
    a = json.loads(run(capsys, "experiment", "kalman", "--n", "2000", "--json")[1])
    b = json.loads(run(capsys, "experiment", "kalman", "--n", "2000", "--json")[1])
    a.pop("seconds"), b.pop("seconds")
    assert a == b and a["n"] == 2000


def test_console_script():
    exe = shutil.which("probxform")
    argv = [exe] if exe else [sys.executable, "-m", "probxform.cli"]
    res = subprocess.run(argv + ["check", "x <~ Uniform(0, 2); Uniform(x, 3)"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "Measure(Real)"
