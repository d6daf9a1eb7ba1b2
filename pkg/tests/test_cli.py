import json
import subprocess
import sys

import pytest

from rota.cli import EXIT_BUDGET, EXIT_ERROR, EXIT_OK, EXIT_PARSE, EXIT_VERIFY, main, verify_solution
from rota.core import load_instance, parse_instance


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def inst_path(tmp_path):
    path = tmp_path / "inst.txt"
    assert run("generate", "-n", 4, "-p", 5, "--seed", 7, "-o", path) == EXIT_OK
    return path


def read_json(path):
    return json.loads(path.read_text())


# --- generate -----------------------------------------------------------------


def test_generate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    run("generate", "-n", 2, "-p", 3, "--seed", 1, "-o", a)
    run("generate", "-n", 2, "-p", 3, "--seed", 1, "-o", b)
    assert a.read_bytes() == b.read_bytes()


def test_generate_stdout_and_env_seed(capsys, monkeypatch):
    monkeypatch.setenv("ROTA_SEED", "3")
    run("generate", "-n", 2, "-p", 3)
    env_text = capsys.readouterr().out
    run("generate", "-n", 2, "-p", 3, "--seed", 3)
    assert capsys.readouterr().out == env_text
    assert env_text.startswith("rota-instance v1")


@pytest.mark.parametrize("seed", range(50))
def test_generated_instances_validate(tmp_path, seed):
    path = tmp_path / "g.txt"
    assert run("generate", "-n", 4, "-p", 5, "--seed", seed, "-o", path) == EXIT_OK
    inst = load_instance(path)
    assert all(inst.matroid.rank(inst.B(c)) == 4 for c in range(1, 5))


def test_generate_errors(tmp_path):
    assert run("generate", "-n", 3, "-p", 4, "-o", tmp_path / "x") == EXIT_ERROR
    assert run("generate", "--kind", "graphic", "-n", 3, "-v", 6, "-o", tmp_path / "x") == EXIT_ERROR
    assert run("--max-n", 3, "generate", "-n", 5, "-p", 5, "-o", tmp_path / "x") == EXIT_ERROR


def test_generate_graphic(tmp_path):
    path = tmp_path / "g.txt"
    assert run("generate", "--kind", "graphic", "-n", 4, "--seed", 2, "-o", path) == EXIT_OK
    assert load_instance(path).matroid.kind == "graphic"


# --- solving and verification --------------------------------------------------


def test_pack_then_verify(inst_path, tmp_path):
    out = tmp_path / "pack.json"
    assert run("pack", "-i", inst_path, "--exact-fallback", "--json", out) == EXIT_OK
    rep = read_json(out)
    assert rep["mode"] == "pack" and rep["bases_found"] == 4 and rep["exact"]
    assert {"digest", "config", "timing_ms", "version"} <= set(rep)
    assert run("verify", inst_path, out) == EXIT_OK


def test_verify_repeated_element(inst_path, tmp_path, capsys):
    out = tmp_path / "pack.json"
    run("pack", "-i", inst_path, "--exact-fallback", "--json", out)
    rep = read_json(out)
    inst = load_instance(inst_path)
    # swap in an element already used by basis 0, keeping colours rainbow
    x = rep["bases"][0][0]
    B1 = rep["bases"][1]
    B1[[inst.colour[y] for y in B1].index(inst.colour[x])] = x
    out.write_text(json.dumps(rep))
    capsys.readouterr()
    assert run("verify", inst_path, out) == EXIT_VERIFY
    text = capsys.readouterr().out
    assert "FAIL" in text and f"element {x} appears in bases 0 and 1" in text


def test_verify_independence_corruption(tmp_path, capsys):
    # element 3 is parallel to element 0, which shares a colour with element 1
    path = tmp_path / "i.txt"
    path.write_text(
        "rota-instance v1\nkind linear p=3 n=2\n"
        "elem 0 colour=1 vec=1,0\nelem 1 colour=1 vec=0,1\n"
        "elem 2 colour=2 vec=1,1\nelem 3 colour=2 vec=2,0\n"
    )
    sol = tmp_path / "s.json"
    rep = {"mode": "pack", "bases_found": 1, "bases": [[1, 3]]}
    sol.write_text(json.dumps(rep))
    assert run("verify", path, sol) == EXIT_OK
    rep["bases"] = [[0, 3]]
    sol.write_text(json.dumps(rep))
    capsys.readouterr()
    assert run("verify", path, sol) == EXIT_VERIFY
    assert "basis 0 violates independence" in capsys.readouterr().out


def test_verify_solution_messages():
    inst = parse_instance("rota-instance v1\nkind linear p=3 n=1\nelem 0 colour=1 vec=1\n")
    assert verify_solution(inst, {"mode": "cover", "count": 1, "bases": [[0]]}) == []
    probs = verify_solution(inst, {"mode": "cover", "count": 2, "bases": [[0]]})
    assert probs == ["count=2 but 1 bases listed"]
    assert verify_solution(inst, {"mode": "cover", "count": 0, "bases": []}) == ["elements [0] are not covered"]
    assert verify_solution(inst, {"mode": "what"}) == ["cannot verify mode 'what'"]
    assert "instance digest" in verify_solution(inst, {"mode": "cover", "count": 1, "bases": [[0]], "digest": "x"})[0]


def test_cover_report(inst_path, tmp_path):
    out = tmp_path / "cover.json"
    trace = tmp_path / "t.jsonl"
    assert run("cover", "-i", inst_path, "--json", out, "--trace", trace) == EXIT_OK
    rep = read_json(out)
    assert rep["mode"] == "cover" and rep["count"] <= 6
    assert rep["bounds"] == {"two_n_minus_two": 6, "one_plus_eps_n": pytest.approx(1.3 * 4)}
    assert run("verify", inst_path, out) == EXIT_OK
    assert trace.read_text().strip()


def test_deadlock_and_bf_agree(inst_path, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    subset = "0,1,2,3,4,5,6,7,8"
    assert run("deadlock", "-i", inst_path, "-k", 2, "--subset", subset, "--json", a) == EXIT_OK
    assert run("bf", "deadlock", "-i", inst_path, "-k", 2, "--subset", subset, "--json", b) == EXIT_OK
    ra, rb = read_json(a), read_json(b)
    assert ra["deadlock"] == rb["deadlock"] and ra["surplus"] == rb["surplus"]
    assert run("verify", inst_path, a) == EXIT_OK
    ra["deadlock"] = ra["deadlock"] + [15] if 15 not in ra["deadlock"] else ra["deadlock"][:-1]
    a.write_text(json.dumps(ra))
    assert run("verify", inst_path, a) == EXIT_VERIFY


def test_json_to_stdout(inst_path, capsys):
    assert run("bf", "cover", "-i", inst_path, "--json", "-") == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["mode"] == "bf-cover" and rep["count"] >= 4


def test_bf_rainbow(inst_path, capsys):
    assert run("bf", "rainbow", "-i", inst_path, "--parts", 4, "--subset", "0 1 2 3", "--json", "-") == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["possible"] is True


def test_bf_size_cap_exit_code(inst_path):
    assert run("bf", "deadlock", "-i", inst_path, "-k", 2) == EXIT_BUDGET


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("rota-instance v1\nkind linear p=3 n=1\nelem 0 colour=1 vec=x\n")
    assert run("cover", "-i", bad) == EXIT_PARSE
    assert "line 3" in capsys.readouterr().err


def test_verify_bad_json(inst_path, tmp_path):
    sol = tmp_path / "s.json"
    sol.write_text("{not json")
    assert run("verify", inst_path, sol) == EXIT_PARSE


def test_missing_file():
    assert run("cover", "-i", "/nonexistent/inst.txt") == EXIT_ERROR


def test_pack_budget_exit(tmp_path):
    path = tmp_path / "big.txt"
    run("generate", "-n", 12, "-p", 7, "--seed", 1, "-o", path)
    assert run("--quiet", "pack", "-i", path, "--budget-ms", 0.001) == EXIT_BUDGET


def test_audit_flag(inst_path):
    assert run("--audit", "--quiet", "pack", "-i", inst_path) in (EXIT_OK, EXIT_BUDGET)


# --- batch --------------------------------------------------------------------


def test_batch(inst_path, tmp_path, capsys):
    manifest = tmp_path / "m.txt"
    manifest.write_text(
        "# comment\n"
        f"rota --quiet pack -i {inst_path} --exact-fallback\n"
        f"--quiet cover -i {inst_path}\n"
        f"--quiet verify {inst_path} {tmp_path / 'missing.json'}\n"
    )
    code = run("batch", manifest, "--jobs", 2)
    lines = [json.loads(ln) for ln in capsys.readouterr().out.splitlines() if ln.startswith("{")]
    assert [ln["exit"] for ln in lines] == [0, 0, EXIT_ERROR]
    assert code == EXIT_ERROR


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rota.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("rota ")
