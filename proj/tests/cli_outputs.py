"""End-to-end checks of the curvflow CLI: exit codes, file formats, schemas, determinism.

Usage: cli_outputs.py <curvflow executable> <tests source dir> <scratch dir>
"""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema

TRACE_HEADER = "t,dt,E,F,alpha,volume,umin,umax,gb_residual"
BRANCH_HEADER = "lambda,V,stab_eig,newton_iters,res_inf"

exe = Path(sys.argv[1])
src = Path(sys.argv[2])
scratch = Path(sys.argv[3])
root = src.parent
configs = root / "configs"
result_schema = json.loads((root / "schema" / "result.schema.json").read_text(encoding="utf-8"))
manifest_schema = json.loads((root / "schema" / "manifest.schema.json").read_text(encoding="utf-8"))

failures = []


def check(cond, msg):
    print(("ok   " if cond else "FAIL ") + msg)
    if not cond:
        failures.append(msg)


def cli(*args):
    return subprocess.run([str(exe), *map(str, args)], capture_output=True, text=True)


def read_text_strict(path):
    raw = path.read_bytes()
    raw.decode("utf-8")
    check(b"\r" not in raw, f"{path.name}: LF line endings")
    check(raw.endswith(b"\n"), f"{path.name}: ends with newline")
    return raw


def check_outputs(out, kind):
    result = json.loads(read_text_strict(out / "result.json"))
    manifest = json.loads(read_text_strict(out / "manifest.json"))
    try:
        jsonschema.validate(result, result_schema)
        check(True, f"{out.name}: result.json matches schema")
    except jsonschema.ValidationError as e:
        check(False, f"{out.name}: result.json schema: {e.message}")
    try:
        jsonschema.validate(manifest, manifest_schema)
        check(True, f"{out.name}: manifest.json matches schema")
    except jsonschema.ValidationError as e:
        check(False, f"{out.name}: manifest.json schema: {e.message}")
    csv_name, header = ("trace.csv", TRACE_HEADER) if kind == "run" else ("branch.csv", BRANCH_HEADER)
    lines = read_text_strict(out / csv_name).decode("utf-8").split("\n")
    check(lines[0] == header, f"{out.name}: {csv_name} header")
    width = len(header.split(","))
    check(all(len(l.split(",")) == width for l in lines[1:-1]), f"{out.name}: {csv_name} row widths")
    check(len(lines) > 2, f"{out.name}: {csv_name} has data rows")
    return result, manifest


if scratch.exists():
    shutil.rmtree(scratch)
scratch.mkdir(parents=True)

# Shipped run scenarios: pass, valid outputs, byte-identical reruns.
for name in ["constant-f", "sign-changing", "low-energy-bump", "genus2-mesh"]:
    a, b = scratch / f"{name}-a", scratch / f"{name}-b"
    r1 = cli("run", configs / f"{name}.json", "--out", a, "--quiet")
    r2 = cli("run", configs / f"{name}.json", "--out", b, "--quiet")
    check(r1.returncode == 0, f"run {name}: exit 0 (stderr: {r1.stderr.strip()})")
    result, manifest = check_outputs(a, "run")
    check(result["passed"] and result["converged"], f"run {name}: passed and converged")
    check(manifest["exit_code"] == 0, f"run {name}: manifest exit code")
    for f in ["trace.csv", "result.json"]:
        check((a / f).read_bytes() == (b / f).read_bytes(), f"run {name}: {f} identical across runs")
    if name == "constant-f":
        import math
        u = result["u"]
        check(max(abs(x - 0.5 * math.log(4.0)) for x in u) <= 1e-7, "constant-f: u is log(A)/2")
        check(abs(result["lambda"] - (-1.0 / 4.0 + 0.4)) <= 1e-9, "constant-f: lambda = kbar/A - c")
    if name == "sign-changing":
        check(result["lambda"] > 0, "sign-changing: lambda > 0")
    if name == "low-energy-bump":
        check(result["lambda"] > 0 and result["stab_eig"] < 0, "low-energy-bump: lambda > 0, stab_eig < 0")

# Seed override changes random initial data but not the limit.
s1, s2 = scratch / "seed-1", scratch / "seed-2"
cli("run", configs / "constant-f.json", "--out", s1, "--seed", "1", "--quiet")
cli("run", configs / "constant-f.json", "--out", s2, "--seed", "2", "--quiet")
check((s1 / "trace.csv").read_bytes() != (s2 / "trace.csv").read_bytes(), "--seed changes the trajectory")
check(json.loads((s2 / "manifest.json").read_text())["seed"] == 2, "--seed recorded in manifest")

# Branch: outputs, determinism, truncation past the end of the stable branch.
a, b = scratch / "branch-a", scratch / "branch-b"
r = cli("branch", configs / "branch.json", "--out", a)
cli("branch", configs / "branch.json", "--out", b, "--quiet")
check(r.returncode == 0, "branch: exit 0")
check("truncated" in r.stderr, "branch: truncation logged")
result, _ = check_outputs(a, "branch")
check(result["truncated"] and result["last_stable_lambda"] > 0, "branch: truncated after a positive lambda")
check((a / "branch.csv").read_bytes() == (b / "branch.csv").read_bytes(), "branch: branch.csv identical across runs")
check((a / "result.json").read_bytes() == (b / "result.json").read_bytes(), "branch: result.json identical across runs")

# Malformed config: exit 2 with a line/column diagnostic.
bad = scratch / "bad.json"
bad.write_text('{\n  "surface": {"type": "grid",\n  "n": 8 }\n  "f": 1\n}\n', encoding="utf-8")
r = cli("run", bad, "--out", scratch / "bad")
check(r.returncode == 2, f"malformed config: exit 2 (got {r.returncode})")
check("line 4, column 5" in r.stderr, f"malformed config: line/column reported ({r.stderr.strip()})")

unknown = scratch / "unknown.json"
unknown.write_text('{"surface": {"type": "grid", "n": 8}, "f": {"type": "constant", "value": -1, "vale": 2}}\n')
r = cli("run", unknown, "--out", scratch / "unknown")
check(r.returncode == 2 and "/f/vale" in r.stderr, "unknown key: exit 2 naming the JSON path")

r = cli("run", scratch / "missing.json")
check(r.returncode == 2, "missing config: exit 2")

# Failing assertion: exit 1, outputs still written.
failing = scratch / "failing.json"
failing.write_text(json.dumps({
    "scenario": "generic",
    "surface": {"type": "grid", "n": 8, "kbar": -1.0},
    "f": {"type": "constant", "value": -1.0},
    "A": 1.0,
    "assertions": {"lambda_positive": True},
}))
r = cli("run", failing, "--out", scratch / "failing", "--quiet")
check(r.returncode == 1, f"failed assertion: exit 1 (got {r.returncode})")
result, manifest = check_outputs(scratch / "failing", "run")
check(not result["passed"] and manifest["exit_code"] == 1, "failed assertion recorded")

# Selftest and its fault injections.
r = cli("selftest")
check(r.returncode == 0 and "0 failed" in r.stdout, "selftest passes")
r = cli("selftest", "--inject", "alpha-sign")
check(r.returncode == 1 and any(l.startswith("additive-invariance") and "FAIL" in l for l in r.stdout.splitlines()),
      "alpha-sign injection breaks additive invariance")
r = cli("selftest", "--inject", "negative-weight-mesh")
check(r.returncode == 0 and "delaunay: false" in r.stdout, "negative-weight mesh skips the maximum principle")

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
