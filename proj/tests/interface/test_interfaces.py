"""Schema and command-line checks for the files and endpoints other tools consume."""

import json
import os
import socket
import struct
import subprocess
import time
import urllib.error
import urllib.request
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from referencing import Registry, Resource

ROOT = Path(__file__).resolve().parents[2]
SCHEMAS = ROOT / "configs" / "schema"
DSTRUCT = os.environ.get("DSTRUCT", str(ROOT / "build" / "tools" / "dstruct"))


def load_registry():
    resources = []
    for path in SCHEMAS.glob("*.schema.json"):
        schema = json.loads(path.read_text())
        resources.append((schema["$id"], Resource.from_contents(schema)))
    return Registry().with_resources(resources)


REGISTRY = load_registry()


def validate(instance, schema_id, fragment=""):
    schema = {"$ref": schema_id + fragment}
    jsonschema.Draft202012Validator(schema, registry=REGISTRY).validate(instance)


def run(*args, check=True):
    proc = subprocess.run([DSTRUCT, *map(str, args)], capture_output=True, text=True, timeout=600)
    if check and proc.returncode != 0:
        raise AssertionError(f"dstruct {' '.join(map(str, args))} failed ({proc.returncode}):\n{proc.stderr}")
    return proc


def bundle_header(path):
    data = Path(path).read_bytes()
    assert data[:8] == b"DSTRBNDL"
    (version,) = struct.unpack("<I", data[8:12])
    (length,) = struct.unpack("<Q", data[12:20])
    assert version == 1
    return json.loads(data[20:20 + length])


@pytest.fixture(scope="module")
def bar_config(tmp_path_factory):
    """Small planar bar so the command-line tests stay quick."""
    tmp = tmp_path_factory.mktemp("bar")
    lines = []
    nx, ny = 25, 7
    for j in range(ny):
        for i in range(nx):
            lines.append(f"v {2.0 * i / (nx - 1)} {0.5 * j / (ny - 1)} 0")
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i + 1
            lines.append(f"f {a} {a + 1} {a + nx + 1}")
            lines.append(f"f {a} {a + nx + 1} {a + nx}")
    (tmp / "bar.obj").write_text("\n".join(lines) + "\n")
    config = {
        "name": "bar",
        "mesh": "bar.obj",
        "material": {"bending": False},
        "boundaryConditions": {
            "fixed": [
                {"select": {"all": True}, "axes": [False, False, True]},
                {"select": {"box": {"min": [-1, -1, -1], "max": [0, 1, 1]}}},
            ],
            "forces": [{"select": {"box": {"min": [2, -1, -1], "max": [3, 1, 1]}}, "total": [0, -1, 0]}],
        },
        "k": 3,
    }
    validate(config, "session_config.schema.json")
    (tmp / "bar.json").write_text(json.dumps(config))
    return tmp / "bar.json"


@pytest.fixture(scope="module")
def bar_bundle(bar_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle") / "bar.dsb"
    run("precompute", "--config", bar_config, "--out", out)
    return out


def test_bundled_configs_match_schema():
    configs = sorted((ROOT / "configs").glob("*.json"))
    assert configs
    for path in configs:
        validate(json.loads(path.read_text()), "session_config.schema.json")


def test_parameter_presets_match_schema():
    presets = sorted((ROOT / "configs" / "params").glob("*.json"))
    assert len(presets) == 16
    for path in presets:
        validate(json.loads(path.read_text()), "stripe_params.schema.json")


def test_schema_rejects_force_with_both_forms():
    bad = {"boundaryConditions": {"forces": [{"select": {"all": True}, "vector": [0, 0, 1], "total": [0, 0, 1]}]}}
    with pytest.raises(jsonschema.ValidationError):
        validate(bad, "session_config.schema.json")


def test_bundle_header_matches_schema(bar_bundle):
    header = bundle_header(bar_bundle)
    validate(header, "bundle_header.schema.json")
    assert header["timing"]["bending"] is None
    assert header["counts"]["modes"] == 3
    names = [b["name"] for b in header["blocks"]]
    assert names[:2] == ["positions", "faces"]


def test_bundle_blocks_decode_with_numpy(bar_bundle, bar_config):
    data = Path(bar_bundle).read_bytes()
    (length,) = struct.unpack("<Q", data[12:20])
    start = (20 + length + 7) // 8 * 8
    header = bundle_header(bar_bundle)
    blocks = {}
    for b in header["blocks"]:
        dtype = {"float64": "<f8", "int32": "<i4", "uint8": "u1"}[b["dtype"]]
        raw = data[start + b["offset"]:start + b["offset"] + b["bytes"]]
        blocks[b["name"]] = np.frombuffer(raw, dtype=dtype).reshape(b["shape"])
    obj = (bar_config.parent / "bar.obj").read_text().splitlines()
    verts = np.array([[float(x) for x in line.split()[1:]] for line in obj if line.startswith("v ")])
    assert np.array_equal(blocks["positions"], verts)
    assert blocks["faces"].min() == 0 and blocks["faces"].max() == len(verts) - 1
    assert np.allclose(np.linalg.norm(blocks["u_modes"], axis=1), 1.0)
    assert np.all(np.diff(blocks["u_eigenvalues"]) >= 0)
    assert set(np.unique(blocks["isotropic"])) <= {0, 1}


def test_report_marks_missing_bending(bar_bundle):
    out = run("report", bar_bundle).stdout
    assert "Bending(s)" in out
    assert "N/A" in out


def test_extract_writes_obj_with_parameter_echo(bar_bundle, tmp_path):
    params = {"gamma": 1.0, "r": 100.0, "a": 1, "b": 1, "alphaU": 40.0, "alphaW": 40.0}
    (tmp_path / "p.json").write_text(json.dumps(params))
    run("extract", "--bundle", bar_bundle, "--params", tmp_path / "p.json", "--out", tmp_path / "s.obj")
    text = (tmp_path / "s.obj").read_text()
    assert text.startswith("# diffusion structure")
    assert "# params {" in text
    assert any(line.startswith("f ") for line in text.splitlines())


def test_empty_structure_is_a_warning(bar_bundle, tmp_path):
    params = {"gamma": 1.0, "r": 100.0, "mU": 1.0, "mW": 1.0}
    (tmp_path / "p.json").write_text(json.dumps(params))
    proc = run("extract", "--bundle", bar_bundle, "--params", tmp_path / "p.json", "--out", tmp_path / "e.obj")
    assert proc.returncode == 0
    assert "empty structure" in proc.stderr
    text = (tmp_path / "e.obj").read_text()
    assert "# empty structure" in text
    assert not any(line.startswith("f ") for line in text.splitlines())


def test_extract_recomputes_for_other_gamma(bar_bundle, tmp_path):
    params = {"gamma": 3.0, "r": 100.0, "alphaU": 40.0, "alphaW": 40.0}
    (tmp_path / "p.json").write_text(json.dumps(params))
    proc = run("extract", "--bundle", bar_bundle, "--params", tmp_path / "p.json", "--out", tmp_path / "g.obj")
    assert "recomputing for gamma=3" in proc.stderr


def test_sweep_writes_one_file_per_value(bar_bundle, tmp_path):
    params = {"gamma": 1.0, "r": 100.0, "alphaW": 40.0}
    (tmp_path / "p.json").write_text(json.dumps(params))
    run("sweep", "--bundle", bar_bundle, "--params", tmp_path / "p.json", "--vary", "alphaU=20,40,60",
        "--out", tmp_path / "sweep")
    files = sorted((tmp_path / "sweep").glob("*.obj"))
    assert [f.name for f in files] == [f"structure_alphaU-{v}.obj" for v in (20, 40, 60)]
    assert len({f.read_text() for f in files}) == 3


def test_sweep_rejects_unknown_parameter(bar_bundle, tmp_path):
    proc = run("sweep", "--bundle", bar_bundle, "--vary", "zeta=1,2", "--out", tmp_path, check=False)
    assert proc.returncode == 1
    assert "zeta" in proc.stderr


def test_stage_failure_exit_code(bar_config, tmp_path):
    config = json.loads(bar_config.read_text())
    config["mesh"] = str(bar_config.parent / "bar.obj")
    config["boundaryConditions"]["fixed"] = []
    (tmp_path / "loose.json").write_text(json.dumps(config))
    proc = run("precompute", "--config", tmp_path / "loose.json", "--out", tmp_path / "x.dsb", check=False)
    assert proc.returncode == 2
    assert "error in stage statics" in proc.stderr


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def request(port, method, path, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(f"http://127.0.0.1:{port}{path}", data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=300) as res:
            return res.status, dict(res.headers), res.read()
    except urllib.error.HTTPError as err:
        return err.code, dict(err.headers), err.read()


def test_served_endpoints_follow_schemas(bar_config):
    port = free_port()
    server = subprocess.Popen([DSTRUCT, "serve", "--port", str(port)], stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    try:
        for _ in range(100):
            try:
                if request(port, "GET", "/health")[0] == 200:
                    break
            except OSError:
                time.sleep(0.05)
        config = json.loads(bar_config.read_text())
        config.pop("mesh")
        create = {"config": config, "meshObj": (bar_config.parent / "bar.obj").read_text()}
        validate(create, "http_requests.schema.json", "#/$defs/create")
        status, _, body = request(port, "POST", "/sessions", create)
        assert status == 201
        summary = json.loads(body)
        validate(summary, "session_summary.schema.json")
        sid = summary["id"]

        status, headers, body = request(port, "GET", f"/sessions/{sid}/bundle")
        assert status == 200 and headers["X-Bundle-Version"] == "1"
        assert body[:8] == b"DSTRBNDL"

        recompute = {"r": 50.0}
        validate(recompute, "http_requests.schema.json", "#/$defs/recompute")
        status, _, body = request(port, "POST", f"/sessions/{sid}/recompute", recompute)
        assert status == 200
        validate(json.loads(body), "session_summary.schema.json")

        extract = {"params": {"gamma": 1.0, "r": 50.0, "alphaU": 40.0, "alphaW": 40.0}, "version": 2}
        validate(extract, "http_requests.schema.json", "#/$defs/extract")
        status, headers, body = request(port, "POST", f"/sessions/{sid}/extract", extract)
        assert status == 200 and headers["X-Empty-Structure"] == "false"
        assert b"\nf " in body

        stale = dict(extract, version=1)
        status, _, body = request(port, "POST", f"/sessions/{sid}/extract", stale)
        assert status == 409
        validate(json.loads(body), "http_requests.schema.json", "#/$defs/error")

        status, _, body = request(port, "GET", "/sessions/unknown")
        assert status == 404
        validate(json.loads(body), "http_requests.schema.json", "#/$defs/error")
    finally:
        server.terminate()
        server.wait(timeout=10)
