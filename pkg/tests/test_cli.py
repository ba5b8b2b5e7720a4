import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from gaussmap import __version__
from gaussmap.cli import InputError, build_parser, dumps, main, parse_surface, surface_toml, _jobs
from gaussmap.catalog import builtin

SVG = "{http://www.w3.org/2000/svg}"


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_enneper_report(tmp_path, capsys):
    path = tmp_path / "enneper.json"
    code, _, _ = run(["analyze", "--builtin", "enneper", "-o", str(path)], capsys)
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["format_version"] == 1 and doc["tool"]["version"] == __version__
    assert doc["status"] == "ok"
    assert doc["report"]["c_total"] == 4 and doc["report"]["missing"]["l"] == 1
    assert all(doc["identities"].values())
    assert "timing" not in doc and "geometry" not in doc


def test_analyze_output_is_deterministic_and_round_trips(tmp_path, capsys):
    paths = [tmp_path / f"r{k}.json" for k in range(2)]
    for p in paths:
        assert run(["analyze", "--builtin", "enneper2", "-o", str(p)], capsys)[0] == 0
    a, b = (p.read_bytes() for p in paths)
    assert a == b
    doc = json.loads(a)
    assert dumps(doc).encode() == a


def test_analyze_timing_is_opt_in(capsys):
    code, out, _ = run(["analyze", "--builtin", "catenoid", "--timing"], capsys)
    assert code == 0 and "seconds" in json.loads(out)["timing"]


def test_inadmissible_direction_exits_3(capsys):
    code, out, _ = run(["analyze", "--builtin", "catenoid", "--direction", "0,1,0"], capsys)
    assert code == 3
    doc = json.loads(out)
    assert doc["status"] == "degenerate" and "AE.5" in doc["error"]


def test_critical_rotation_is_degenerate(capsys):
    code, out, _ = run(["analyze", "--builtin", "catenoid", "--direction", "0,-0.7071067811865476,0.7071067811865476"],
                       capsys)
    assert code == 3
    assert "InconclusiveAtTolerance" in json.loads(out)["error"]


def test_injected_fault_is_an_identity_failure(capsys):
    code, out, _ = run(["analyze", "--builtin", "catenoid", "--inject-fault", "beta"], capsys)
    assert code == 2
    ids = json.loads(out)["identities"]
    assert not ids["rh"] and ids["tc"]


def test_toml_input(tmp_path, capsys):
    src = tmp_path / "s.toml"
    src.write_text(surface_toml(builtin("enneper")))
    code, out, _ = run(["analyze", "--input", str(src)], capsys)
    assert code == 0 and json.loads(out)["report"]["c_total"] == 4


@pytest.mark.parametrize("body,key", [
    ('ends = ["inf"]\n[gauss_map]\nnum = [[0, 0], [1, 0]]\nden = [[0, 0]]\n'
     '[height_differential]\nnum = [[1, 0]]\nden = [[1, 0]]\n', "gauss_map.den"),
    ('ends = ["inf"]\n[gauss_map]\nnum = [[0, 0], [1, 0]]\nden = [[1, 0]]\n', "height_differential"),
    ('ends = [[1, 2, 3]]\n[gauss_map]\nnum = [[0, 0], [1, 0]]\nden = [[1, 0]]\n'
     '[height_differential]\nnum = [[1, 0]]\nden = [[1, 0]]\n', "ends[0]"),
    ("ends = [", "s.toml"),
])
def test_malformed_input_exits_1(tmp_path, capsys, body, key):
    src = tmp_path / "s.toml"
    src.write_text(body)
    code, _, err = run(["analyze", "--input", str(src)], capsys)
    assert code == 1
    assert key in err


def test_missing_input_file(capsys):
    assert run(["analyze", "--input", "/nonexistent/x.toml"], capsys)[0] == 1


def test_parse_surface_rejects_constant_gauss_map():
    doc = {"ends": ["inf"], "gauss_map": {"num": [1], "den": [1]}, "height_differential": {"num": [1], "den": [1]}}
    with pytest.raises(InputError):
        parse_surface(doc)


def test_verify_all_passes(tmp_path, capsys):
    path = tmp_path / "m.json"
    code, out, _ = run(["verify", "--all", "--json", str(path)], capsys)
    assert code == 0
    assert "FAIL" not in out
    matrix = json.loads(path.read_text())["matrix"]
    assert set(matrix) == {"catenoid", "enneper", "enneper2", "enneper3"}
    assert all(all(v.values()) for v in matrix.values())


def test_verify_only_filters_rows(capsys):
    code, out, _ = run(["verify", "--only", "tc", "enneper"], capsys)
    assert code == 0
    rows = [line.split()[0] for line in out.splitlines()[2:]]
    assert rows and all(r == "tc" or r.startswith("tc.") for r in rows)


def test_verify_fault_injection_fails_rh(capsys):
    code, out, _ = run(["verify", "--inject-fault", "beta", "--only", "rh", "catenoid"], capsys)
    assert code == 2
    cells = {line.split()[0]: line.split()[1] for line in out.splitlines()[2:]}
    assert cells["rh"] == "FAIL"


def test_verify_unknown_surface(capsys):
    assert run(["verify", "nosuch"], capsys)[0] == 1


def test_jobs_fallback_from_environment(monkeypatch, capsys):
    args = build_parser().parse_args(["verify"])
    monkeypatch.setenv("GAUSSMAP_JOBS", "3")
    assert _jobs(args) == 3
    monkeypatch.setenv("GAUSSMAP_JOBS", "bogus")
    assert _jobs(args) == 1
    assert _jobs(build_parser().parse_args(["verify", "--jobs", "2"])) == 2
    monkeypatch.setenv("GAUSSMAP_JOBS", "2")
    code, out, _ = run(["verify", "catenoid", "enneper"], capsys)
    monkeypatch.delenv("GAUSSMAP_JOBS")
    code1, out1, _ = run(["verify", "catenoid", "enneper"], capsys)
    assert (code, out) == (code1, out1)


def test_sweep_closed_form_csv(tmp_path, capsys):
    path = tmp_path / "s.csv"
    code, _, err = run(["sweep", "--family", "closed-form", "--start", "0.7", "--stop", "0.9",
                        "--step", "0.05", "--csv", str(path)], capsys)
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "parameter,c,omega,l,flags"
    assert len(lines) == 6
    assert "transition 0 -> 4" in err


def test_sweep_rotated_catenoid_svgs(tmp_path, capsys):
    out = tmp_path / "svg"
    code, text, _ = run(["sweep", "--family", "rotated-catenoid", "--grid", "0.5,1.0", "--no-refine",
                         "--svg-dir", str(out)], capsys)
    assert code == 0
    # the reflection symmetry of the tilted catenoid forces omega = 0 despite the four cusps
    assert text.splitlines()[1:] == ["0.5,0,0,2,", "1.0,4,0,2,"]
    assert sorted(p.name for p in out.iterdir()) == ["rotated-catenoid_+0.500000.svg", "rotated-catenoid_+1.000000.svg"]


def test_sweep_rejects_unsorted_grid(capsys):
    assert run(["sweep", "--family", "closed-form", "--grid", "0.3,0.2"], capsys)[0] == 1


def test_sweep_epsilon_family_json(tmp_path, capsys):
    path = tmp_path / "e.json"
    code, _, _ = run(["sweep", "--family", "epsilon", "--grid=-0.05,0.05", "--no-refine", "--json", str(path)],
                     capsys)
    assert code == 0
    doc = json.loads(path.read_text())
    assert [s["c"] for s in doc["samples"]] == [0, 4]


def _markers(path):
    root = ET.parse(path).getroot()
    return {cls: len(root.findall(f".//{SVG}*[@class='{cls}']")) for cls in ("curve", "cusp", "crossing", "legend")}


def test_render_enneper_and_catenoid(tmp_path, capsys):
    for name, cusps in (("enneper", 4), ("catenoid", 0)):
        path = tmp_path / f"{name}.svg"
        assert run(["render", "--builtin", name, "-o", str(path)], capsys)[0] == 0
        m = _markers(path)
        assert m["curve"] == 1 and m["cusp"] == cusps and m["legend"] == 2


def test_render_from_report_geometry(tmp_path, capsys):
    rep = tmp_path / "r.json"
    svg = tmp_path / "r.svg"
    assert run(["analyze", "--builtin", "enneper3", "--geometry", "-o", str(rep)], capsys)[0] == 0
    assert run(["render", "--report", str(rep), "-o", str(svg)], capsys)[0] == 0
    assert _markers(svg)["cusp"] == 8
    plain = tmp_path / "plain.json"
    run(["analyze", "--builtin", "enneper", "-o", str(plain)], capsys)
    assert run(["render", "--report", str(plain), "-o", str(svg)], capsys)[0] == 1


def test_catalog_listing_and_show(capsys):
    code, out, _ = run(["catalog"], capsys)
    assert code == 0 and [line.split()[0] for line in out.splitlines()] == ["catenoid", "enneper", "enneper2", "enneper3"]
    code, out, _ = run(["catalog", "--show", "catenoid"], capsys)
    assert code == 0 and 'name = "catenoid"' in out
    assert run(["catalog", "--show", "nosuch"], capsys)[0] == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "gaussmap", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
