import csv
import textwrap

import pytest

from icflow import cli
from icflow.config import SCHEMA, loads
from icflow.errors import ConfigError

SPHERE = textwrap.dedent("""\
    [shape]
    variant = sphere
    n = 3
    k = 1
    radius = 1.5
    [grid]
    n_phi = 32
    [flow]
    t_end = 0.3
    record_every = 0.1
    """)


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_defaults_and_round_trip():
    cfg = loads(SPHERE)
    assert cfg["grid"]["order"] == 4 and cfg["flow"]["cfl_safety"] == 0.3
    text = cfg.dumps()
    again = loads(text)
    assert again.dumps() == text
    assert again.values == cfg.values
    for section, keys in SCHEMA.items():
        for key in keys:
            assert f"\n{key} = " in "\n" + text


@pytest.mark.parametrize("text,line,fragment", [
    (SPHERE + "colour = red\n", 11, "unknown key flow.colour"),
    (SPHERE.replace("k = 1", "k = 3"), 4, "1..2"),
    (SPHERE.replace("t_end = 0.3", "dt_initial = 0"), 9, "dt_initial"),
    (SPHERE + "[extras]\n", 11, "unknown section"),
    (SPHERE.replace("n = 3\n", ""), 1, "missing required key shape.n"),
    (SPHERE.replace("n_phi = 32", "n_phi = many"), 7, "grid.n_phi"),
    ("variant = sphere\n", 1, "section"),
])
def test_config_errors_have_locations(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        loads(text)
    assert fragment in str(info.value)
    assert info.value.line == line


def test_verify_sphere(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["verify", "--config", write(tmp_path, SPHERE), "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "residuals.csv")
    assert list(rows[0]) == list(cli.RESIDUAL_COLUMNS)
    assert all(r["status"] == "pass" for r in rows)
    main = [r for r in rows if r["check"].startswith("main_1_7")]
    assert main and all(abs(float(r["residual"])) <= 10 * float(r["tau"]) for r in main)
    summary = (out / "summary.txt").read_text()
    assert "equality case" in summary and "fail = 0" in summary


def test_verify_row_count(tmp_path):
    text = SPHERE.replace("variant = sphere", "variant = ellipsoid\nb = 1.3") + "[suite]\nladder = 32,64\n"
    out = tmp_path / "o"
    assert cli.main(["verify", "--config", write(tmp_path, text), "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "residuals.csv")
    summary = (out / "summary.txt").read_text()
    lines = [x for x in summary.splitlines() if x.startswith(("pass ", "fail ", "skipped")) and " = " not in x]
    verdicts = len(lines)
    variation = sum(1 for x in lines if " variation_" in x)
    assert len(rows) == 2 * (verdicts - variation) + 3 * variation


def test_flow_sphere_series_constant(tmp_path):
    out = tmp_path / "f"
    assert cli.main(["flow", "--config", write(tmp_path, SPHERE), "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "series.csv")
    assert list(rows[0]) == list(cli.series_columns(3))
    assert len(rows) == 4
    assert len({r["Qk"] for r in rows}) <= 2
    assert (out / "qk.svg").read_text().lstrip().startswith("<?xml")
    assert all(len(r["t"]) < 25 for r in rows)


def test_flow_error_exit_code_writes_partial(tmp_path):
    text = SPHERE.replace("t_end = 0.3", "t_end = 1.0\nspeed = unnormalized\nconvexity_floor = 0.5")
    text = text.replace("radius = 1.5", "radius = 1.0")
    out = tmp_path / "e"
    assert cli.main(["flow", "--config", write(tmp_path, text), "--out", str(out), "--quiet"]) == 3
    rows = read_csv(out / "series.csv")
    assert 1 <= len(rows) < 11
    assert "ConvexityLost" in (out / "summary.txt").read_text()


@pytest.mark.parametrize("argv_tail,text", [
    ([], SPHERE.replace("k = 1", "k = 3")),
    ([], SPHERE.replace("t_end = 0.3", "dt_initial = 0")),
])
def test_config_error_exit_code(tmp_path, argv_tail, text, capsys):
    code = cli.main(["flow", "--config", write(tmp_path, text), "--out", str(tmp_path / "x")] + argv_tail)
    assert code == 2
    assert "line" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["verify", "--config", str(tmp_path / "none.ini"), "--out", str(tmp_path)]) == 2


def test_sweep_ellipsoid_aspect(tmp_path):
    text = SPHERE.replace("variant = sphere", "variant = ellipsoid") + "[suite]\nsuites = inequality\nks = shape\n"
    out = tmp_path / "s"
    code = cli.main(["sweep", "--config", write(tmp_path, text), "--axis", "shape.b=1.2,1.5,2",
                     "--out", str(out), "--quiet"])
    assert code == 0
    rows = [r for r in read_csv(out / "sweep.csv") if r["check"] == "main_1_7(k=1)" and r["N"] == "32"]
    assert [r["value"] for r in rows] == ["1.2", "1.5", "2"]
    res = [float(r["residual"]) for r in rows]
    assert all(x > 0 for x in res) and res == sorted(res)
    assert (out / "b=1.5" / "residuals.csv").exists()


def test_sweep_flow_command(tmp_path):
    out = tmp_path / "sf"
    code = cli.main(["sweep", "--config", write(tmp_path, SPHERE), "--axis", "radius=1,2",
                     "--command", "flow", "--out", str(out), "--quiet"])
    assert code == 0
    rows = read_csv(out / "sweep.csv")
    assert {r["value"] for r in rows} == {"1", "2"}


@pytest.mark.parametrize("axis", ["shape.b=", "shape.nope=1,2", "b"])
def test_sweep_errors(tmp_path, axis):
    assert cli.main(["sweep", "--config", write(tmp_path, SPHERE), "--axis", axis,
                     "--out", str(tmp_path / "z"), "--quiet"]) == 2
