import pytest

from icflow import fixtures
from icflow.fixtures import FixtureError, FixtureRecord
from icflow.integrals import functionals
from icflow.shapes import GridSpec, PerturbedSphere, sample_shape


def test_bundled_fixtures_parse_with_valid_checksums():
    recs = fixtures.load()
    assert len(recs) >= 50
    assert {r.n for r in recs} == {3, 4, 5}


def test_label_round_trip():
    spec = PerturbedSphere(1.0, ((2, 0.05), (3, 0.02)), n=4)
    label = fixtures.shape_label(spec)
    assert fixtures.parse_shape_label(label, 4) == spec


def test_tampering_is_detected():
    text = fixtures.default_path().read_text()
    line = next(l for l in text.splitlines() if l.startswith("vol = "))
    bad = text.replace(line, line[:-1] + ("1" if line[-1] != "1" else "2"), 1)
    with pytest.raises(FixtureError, match="checksum"):
        fixtures.parse(bad)


def test_append_only(tmp_path):
    path = tmp_path / "f.txt"
    rec = FixtureRecord("sphere radius=1.0", 3, {"vol": 4.18879})
    assert fixtures.append_records(path, [rec]) == 1
    changed = FixtureRecord("sphere radius=1.0", 3, {"vol": 5.0})
    assert fixtures.append_records(path, [changed]) == 0
    assert fixtures.load(path)[0].values["vol"] == 4.18879
    assert path.read_text().startswith(fixtures.HEADER)


def test_values_round_trip_17_digits():
    x = 0.1 + 0.2
    assert float(fixtures.fmt(x)) == x


def test_library_matches_oracle_fixtures():
    worst = 0.0
    for rec in fixtures.load():
        s = sample_shape(rec.spec, GridSpec.axisym(256))
        for k in range(1, rec.n):
            fs = functionals(s, k)
            for j in range(rec.n):
                ref = rec.values[f"I_H[{j}]"]
                worst = max(worst, abs(fs.I_H[j] - ref) / abs(ref))
    assert worst <= 1e-8
