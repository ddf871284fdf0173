"""Plain-text oracle fixture records.

A fixture file is a sequence of blocks::

    [record]
    shape = ellipsoid a=1 b=1.5
    n = 3
    I_H[0] = 22.250184342985378
    ...
    checksum = <sha256 of the block's preceding lines>

Values use 17 significant digits so they round-trip through binary64.
Records are append-only: :func:`append_records` refuses to rewrite existing
ones.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .shapes import AxisymEllipsoid, PerturbedSphere, Sphere, TabulatedProfile

HEADER = "# icflow oracle fixtures, format 1\n"


class FixtureError(ValueError):
    pass


def shape_label(spec):
    if isinstance(spec, Sphere):
        return f"sphere radius={spec.radius!r}"
    if isinstance(spec, AxisymEllipsoid):
        return f"ellipsoid a={spec.a!r} b={spec.b!r}"
    if isinstance(spec, PerturbedSphere):
        modes = ";".join(f"{m}:{e!r}" for m, e in spec.modes)
        return f"perturbed radius={spec.radius!r} modes={modes}"
    if isinstance(spec, TabulatedProfile):
        # display only; tables are not stored in the fixture file
        return f"tabulated nodes={len(spec.phi)}"
    raise FixtureError(f"no fixture label for {type(spec).__name__}")


def parse_shape_label(label, n):
    kind, *parts = label.split()
    kv = dict(p.split("=", 1) for p in parts)
    if kind == "sphere":
        return Sphere(float(kv["radius"]), n=n)
    if kind == "ellipsoid":
        return AxisymEllipsoid(float(kv["a"]), float(kv["b"]), n=n)
    if kind == "perturbed":
        modes = tuple((int(m), float(e)) for m, e in (t.split(":") for t in kv["modes"].split(";")))
        return PerturbedSphere(float(kv["radius"]), modes, n=n)
    raise FixtureError(f"unknown shape label {label!r}")


def fmt(x):
    return format(float(x), ".17g")


@dataclass(frozen=True)
class FixtureRecord:
    shape: str
    n: int
    values: dict

    @property
    def spec(self):
        return parse_shape_label(self.shape, self.n)

    def body(self):
        lines = [f"shape = {self.shape}", f"n = {self.n}"]
        lines += [f"{key} = {fmt(val)}" for key, val in self.values.items()]
        return "".join(line + "\n" for line in lines)

    def checksum(self):
        return hashlib.sha256(self.body().encode()).hexdigest()

    def render(self):
        return "[record]\n" + self.body() + f"checksum = {self.checksum()}\n"


def parse(text):
    """Parse fixture text, verifying every record's checksum."""
    records = []
    block = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[record]":
            block = []
            continue
        if block is None or "=" not in line:
            raise FixtureError(f"line {lineno}: unexpected {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key != "checksum":
            block.append((key, val))
            continue
        fields = dict(block)
        try:
            shape = fields.pop("shape")
            n = int(fields.pop("n"))
        except KeyError as exc:
            raise FixtureError(f"line {lineno}: record lacks {exc}") from None
        rec = FixtureRecord(shape, n, {k: float(v) for k, v in fields.items()})
        expected = hashlib.sha256(
            "".join(f"{k} = {v}\n" for k, v in block).encode()
        ).hexdigest()
        if val != expected:
            raise FixtureError(f"line {lineno}: checksum mismatch for {shape} n={n}")
        records.append(rec)
        block = None
    if block:
        raise FixtureError("unterminated record at end of file")
    return records


def default_path():
    return resources.files("icflow") / "data" / "oracle_fixtures.txt"


def load(path=None):
    p = default_path() if path is None else Path(path)
    return parse(p.read_text())


def append_records(path, records):
    """Append new records; existing (shape, n) pairs are never rewritten."""
    path = Path(path)
    existing = parse(path.read_text()) if path.exists() else []
    seen = {(r.shape, r.n) for r in existing}
    new = [r for r in records if (r.shape, r.n) not in seen]
    write_header = not path.exists() or path.stat().st_size == 0
    with path.open("a") as fh:
        if write_header:
            fh.write(HEADER)
        for r in new:
            fh.write(r.render())
    return len(new)
