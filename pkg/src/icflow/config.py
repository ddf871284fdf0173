"""Run configuration files.

A run configuration is an INI document with the sections ``[shape]``,
``[grid]``, ``[flow]``, ``[suite]`` and ``[output]``.  Every key below has a
default except ``shape.variant``, ``shape.n`` and ``shape.k``.  Unknown
sections or keys are errors, reported with their line and column.

``[shape]``
    variant (sphere | ellipsoid | perturbed | tabulated), n, k,
    radius = 1.0, a = 1.0, b = 1.0, modes = "" (``m:eps;m:eps``),
    profile = "" (two-column ``phi rho`` text file, tabulated only)
``[grid]``
    mode = axisym, n_phi = 128, n_theta = "" (full2d only), order = 4
``[flow]``
    speed = normalized, dt_initial = 0.01, t_end = 1.0, cfl_safety = 0.3,
    max_steps = 1000000, record_every = 0.1, regrid_every = "",
    convexity_floor = 1e-8, starshape_floor = 1e-8,
    max_relative_change = 0.05, adaptive = true
``[suite]``
    suites = identity,inequality; ks = all (or ``shape`` or a list);
    ladder = auto (``n_phi/4, n_phi/2, n_phi``, rungs of at least 16) or a list;
    dt_probes = 1e-3,5e-4,2.5e-4; exact_tol = 1e-10; grid_tol = 1e-4;
    min_order = auto; threads = auto
``[output]``
    svg = true
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, IcflowError
from .flow import NORMALIZED, UNNORMALIZED, FlowConfig
from .shapes import AxisymEllipsoid, GridSpec, PerturbedSphere, Sphere, TabulatedProfile
from .verification import SuiteConfig

REQUIRED = object()
SECTIONS = ("shape", "grid", "flow", "suite", "output")
SUITES = ("identity", "inequality", "flow")


# ---- value codecs: (parse(text) -> value, format(value) -> text)

def _int(text):
    return int(text)


def _float(text):
    v = float(text)
    if not np.isfinite(v):
        raise ValueError("must be finite")
    return v


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


def _optional(parse, keyword=""):
    # empty text (or the keyword, e.g. "auto") means None
    def inner(text):
        return None if text in ("", keyword) else parse(text)
    return inner


def _list(parse):
    def inner(text):
        items = [t.strip() for t in text.split(",") if t.strip()]
        if not items:
            raise ValueError("expected a non-empty comma-separated list")
        return tuple(parse(t) for t in items)
    return inner


def _modes(text):
    if not text.strip():
        return ()
    out = []
    for item in text.split(";"):
        m, _, eps = item.partition(":")
        out.append((int(m), float(eps)))
    return tuple(out)


def _ks(text):
    return text if text in ("all", "shape") else _list(_int)(text)


def _suites(text):
    vals = _list(str)(text)
    bad = [v for v in vals if v not in SUITES]
    if bad:
        raise ValueError(f"unknown suite {bad[0]!r}; choose from {', '.join(SUITES)}")
    return vals


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ";".join(f"{m}:{format(e, '.17g')}" for m, e in value)
        return ",".join(_fmt(v) for v in value)
    return str(value)


SCHEMA = {
    "shape": {
        "variant": (_choice("sphere", "ellipsoid", "perturbed", "tabulated"), REQUIRED),
        "n": (_int, REQUIRED),
        "k": (_int, REQUIRED),
        "radius": (_float, 1.0),
        "a": (_float, 1.0),
        "b": (_float, 1.0),
        "modes": (_modes, ()),
        "profile": (str, ""),
    },
    "grid": {
        "mode": (_choice("axisym", "full2d"), "axisym"),
        "n_phi": (_int, 128),
        "n_theta": (_optional(_int), None),
        "order": (_int, 4),
    },
    "flow": {
        "speed": (_choice(NORMALIZED, UNNORMALIZED), NORMALIZED),
        "dt_initial": (_float, 0.01),
        "t_end": (_float, 1.0),
        "cfl_safety": (_float, 0.3),
        "max_steps": (_int, 1_000_000),
        "record_every": (_float, 0.1),
        "regrid_every": (_optional(_int), None),
        "convexity_floor": (_float, 1e-8),
        "starshape_floor": (_float, 1e-8),
        "max_relative_change": (_float, 0.05),
        "adaptive": (_bool, True),
    },
    "suite": {
        "suites": (_suites, ("identity", "inequality")),
        "ks": (_ks, "all"),
        "ladder": (_optional(_list(_int), "auto"), None),
        "dt_probes": (_list(_float), (1e-3, 5e-4, 2.5e-4)),
        "exact_tol": (_float, 1e-10),
        "grid_tol": (_float, 1e-4),
        "min_order": (_optional(_float, "auto"), None),
        "threads": (_optional(_int, "auto"), None),
    },
    "output": {
        "svg": (_bool, True),
    },
}

_AUTO_KEYS = {("suite", "ladder"), ("suite", "min_order"), ("suite", "threads")}


def _locate(text, section, key=None):
    """``(line, column)`` of a section header or of a key within it (1-based)."""
    if text is None:
        return None, None
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]*)\]", raw)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return lineno, raw.index("[") + 1
            continue
        if current == section and key is not None:
            m = re.match(r"(\s*)([^=:\s][^=:]*?)\s*[=:]", raw)
            if m and m.group(2).strip().lower() == key:
                return lineno, len(m.group(1)) + 1
    return None, None


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration: ``values[section][key]`` holds typed values."""

    values: dict
    source: str | None = None

    def __getitem__(self, section):
        return self.values[section]

    def _error(self, message, section, key=None):
        line, col = _locate(self.source, section, key)
        return ConfigError(message, line, col)

    def with_value(self, section, key, text):
        """Copy with one key replaced from its text form (used by sweeps)."""
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        parse, _ = SCHEMA[section][key]
        try:
            value = parse(text)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: {exc}") from None
        values = {s: dict(v) for s, v in self.values.items()}
        values[section][key] = value
        cfg = RunConfig(values, self.source)
        cfg.validate()
        return cfg

    # ---- builders

    def shape_spec(self):
        s = self["shape"]
        n = s["n"]
        try:
            if s["variant"] == "sphere":
                return Sphere(s["radius"], n=n)
            if s["variant"] == "ellipsoid":
                return AxisymEllipsoid(s["a"], s["b"], n=n)
            if s["variant"] == "perturbed":
                return PerturbedSphere(s["radius"], s["modes"], n=n)
            if not s["profile"]:
                raise ConfigError("tabulated shapes need shape.profile")
            data = np.loadtxt(s["profile"], ndmin=2)
            return TabulatedProfile(tuple(data[:, 0]), tuple(data[:, 1]), n=n)
        except ConfigError:
            raise
        except (IcflowError, ValueError, OSError) as exc:
            raise self._error(f"invalid shape: {exc}", "shape", "variant") from None

    def grid_spec(self):
        g = self["grid"]
        try:
            return GridSpec(g["mode"], g["n_phi"], g["n_theta"], g["order"])
        except ValueError as exc:
            raise self._error(f"invalid grid: {exc}", "grid", "n_phi") from None

    def flow_config(self):
        f = self["flow"]
        fields = {k: v for k, v in f.items() if k != "record_every"}
        try:
            return FlowConfig(n=self["shape"]["n"], k=self["shape"]["k"], **fields)
        except ValueError as exc:
            key = next((k for k in fields if k in str(exc)), None)
            raise self._error(str(exc), "flow" if key else "shape", key or "k") from None

    def ladder(self):
        lad = self["suite"]["ladder"]
        if lad is None:
            N = self["grid"]["n_phi"]
            lad = tuple(sorted({max(16, N // 4), max(16, N // 2), N}))
        return lad

    def suite_config(self):
        s = self["suite"]
        n, k = self["shape"]["n"], self["shape"]["k"]
        ks = None if s["ks"] == "all" else ((k,) if s["ks"] == "shape" else s["ks"])
        try:
            return SuiteConfig(
                shapes=(self.shape_spec(),), ns=(n,), ks=ks, ladder=self.ladder(),
                order=self["grid"]["order"], dt_probes=s["dt_probes"], exact_tol=s["exact_tol"],
                grid_tol=s["grid_tol"], min_order=s["min_order"], threads=s["threads"],
            )
        except ValueError as exc:
            raise self._error(f"invalid suite settings: {exc}", "suite") from None

    def validate(self):
        """Check cross-field constraints; raises :class:`ConfigError`."""
        n, k = self["shape"]["n"], self["shape"]["k"]
        if n < 3:
            raise self._error(f"shape.n must be >= 3, got {n}", "shape", "n")
        if not 1 <= k <= n - 1:
            raise self._error(f"shape.k must lie in the valid range 1..{n - 1} (n - 1), got {k}",
                              "shape", "k")
        if not self["flow"]["record_every"] > 0:
            raise self._error("flow.record_every must be positive", "flow", "record_every")
        self.shape_spec()
        self.grid_spec()
        self.flow_config()
        if self["grid"]["mode"] == "full2d":
            raise self._error("runs use axisym grids; full2d is available through the library only",
                              "grid", "mode")
        lad = self.ladder()
        if min(lad) < 16:
            raise self._error(f"grid ladder rungs must be >= 16 nodes, got {lad}", "suite", "ladder")
        ks = self["suite"]["ks"]
        if isinstance(ks, tuple) and any(not 1 <= x <= n - 1 for x in ks):
            raise self._error(f"suite.ks entries must lie in 1..{n - 1}", "suite", "ks")
        self.suite_config()
        return self

    # ---- serialization

    def dumps(self):
        """Fully resolved INI text; ``loads(cfg.dumps()).dumps() == cfg.dumps()``."""
        lines = []
        for section in SECTIONS:
            lines.append(f"[{section}]")
            for key in SCHEMA[section]:
                value = self.values[section][key]
                text = _fmt(value)
                if value is None and (section, key) in _AUTO_KEYS:
                    text = "auto"
                lines.append(f"{key} = {text}")
            lines.append("")
        return "\n".join(lines)


def loads(text):
    """Parse configuration text into a validated :class:`RunConfig`."""
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("text before the first [section] header", exc.lineno, 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, 1) from None
    except configparser.DuplicateOptionError as exc:
        line, col = _locate(text, exc.section, exc.option)
        raise ConfigError(f"duplicate key {exc.section}.{exc.option}", exc.lineno, col) from None
    except configparser.ParsingError as exc:
        lineno, raw = exc.errors[0]
        raise ConfigError(f"cannot parse {raw.strip()!r}", lineno, 1) from None
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            line, col = _locate(text, section)
            raise ConfigError(f"unknown section [{section}]; expected one of {', '.join(SECTIONS)}",
                              line, col)
    for section, keys in SCHEMA.items():
        got = dict(parser[section]) if parser.has_section(section) else {}
        for key in got:
            if key not in keys:
                line, col = _locate(text, section, key)
                raise ConfigError(f"unknown key {section}.{key}", line, col)
        values[section] = {}
        for key, (parse, default) in keys.items():
            if key not in got:
                if default is REQUIRED:
                    line, col = _locate(text, section)
                    raise ConfigError(f"missing required key {section}.{key}", line, col)
                values[section][key] = default
                continue
            try:
                values[section][key] = parse(got[key].strip())
            except ValueError as exc:
                line, col = _locate(text, section, key)
                raise ConfigError(f"{section}.{key} = {got[key]!r}: {exc}", line, col) from None
    return RunConfig(values, text).validate()


def load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text)
