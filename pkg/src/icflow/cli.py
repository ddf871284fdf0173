"""Command-line front end: ``icflow verify | flow | sweep``.

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 terminal
flow error (the partial series is still written).

Report files written to ``--out``:

``summary.txt``
    resolved configuration followed by one line per verdict.
``residuals.csv`` (verify)
    ``check, fixture, n, k, N, dt_probe, residual, tau, order, status``; one
    row per verdict value (grid rung or time probe).
``series.csv`` (flow)
    ``t, Qk, I_H[0] .. I_H[n-1], I_r2H, vol, drift, min_u, min_Hk`` where
    ``I_r2H`` is the ``r^2 H_k`` integral.
``qk.svg`` (flow)
    Q_k against t with the round-sphere reference line.
``sweep.csv`` (sweep)
    the rows of every branch, prefixed by the swept ``value``.

All numbers are written with 17 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import config as config_mod
from .errors import ConfigError, FlowError, IcflowError
from .flow import run
from .integrals import sphere_q_value
from .verification import (
    FAIL, FlowFixture, run_flow_suite, run_identity_suite, run_inequality_suite, worker_count,
)

log = logging.getLogger("icflow")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_FLOW = 0, 1, 2, 3
RESIDUAL_COLUMNS = ("check", "fixture", "n", "k", "N", "dt_probe", "residual", "tau", "order", "status")


def _num(x):
    if x is None:
        return ""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def series_columns(n):
    return ("t", "Qk", *(f"I_H[{j}]" for j in range(n)), "I_r2H", "vol", "drift", "min_u", "min_Hk")


def series_rows(records, n, k):
    for r in records:
        fs = r.functionals
        yield (r.t, r.Qk, *(fs.I_H[j] for j in range(n)), fs.I_r2H[k], fs.vol,
               r.conservation_drift, r.min_u, r.min_Hk)


def residual_rows(verdicts, finest):
    for v in verdicts:
        if v.check.startswith("flow") or v.check.startswith("dissipation") or v.check == "rk4_order":
            continue
        tol = dict(v.tolerances)
        tau = tol.get("tau")
        variation = v.check.startswith("variation")
        for x, res in v.values:
            N, dt = (finest, x) if variation else (x, None)
            yield (v.check, v.fixture, v.n, "" if v.k is None else v.k, N, _num(dt), _num(res),
                   _num(tau), _num(v.order) if v.order is not None else "", v.status)


def _csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([c if isinstance(c, str) else _num(c) for c in row])
    return buf.getvalue()


def _summary(cfg, command, verdicts=(), extra=()):
    lines = [f"# icflow {command}", "", "## config", cfg.dumps().rstrip(), "", "## verdicts"]
    for v in verdicts:
        order = "" if v.order is None else f" order={v.order:.3g}"
        k = "" if v.k is None else f" k={v.k}"
        msg = f"  {v.message}" if v.message else ""
        lines.append(f"{v.status:7s} {v.check} [{v.fixture}{k}]{order}{msg}")
    counts = {s: sum(v.status == s for v in verdicts) for s in ("pass", "fail", "skipped")}
    lines += ["", "## totals", *(f"{s} = {c}" for s, c in counts.items()), *extra, ""]
    return "\n".join(lines)


def _plot_svg(records, n, k, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r.t for r in records], [r.Qk for r in records], marker=".", label="$Q_k(t)$")
    ax.axhline(sphere_q_value(n, k), color="k", ls="--", lw=1, label="round sphere")
    ax.set_xlabel("t")
    ax.set_ylabel("$Q_k$")
    ax.set_title(f"n = {n}, k = {k}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


class Outcome:
    """Result of one command: exit code plus files to write (name -> text or callable)."""

    def __init__(self, code, files, rows=(), columns=()):
        self.code = code
        self.files = files
        self.rows = list(rows)
        self.columns = columns


def do_verify(cfg):
    suite = cfg.suite_config()
    wanted = cfg["suite"]["suites"]
    verdicts = []
    if "identity" in wanted:
        verdicts += run_identity_suite(suite)
    if "inequality" in wanted:
        verdicts += run_inequality_suite(suite)
    if "flow" in wanted:
        f = cfg["flow"]
        fx = FlowFixture(cfg.shape_spec(), cfg["shape"]["k"], n_phi=cfg["grid"]["n_phi"],
                         t_end=f["t_end"], record_every=f["record_every"], limit_tol=None)
        verdicts += run_flow_suite(suite, (fx,))
    rows = list(residual_rows(verdicts, suite.ladder[-1]))
    code = EXIT_FAIL if any(v.status == FAIL for v in verdicts) else EXIT_OK
    files = {
        "summary.txt": _summary(cfg, "verify", verdicts),
        "residuals.csv": _csv_text(RESIDUAL_COLUMNS, rows),
    }
    return Outcome(code, files, rows, RESIDUAL_COLUMNS)


def do_flow(cfg):
    n, k = cfg["shape"]["n"], cfg["shape"]["k"]
    fc = cfg.flow_config()
    code, error = EXIT_OK, None
    try:
        records = run(cfg.shape_spec(), cfg.grid_spec(), fc, cfg["flow"]["record_every"])
    except FlowError as exc:
        records, code = exc.records, EXIT_FLOW
        error = f"terminal flow error: {type(exc).__name__} at t = {_num(exc.t)}: {exc}"
    columns = series_columns(n)
    rows = list(series_rows(records, n, k))
    limit = sphere_q_value(n, k)
    extra = [f"records = {len(records)}", f"sphere_Qk = {_num(limit)}"]
    if records:
        extra += [f"final_t = {_num(records[-1].t)}", f"final_Qk = {_num(records[-1].Qk)}",
                  f"final_rel_gap = {_num(records[-1].Qk / limit - 1)}"]
    if error:
        extra.append(error)
    files = {"summary.txt": _summary(cfg, "flow", (), extra), "series.csv": _csv_text(columns, rows)}
    if cfg["output"]["svg"] and records:
        files["qk.svg"] = lambda path: _plot_svg(records, n, k, path)
    return Outcome(code, files, rows, columns)


def _write(out, files):
    for name, content in files.items():
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        if callable(content):
            content(path)
        else:
            path.write_text(content)


def parse_axis(spec, cfg):
    """``section.key=v1,v2`` (or a bare key unique across sections) -> (section, key, values)."""
    name, sep, rhs = spec.partition("=")
    if not sep:
        raise ConfigError(f"--axis needs key=v1,v2,...; got {spec!r}")
    name = name.strip().lower()
    if "." in name:
        section, key = name.split(".", 1)
    else:
        hits = [s for s, keys in config_mod.SCHEMA.items() if name in keys]
        if len(hits) != 1:
            raise ConfigError(f"unknown or ambiguous sweep key {name!r}; use section.key")
        section, key = hits[0], name
    if section not in config_mod.SCHEMA or key not in config_mod.SCHEMA[section]:
        raise ConfigError(f"unknown sweep key {section}.{key}")
    # modes use ';' internally, so sweep values are separated by ','
    values = [v.strip() for v in rhs.split(",") if v.strip()]
    if not values:
        raise ConfigError(f"empty value list for sweep key {section}.{key}")
    return section, key, values


def do_sweep(cfg, axis, command):
    section, key, values = parse_axis(axis, cfg)
    branches = [cfg.with_value(section, key, v) for v in values]
    fn = do_verify if command == "verify" else do_flow
    with ThreadPoolExecutor(max_workers=worker_count(cfg["suite"]["threads"])) as pool:
        outcomes = list(pool.map(fn, branches))
    columns = ("value", *outcomes[0].columns)
    rows = [(v, *row) for v, o in zip(values, outcomes) for row in o.rows]
    files = {"sweep.csv": _csv_text(columns, rows)}
    for v, o in zip(values, outcomes):
        for name, content in o.files.items():
            files[f"{key}={v}/{name}"] = content
    lines = [f"# icflow sweep {section}.{key} ({command})", ""]
    lines += [f"{key} = {v}: exit {o.code}" for v, o in zip(values, outcomes)]
    files["summary.txt"] = "\n".join(lines) + "\n"
    codes = [o.code for o in outcomes]
    code = max(codes) if EXIT_FLOW not in codes else EXIT_FLOW
    return Outcome(code, files, rows, columns)


def build_parser():
    p = argparse.ArgumentParser(prog="icflow", description="Verify curvature identities and "
                                "inequalities for star-shaped hypersurfaces and run normalized "
                                "inverse curvature flows.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("verify", "run the identity and inequality suites"),
                        ("flow", "run one flow and write its diagnostics series"),
                        ("sweep", "repeat verify or flow over values of one config key")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="INI run configuration")
        sp.add_argument("--out", default="icflow-out", help="report directory (default: %(default)s)")
        sp.add_argument("--quiet", action="store_true", help="suppress console output")
        if name == "sweep":
            sp.add_argument("--axis", required=True, help="section.key=v1,v2,... to sweep")
            sp.add_argument("--command", dest="branch", choices=("verify", "flow"), default="verify",
                            help="command run per value (default: %(default)s)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = config_mod.load(args.config)
        if args.command == "verify":
            outcome = do_verify(cfg)
        elif args.command == "flow":
            outcome = do_flow(cfg)
        else:
            outcome = do_sweep(cfg, args.axis, args.branch)
    except ConfigError as exc:
        print(f"icflow: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IcflowError as exc:
        print(f"icflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    _write(out, outcome.files)
    log.info("%s: exit %d, reports in %s", args.command, outcome.code, out)
    return outcome.code


if __name__ == "__main__":
    sys.exit(main())
