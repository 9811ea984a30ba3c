"""Command line front end: ``wiener-chaos {solve,verify,stransform,growth}``.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import oracles
from .chaos_space import WeightPair, decay_report, s_evaluate, write_series_csv
from .config import ConfigError, RunConfig, load_config
from .errors import DomainError, NumericalError, RegimeError
from .parabolic1d import check_regime, solve_h
from .propagator import PropagatorConfig, solve_system

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
log = logging.getLogger("wiener_chaos")


def _write_table(path: Path, columns, rows, header: str | None, fmt: str) -> Path:
    """Write rows as CSV (with a '# header' line) or as a JSON mirror."""
    if fmt == "json":
        path = path.with_suffix(".json")
        doc = {"header": header, "columns": list(columns),
               "rows": [dict(zip(columns, r)) for r in rows]}
        path.write_text(json.dumps(doc, indent=1, default=_jsonable) + "\n")
        return path
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(type(v))


def _formats(cfg: RunConfig, override: str | None):
    return [override] if override else list(dict.fromkeys(cfg.outputs.formats))


def _propagator_config(cfg: RunConfig, **overrides) -> PropagatorConfig:
    coeffs, v, f, g = cfg.problem()
    kw = dict(N=cfg.truncation.N, K=cfg.truncation.K, grid=cfg.spatial_grid(),
              interval=cfg.interval(), coeffs=coeffs, v=v, f=f, g=g,
              record=cfg.outputs.record, spatial_norm=cfg.outputs.spatial_norm,
              integrated=cfg.outputs.integrated)
    kw.update(overrides)
    return PropagatorConfig(**kw)


def run_solve(cfg: RunConfig, out: Path, fmt: str | None = None) -> int:
    pcfg = _propagator_config(cfg)
    pcfg.coeffs.check(pcfg.grid, pcfg.interval)
    res = solve_system(pcfg)
    header = cfg.header()
    weights = [WeightPair(p, q) for p, q in cfg.weights]
    out.mkdir(parents=True, exist_ok=True)
    oracle = cfg.is_paper_example() and cfg.grid.mode == "periodic"
    level_rows = []
    for t in res.times:
        S = res.level_norms(t)
        for n, s in enumerate(S):
            o = oracles.growth_oracle(n, t).value if oracle and n <= 12 else math.nan
            err = abs(s - o) / o if oracle and o > 0 else math.nan
            level_rows.append((n, float(t), float(s), o, err))
    table = res.integrated_table() if cfg.outputs.integrated else res.norm_table()
    decay = decay_report(table, res.N, weights)
    weighted_rows = [(r.weights.p, r.weights.q, r.weighted_norm, r.last_change,
                      float(np.max(r.ratios)) if r.ratios.size else math.nan, r.decays)
                     + tuple(r.contributions) for r in decay]
    for f in _formats(cfg, fmt):
        if f == "csv":
            write_series_csv(out / "coefficient_norms.csv", table, weights, header)
        else:
            _write_table(out / "coefficient_norms", ["index", "order", "norm_sq"],
                         [(a.to_string(), a.order, v) for a, v in sorted(table.items())],
                         header, "json")
        _write_table(out / "level_norms.csv", ["n", "t", "S_n", "oracle_value", "relative_error"],
                     level_rows, header, f)
        _write_table(out / "weighted_norms.csv",
                     ["p", "q", "weighted_norm", "last_level_share", "max_ratio_n_ge_4", "decays"]
                     + [f"c_{n}" for n in range(res.N + 1)], weighted_rows, header, f)
    print(f"solved {len(res.indices)} coefficients ({res.info['path']} path); outputs in {out}")
    return EXIT_OK


def run_stransform(cfg: RunConfig, out: Path, fmt: str | None = None) -> int:
    h = cfg.h_function()
    if h.K > cfg.truncation.K:
        raise DomainError(f"h has {h.K} coefficients but truncation K={cfg.truncation.K}")
    pcfg = _propagator_config(cfg, record="final", store=True, integrated=False)
    check_regime(h, pcfg.coeffs, pcfg.interval, pcfg.grid)
    res = solve_system(pcfg)
    T = pcfg.interval.T
    u_chaos = s_evaluate(res.series.at_time(T), h)
    u_h = solve_h(pcfg.v, pcfg.f, pcfg.g, h, pcfg.coeffs, pcfg.interval, pcfg.grid).at(T)
    diff = float(np.linalg.norm(u_chaos - u_h) / max(np.linalg.norm(u_h), 1e-300))
    out.mkdir(parents=True, exist_ok=True)
    header = cfg.header() + f" h={','.join(f'{c:g}' for c in h.coeffs)}"
    rows = [(float(x), float(a), float(b), float(a - b))
            for x, a, b in zip(pcfg.grid.x, u_chaos, u_h)]
    for f in _formats(cfg, fmt):
        _write_table(out / "s_transform.csv", ["x", "s_evaluate", "solve_h", "difference"],
                     rows, header, f)
        _write_table(out / "s_transform_summary.csv", ["t", "relative_l2_difference"],
                     [(T, diff)], header, f)
    print(f"relative L2 difference at t={T:g}: {diff:.3e}")
    return EXIT_OK


def run_growth(cfg: RunConfig | None, out: Path | None, times, n_max: int,
               fmt: str | None = None) -> int:
    rows = []
    for t in times:
        for n in range(n_max + 1):
            g = oracles.growth_oracle(n, t)
            rows.append((n, t, g.value, g.ratio, g.ratio_printed))
    for r in rows:
        print(f"n={r[0]:2d} t={r[1]:g}  S_n={r[2]:.10g}  C(n)={r[3]:.6g}")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        header = cfg.header() if cfg else f"growth oracle n<={n_max}"
        for f in ([fmt] if fmt else (cfg.outputs.formats if cfg else ["csv"])):
            _write_table(out / "growth_oracle.csv", ["n", "t", "S_n", "C_n", "C_n_printed_base"],
                         rows, header, f)
    return EXIT_OK


def run_verify(suite: str, out: Path | None, seed: int | None, fmt: str | None = None) -> int:
    from . import verify
    checks = verify.SUITES[suite]
    results = []
    for check in checks:
        kwargs = {"seed": seed} if seed is not None and check is verify.check_orthonormality else {}
        if seed is not None and check is verify.check_parseval:
            kwargs = {"mc": oracles.McConfig(seed=seed)}
        r = check(**kwargs)
        print(r.line(), flush=True)
        results.append(r)
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        rows = [(f"{r.name}: {q}", c, o, tol, ok) for r in results for q, c, o, tol, ok in r.rows]
        if fmt == "json":
            _write_table(out / "oracle_report", ["quantity", "computed", "oracle",
                                                 "standard_error_or_tolerance", "pass"],
                         rows, f"verify suite={suite}", "json")
        else:
            oracles.write_oracle_report(out / "oracle_report.csv", rows, f"verify suite={suite}")
    return EXIT_OK if n_fail == 0 else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    from .verify import SUITES
    p = argparse.ArgumentParser(prog="wiener-chaos", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required):
        sp.add_argument("--config", required=config_required, type=Path, help="JSON run config")
        sp.add_argument("--out", type=Path, help="output directory (overrides outputs.dir)")
        sp.add_argument("--format", choices=("csv", "json"), help="output format")

    common(sub.add_parser("solve", help="solve the propagator system"), True)
    common(sub.add_parser("stransform", help="compare the S-transform with the h-equation"), True)
    g = sub.add_parser("growth", help="tabulate the growth-law oracle")
    common(g, False)
    g.add_argument("--t", type=float, action="append", help="time(s); default 0.5 and 1")
    g.add_argument("--n-max", type=int, default=8)
    v = sub.add_parser("verify", help="run acceptance suites")
    v.add_argument("--suite", default="all", choices=sorted(SUITES))
    v.add_argument("--seed", type=int, help="Monte Carlo seed")
    v.add_argument("--out", type=Path)
    v.add_argument("--format", choices=("csv", "json"))
    for sp in (sub.choices["solve"], sub.choices["stransform"]):
        sp.add_argument("--seed", type=int, help="Monte Carlo seed (recorded in the config hash)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = None
        if getattr(args, "config", None) is not None:
            cfg = load_config(args.config)
            if getattr(args, "seed", None) is not None:
                cfg.mc.seed = args.seed
        out = args.out if args.out is not None else (Path(cfg.outputs.dir) if cfg else None)
        if args.command == "solve":
            return run_solve(cfg, out, args.format)
        if args.command == "stransform":
            return run_stransform(cfg, out, args.format)
        if args.command == "growth":
            if args.n_max < 0 or args.n_max > 12:
                raise ConfigError("--n-max must lie in 0..12")
            times = args.t or ([cfg.time.T] if cfg else [0.5, 1.0])
            return run_growth(cfg, out, times, args.n_max, args.format)
        return run_verify(args.suite, args.out, args.seed, args.format)
    except (ConfigError, DomainError) as exc:
        if isinstance(exc, RegimeError):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RegimeError as exc:
        d = exc.diagnostics
        print(f"error: {exc}\nadmissible bound: a + h(t)*rho >= {d.get('floor'):.6g}",
              file=sys.stderr)
        return EXIT_NUMERIC
    except NumericalError as exc:
        print(f"numerical failure: {exc} {exc.diagnostics or ''}".rstrip(), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
