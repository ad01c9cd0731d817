"""Command line driver: ``gtrace {catalog,trace,mellin,screw} [options]``.

Each run writes ``<command>.json`` (versioned envelope with the config
hash), CSV sweep tables and PNG figures into ``--out``.  Exit codes: 0 ok,
2 usage, 3 precondition, 4 numerical tolerance.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics, geometry, mellin, operator_core, plotting, reports, screw
from .errors import GTraceError, UsageError

COMMANDS = ("catalog", "trace", "mellin", "screw")
EXIT_CODES = {"usage": 2, "precondition": 3, "tolerance": 4}
SWEEPS = {
    "catalog": ("classify", "condition1"),
    "trace": ("spectrum", "localization", "transverse"),
    "mellin": ("knorm", "schur", "decay", "equivalence"),
    "screw": ("homogeneity", "schur", "continuity", "fiber"),
}
OPTION_KEYS = ("scenario", "seed", "out", "resolution", "alpha", "s", "sweep", "rho", "phi", "eps", "eta", "t")


def parse_range(text: str, default_count: int = 25) -> np.ndarray:
    """``lo..hi[:count]`` or a single number.

    Spacing is geometric when both ends are positive and differ by at least
    a factor of ten, otherwise linear.
    """
    text = str(text).strip()
    if ".." not in text:
        try:
            return np.array([float(text)])
        except ValueError as exc:
            raise UsageError(f"bad range {text!r}") from exc
    body, _, count = text.partition(":")
    lo_s, _, hi_s = body.partition("..")
    try:
        lo, hi = float(lo_s), float(hi_s)
        n = int(count) if count else default_count
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}") from exc
    if n < 1:
        raise UsageError("range count must be positive")
    if n == 1:
        return np.array([lo])
    if lo > 0 and hi > 0 and max(lo, hi) / min(lo, hi) >= 10:
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


@dataclass
class ScenarioConfig:
    command: str
    options: dict = field(default_factory=dict)

    def get(self, key, default=None):
        v = self.options.get(key)
        return default if v is None else v

    @property
    def out(self) -> Path:
        return Path(self.get("out", "gtrace-out"))

    def as_dict(self) -> dict:
        d = {"command": self.command}
        d.update({k: v for k, v in sorted(self.options.items()) if v is not None and k != "out"})
        return d


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gtrace", description="Traces of G-operators: catalogs, sweeps and diagnostics.")
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with defaults for any option")
    p.add_argument("--scenario", help="scenario id (see `gtrace catalog`)")
    p.add_argument("--seed", type=int, help="seed for stochastic sweeps")
    p.add_argument("--out", help="output directory (default gtrace-out)")
    p.add_argument("--resolution", type=int, help="grid size: modes, Nystrom nodes or scan points")
    p.add_argument("--alpha", type=float, help="tilt angle of the plane (mellin, trace)")
    p.add_argument("--s", type=float, help="Sobolev index")
    p.add_argument("--sweep", help="sweep name; depends on the command")
    for name in ("rho", "phi", "eps", "eta", "t"):
        p.add_argument(f"--{name}", help="value or range lo..hi[:count]")
    return p


def load_config(argv) -> ScenarioConfig:
    args = build_parser().parse_args(argv)
    opts = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text() or "{}")
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(data) - set(OPTION_KEYS) - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        opts.update(data)
    for k in OPTION_KEYS:
        v = getattr(args, k)
        if v is not None:
            opts[k] = v
    command = args.command or opts.pop("command", None)
    opts.pop("command", None)
    if command not in COMMANDS:
        raise UsageError("a command is required: " + ", ".join(COMMANDS))
    cfg = ScenarioConfig(command, opts)
    sweep = cfg.get("sweep", SWEEPS[command][0])
    if sweep not in SWEEPS[command]:
        raise UsageError(f"unknown sweep {sweep!r} for {command}; choose from {SWEEPS[command]}")
    cfg.options["sweep"] = sweep
    return cfg


def _finish(cfg: ScenarioConfig, result: dict) -> Path:
    return reports.write_json(cfg.out / f"{cfg.command}.json", reports.envelope(cfg.command, cfg.as_dict(), result))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def run_catalog(cfg: ScenarioConfig) -> dict:
    sid = cfg.get("scenario", "all")
    ids = geometry.CATALOG_IDS if sid == "all" else [sid]
    out = cfg.out
    if cfg.get("sweep") == "condition1":
        if cfg.get("seed") is None:
            raise UsageError("--seed is required for the condition1 sweep")
        if len(ids) != 1:
            raise UsageError("the condition1 sweep needs one --scenario")
        sc = geometry.get_scenario(ids[0])
        eps = parse_range(cfg.get("eps", "0.5..0.00390625:8"))
        res = geometry.condition1_sweep(sc.action, sc.sub, sc.z, eps, seed=int(cfg.get("seed")))
        fit = geometry.fit_condition1(res)
        mono = geometry.monotone_within_noise(res)
        reports.write_csv(out / "condition1.csv", ["eps", "volume", "stderr"],
                          [(r.eps, r.volume, r.stderr) for r in res],
                          [("limit", fit["limit"]), ("monotone", mono)])
        plotting.line_plot(out / "condition1.png", [r.eps for r in res], {"vol": [r.volume for r in res]},
                           "eps", "vol(G_eps)", logx=True, title=sc.id)
        return {"scenario": sc.id, "fit": fit, "monotone_within_3sigma": mono,
                "volumes": [{"eps": r.eps, "volume": r.volume, "stderr": r.stderr, "vacuous": r.vacuous}
                            for r in res]}
    results = []
    for i in ids:
        rep = geometry.catalog_report(i, resolution=int(cfg.get("resolution", 201)))
        sc = geometry.get_scenario(i)
        entry = rep.to_json()
        entry["matches_expected"] = bool(geometry.descriptors_match(rep.x_g, sc.expected_x_g)
                                          and geometry.descriptors_match(rep.x_tilde_g, sc.expected_x_tilde_g))
        results.append(entry)
        plotting.points_plot(out / f"catalog_{sc.id}.png", rep.points, rep.labels, sc.id)
    reports.write_csv(out / "catalog.csv", ["scenario", "x_g", "x_tilde_g", "matches_expected"],
                      [(r["scenario"], r["x_g"]["type"], r["x_tilde_g"]["type"], r["matches_expected"])
                       for r in results])
    return {"scenarios": results}


def _trace_setup(cfg: ScenarioConfig):
    sid = cfg.get("scenario", "example2")
    if sid == "example2":
        spec, sub = operator_core.example2_setup(float(cfg.get("alpha", np.pi / 4)))
        return sid, spec, sub, [[0.0, 0.0]]
    sc = geometry.get_scenario(sid)
    return sc.id, operator_core.laplacian_inverse_spec(sc.action), sc.sub, None


def run_trace(cfg: ScenarioConfig) -> dict:
    out = cfg.out
    s = float(cfg.get("s", -0.5))
    sweep = cfg.get("sweep")
    if sweep == "transverse":
        sub = geometry.affine_subspace([0.0, 0.0], [[1.0, 0.0]])
        n = int(cfg.get("resolution", 32))
        modes = (n, 2 * n, 4 * n)
        ones = lambda xi: np.ones(xi.shape[:-1])
        tb = operator_core.transverse_bound_check(ones, sub, [0.0, 1.0], s, 0.0, modes)
        raw = operator_core.transverse_bound_check(ones, sub, [0.0, 1.0], s, 0.0, modes, window=0.0)
        reports.write_csv(out / "transverse.csv", ["modes", "improved", "naive", "no_integration_improved"],
                          list(zip(tb.modes, tb.improved, tb.naive, raw.improved)),
                          [("improved_variation", tb.variation()), ("naive_growth_min", min(tb.growth()))])
        plotting.line_plot(out / "transverse.png", tb.modes,
                           {"improved": tb.improved, "naive": tb.naive, "no integration": raw.improved},
                           "modes", "norm ratio", logx=True, logy=True)
        return {"modes": tb.modes, "improved": tb.improved, "naive": tb.naive,
                "improved_index": tb.improved_index, "naive_index": tb.naive_index,
                "improved_variation": tb.variation(), "naive_growth": tb.growth(),
                "no_integration_growth": raw.growth("improved")}
    sid, spec, sub, y = _trace_setup(cfg)
    n = int(cfg.get("resolution", 16 if sub.dim == 2 else 64))
    grid = operator_core.FourierGrid(sub.dim, n)
    op = operator_core.assemble_trace(spec, sub, grid, s)
    prof = diagnostics.singular_spectrum(op)
    reports.write_matrix(out / "trace_matrix.gtrm", op.matrix, grid.freqs, grid.freqs)
    reports.write_csv(out / "spectrum.csv", ["k", "sigma"], list(enumerate(prof.values, 1)),
                      [("tail_exponent", prof.exponent)])
    plotting.spectrum_plot(out / "spectrum.png", prof.values, sid)
    result = {"scenario": sid, "modes": n, "source_s": op.source_s, "target_s": op.target_s,
              "order": op.order, "sobolev_norm": op.sobolev_norm(),
              "singular_values": prof.values[:32], "tail_exponent": prof.exponent}
    if sweep == "localization":
        coarse = operator_core.assemble_trace(spec, sub, operator_core.FourierGrid(sub.dim, n // 2), s)
        if y is not None:
            cut = diagnostics.radial_cutoff(0.6)
            v = diagnostics.localization_test([coarse, op], cut, y)
        else:
            v = diagnostics.localization_test([coarse, op], lambda p: np.ones(len(p)))
        result["localization"] = v.to_dict()
    return result


def _slope_rows(rhos, norms):
    fits = []
    for name, sel in (("slope_small", rhos <= 0.1), ("slope_large", rhos >= 10),
                      ("slope_near_one", (np.abs(rhos - 1) >= 1e-4) & (np.abs(rhos - 1) <= 1e-2))):
        if sel.sum() >= 3:
            x = rhos[sel] if name != "slope_near_one" else np.abs(rhos[sel] - 1)
            fits.append((name, mellin.fit_slope(x, norms[sel])))
    return fits


def run_mellin(cfg: ScenarioConfig) -> dict:
    out = cfg.out
    mcfg = mellin.TiltConfig(float(cfg.get("alpha", np.pi / 4)), float(cfg.get("s", -0.5)))
    m = int(cfg.get("resolution", 32))
    sweep = cfg.get("sweep")
    if sweep == "knorm":
        rhos = parse_range(cfg.get("rho", "1e-3..1e3:25"))
        skipped = [float(r) for r in rhos if abs(r - 1) < 1e-12 or r <= 0]
        rhos = np.array([r for r in rhos if float(r) not in skipped])
        norms = mellin.norm_sweep(mcfg, rhos, m)
        fits = _slope_rows(rhos, norms)
        reports.write_csv(out / "knorm.csv", ["rho", "norm"], list(zip(rhos, norms)), fits)
        plotting.line_plot(out / "knorm.png", rhos, {"||K(rho)||": norms}, "rho", "norm", logx=True, logy=True)
        return {"rho": rhos, "norm": norms, "fits": dict(fits), "skipped": skipped}
    if sweep == "schur":
        rhos = parse_range(cfg.get("rho", "1e-2..1e2:9"))
        rows = [(r, *mellin.schur_sup(mcfg, float(r))) for r in rhos if abs(r - 1) > 1e-12]
        reports.write_csv(out / "schur.csv", ["rho", "sup_int_domega", "sup_int_dpsi"], rows)
        plotting.line_plot(out / "schur.png", [r[0] for r in rows],
                           {"int dω": [r[1] for r in rows], "int dψ": [r[2] for r in rows]},
                           "rho", "Schur integral", logx=True, logy=True)
        return {"rows": rows}
    if sweep == "decay":
        ts = parse_range(cfg.get("t", "0..40:5"))
        table = mellin.MellinTable(mcfg, m)
        resid = mellin.contour_residual(table, (-1.5, 0.5, -1.0, 1.0))
        dec = mellin.decay_table(table, -0.5, ts)
        reports.write_csv(out / "decay.csv", ["t", "norm"], dec, [("contour_residual", resid)])
        plotting.line_plot(out / "decay.png", [d[0] for d in dec], {"||K^(-1/2+it)||": [d[1] for d in dec]},
                           "t", "norm", logy=True)
        return {"contour_residual": resid, "decay": dec}
    r, om = mellin.output_grid()
    rows = []
    for i, f in enumerate(mellin.reference_fields()):
        for res in (1, 2):
            a = mellin.trace_direct_eq1(mcfg, f, r, om, res)
            b = mellin.trace_via_mellin_eq2(mcfg, f, r, om, res)
            rows.append((i, res, mellin.rel_l2(a, b)))
    reports.write_csv(out / "equivalence.csv", ["field", "resolution", "rel_l2"], rows)
    return {"rows": rows}


def run_screw(cfg: ScenarioConfig) -> dict:
    out = cfg.out
    s = float(cfg.get("s", -0.5))
    sweep = cfg.get("sweep")
    if sweep == "homogeneity":
        f = lambda z: np.exp(-z ** 2 / 4) * np.cos(z)
        xi = np.linspace(-5, 5, 9)
        rows = [(lam, phi, eta, screw.homogeneity_residual(screw.ScrewSymbol(phi, eta, s), lam, f, xi))
                for lam in (0.5, 2.0, 7.0) for phi in (0.3, 1.2, 2.5) for eta in (0.5, 1.0, 3.0)]
        worst = max(r[3] for r in rows)
        reports.write_csv(out / "homogeneity.csv", ["lambda", "phi", "eta", "residual"], rows, [("max", worst)])
        return {"max_residual": worst, "rows": rows}
    if sweep == "schur":
        phis = parse_range(cfg["phi"]) if cfg.get("phi") else screw.decade_phis()
        tab = screw.schur_bounds(s, phis)
        var = screw.decade_variation(tab) if cfg.get("phi") is None else None
        reports.write_csv(out / "schur.csv", ["phi", "row_sup", "col_sup"],
                          list(zip(tab.phis, tab.row_sup, tab.col_sup)),
                          [("decade_variation", var)] if var is not None else [])
        plotting.line_plot(out / "schur.png", tab.phis, {"row": tab.row_sup, "column": tab.col_sup},
                           "phi", "Schur integral sup", logx=True)
        return {"s": s, "majorant": screw.majorant(s), "decade_variation": var,
                "phi": tab.phis, "row_sup": tab.row_sup, "col_sup": tab.col_sup}
    if sweep == "continuity":
        phis = parse_range(cfg.get("phi", f"{np.pi / 4}..{3 * np.pi / 4}:9"))
        eta = float(cfg.get("eta", 1.0))
        d = screw.continuity_scan(eta, s, phis)
        near = screw.halving_ratios_near_zero(eta, s)
        reg = screw.halving_ratio_regular(eta, s, np.pi / 4, 3 * np.pi / 4)
        reports.write_csv(out / "continuity.csv", ["phi_left", "phi_right", "difference"],
                          list(zip(phis[:-1], phis[1:], d)),
                          [("halving_ratio_regular", reg), ("halving_ratio_near_zero_last", near[-1])])
        if len(d):
            plotting.line_plot(out / "continuity.png", 0.5 * (phis[:-1] + phis[1:]), {"diff": d},
                               "phi", "||A_(i+1) - A_i||")
        return {"differences": d, "halving_ratio_regular": reg, "halving_ratios_near_zero": near,
                "discontinuity_flagged": bool(near[-1] > 0.9)}
    etas = [int(round(e)) for e in parse_range(cfg.get("eta", "0..16:17"))]
    rows = []
    for e in etas:
        b = screw.fiber_trace(e, s)
        nrm = b.weighted_norm()
        rows.append((e, nrm, e * nrm, b.meta["bounded"]))
        if len(etas) <= 4:
            reports.write_matrix(out / f"fiber_{e}.gtrm", b.matrix, b.grid.mids, b.grid.mids)
    reports.write_csv(out / "fiber.csv", ["eta", "weighted_norm", "eta_times_norm", "bounded"], rows)
    plotting.line_plot(out / "fiber.png", [r[0] for r in rows if r[0] > 0],
                       {"||B(eta)||": [r[1] for r in rows if r[0] > 0]}, "eta", "weighted norm",
                       logx=True, logy=True)
    return {"rows": rows}


RUNNERS = {"catalog": run_catalog, "trace": run_trace, "mellin": run_mellin, "screw": run_screw}


def run_scenario(cfg: ScenarioConfig) -> Path:
    result = RUNNERS[cfg.command](cfg)
    return _finish(cfg, result)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    out = None
    try:
        cfg = load_config(argv)
        out = cfg.out
        path = run_scenario(cfg)
        print(path)
        return 0
    except GTraceError as exc:
        code = EXIT_CODES.get(exc.category, 1)
        err = {"schema": reports.SCHEMA, "error": {"category": exc.category, "type": type(exc).__name__,
                                                   "message": str(exc)}}
        if out is not None:
            reports.write_json(out / "error.json", err)
        print(json.dumps(err), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
