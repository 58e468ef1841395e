"""
Command-line interface.

Every subcommand takes an optional ``--config`` JSON file; explicit flags
override its fields.  Exit codes: 0 success, 2 validation error,
3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
import hashlib
import json
import logging
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .core import InitialConditions, ModelParams, Panel, PanelKind, make_rng
from .diagnostics import panel_diagnostics
from .inversion import InversionError, NewtonOptions, invert_panel
from .io import (
    fmt,
    read_panel_csv,
    read_params_json,
    read_weights_csv,
    write_edge_list,
    write_json,
    write_panel_csv,
    write_weights_csv,
)
from .likelihood import FitOptions, fit_qmle
from .mc import McConfig, McFailureError, lattice_weights, resolve_threads, run_bias_rmse, run_invertibility_study
from .meanmodel import fit_sdpd
from .moments import MomentOrder, closed_moments_theta_only, general_moments_quadrature, nu_moments
from .networks import correlation_distance, euclidean_distance, grid_contiguity, knn_weights, piccolo_distance, row_standardize
from .process import simulate

__all__ = ["ReplaceNormal", "Reject", "StageError", "ingest_returns", "main", "pipeline_run"]

log = logging.getLogger("spegarch")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage {stage!r} failed: {exc}")
        self.stage = stage
        self.cause = exc


# -- ingestion -----------------------------------------------------------------


@dataclass(frozen=True)
class ReplaceNormal:
    """Replace exact zeros by N(0, sd^2) draws."""

    sd: float = 0.01


@dataclass(frozen=True)
class Reject:
    """Refuse panels containing exact zeros."""


def _zero_policy(spec) -> ReplaceNormal | Reject:
    if isinstance(spec, (ReplaceNormal, Reject)):
        return spec
    if spec is None:
        return ReplaceNormal()
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind", "replace_normal").lower()
    if kind in ("replace_normal", "replacenormal", "replace"):
        return ReplaceNormal(float(spec.get("sd", 0.01)))
    if kind == "reject":
        return Reject()
    raise ValueError(f"unknown zero policy {kind!r}")


def ingest_returns(path, zero_policy=ReplaceNormal(), seed: int = 0) -> tuple[Panel, int]:
    """
    Read a returns CSV (header of asset names, one row per period).

    Returns
    -------
    panel : Panel
    replaced : int
        Number of zero cells replaced.

    Raises
    ------
    ValueError
        Ragged rows, non-numeric cells, NaN, or zeros under ``Reject``.
    """
    policy = _zero_policy(zero_policy)
    panel = read_panel_csv(path, PanelKind.RETURNS)
    vals = panel.values.copy()
    zeros = np.argwhere(vals == 0)
    if len(zeros) == 0:
        return panel, 0
    if isinstance(policy, Reject):
        i, t = zeros[0]
        raise ValueError(f"zero return at row {t + 2}, column {panel.column_names()[i]!r}")
    rng = make_rng(seed)
    draws = rng.normal(0.0, policy.sd, size=len(zeros))
    # a draw of exactly zero is practically impossible but would defeat the purpose
    draws[draws == 0] = policy.sd
    vals[zeros[:, 0], zeros[:, 1]] = draws
    return Panel(vals, PanelKind.RETURNS, panel.names), len(zeros)


# -- helpers -------------------------------------------------------------------


def _load_config(path):
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _merge(cfg: dict, args, keys):
    out = dict(cfg)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _grid(spec):
    if isinstance(spec, (list, tuple)):
        return int(spec[0]), int(spec[1])
    r, c = str(spec).lower().split("x")
    return int(r), int(c)


def _weights(cfg):
    """W1 and W2 from files, or a Queen/Rook lattice given ``grid``."""
    if cfg.get("w1"):
        w1 = read_weights_csv(cfg["w1"])
        w2 = read_weights_csv(cfg["w2"]) if cfg.get("w2") else w1
        return w1, w2
    if cfg.get("grid"):
        return lattice_weights(*_grid(cfg["grid"]))
    raise ValueError("weights required: give --w1 [--w2] or --grid RxC")


def _params(cfg):
    p = cfg.get("params")
    if p is None:
        raise ValueError("--params is required")
    return ModelParams.from_dict(p) if isinstance(p, dict) else read_params_json(p)


def _init(cfg, n):
    v = cfg.get("init")
    if v is None:
        return None
    return InitialConditions(np.full(n, v["y0"]) if np.isscalar(v["y0"]) else v["y0"],
                             np.full(n, v["eps0"]) if np.isscalar(v["eps0"]) else v["eps0"])


def _out_dir(path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# -- commands ------------------------------------------------------------------


def cmd_simulate(args):
    cfg = _merge(_load_config(args.config), args, ["params", "w1", "w2", "grid", "t_len", "burn_in", "seed", "out"])
    p = _params(cfg)
    w1, w2 = _weights(cfg)
    seed = int(cfg.get("seed", 0))
    burn = int(cfg.get("burn_in", 50))
    sim = simulate(p, w1, w2, int(cfg.get("t_len", 100)), burn_in=burn, init=_init(cfg, w1.n), seed=seed)
    out = _out_dir(cfg.get("out", "."))
    write_panel_csv(sim.y, out / "y.csv")
    write_panel_csv(sim.eps, out / "eps.csv")
    write_panel_csv(sim.h, out / "h.csv")
    write_json(
        {"params": p.to_dict(), "seed": seed, "burn_in": burn, "t_len": sim.y.t_len,
         "stationarity": sim.report.to_dict(), "version": __version__},
        out / "manifest.json",
    )


def cmd_invert(args):
    cfg = _merge(_load_config(args.config), args, ["y", "params", "w1", "w2", "grid", "out"])
    p = _params(cfg)
    w1, w2 = _weights(cfg)
    y = read_panel_csv(cfg["y"])
    eps, diag = invert_panel(y, p, w1, w2, init=_init(cfg, y.n))
    out = _out_dir(cfg.get("out", "."))
    write_panel_csv(Panel(eps.values, PanelKind.INNOVATIONS, y.names), out / "eps_tilde.csv")
    with open(out / "inversion_diagnostics.csv", "w") as fh:
        fh.write("t,iterations,residual,log_abs_det,burn_in\n")
        for t, it, res, ld, b in diag.rows():
            fh.write(f"{t},{it},{fmt(res)},{fmt(ld)},{int(b)}\n")


def _fit_options(cfg) -> FitOptions:
    d = dict(cfg.get("fit_options", {}))
    for k in ("n_starts", "seed", "burn"):
        if cfg.get(k) is not None:
            d[k] = cfg[k]
    if cfg.get("two_theta"):
        d["two_theta"] = True
    return FitOptions.from_dict(d)


def _write_trace(res, path):
    with open(path, "w") as fh:
        fh.write("start_index,screen_negll,simplex_negll,quasi_newton_negll,converged\n")
        for idx, a, b, c, conv in res.trace:
            fh.write(f"{idx},{fmt(a)},{fmt(b)},{fmt(c)},{int(conv)}\n")


def cmd_estimate(args):
    cfg = _merge(_load_config(args.config), args, ["y", "w1", "w2", "grid", "n_starts", "seed", "two_theta", "out"])
    w1, w2 = _weights(cfg)
    y = read_panel_csv(cfg["y"])
    res = fit_qmle(y, w1, w2, init=_init(cfg, y.n), opts=_fit_options(cfg))
    out = _out_dir(cfg.get("out", "."))
    _write_trace(res, out / "trace.csv")
    d = res.to_dict()
    d["trace_path"] = "trace.csv"
    write_json(d, out / "estimate.json")


def cmd_moments(args):
    cfg = _merge(_load_config(args.config), args, ["params", "w1", "w2", "grid", "node", "node2", "kind", "trunc_tol", "quad_nodes", "out"])
    p = _params(cfg)
    w1, w2 = _weights(cfg)
    kind = cfg.get("kind", "nu")
    i = int(cfg.get("node", 1)) - 1
    j = cfg.get("node2")
    j = None if j is None else int(j) - 1
    tol = float(cfg.get("trunc_tol", 1e-15))
    if kind == "nu":
        doc = nu_moments(p, w1, w2).to_dict()
    elif kind == "closed":
        r = closed_moments_theta_only(p, w1, w2, i, j, tol)
        doc = {k: (None if v is None else v.to_dict()) for k, v in r.items()}
    elif kind == "quadrature":
        q = int(cfg.get("quad_nodes", 64))
        doc = {
            "mean_i": general_moments_quadrature(p, w1, w2, i, MomentOrder.FIRST, tol, q).to_dict(),
            "second_i": general_moments_quadrature(p, w1, w2, i, MomentOrder.SECOND, tol, q).to_dict(),
        }
        if j is not None and j != i:
            doc["cross_ij"] = general_moments_quadrature(p, w1, w2, i, MomentOrder.FIRST, tol, q, j=j).to_dict()
    else:
        raise ValueError(f"unknown moment kind {kind!r}")
    text = json.dumps(doc, indent=2, sort_keys=True)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text + "\n")
    else:
        print(text)


def cmd_meanfilter(args):
    cfg = _merge(_load_config(args.config), args, ["y", "w1", "w2", "grid", "out"])
    w1, w2 = _weights(cfg)
    y = read_panel_csv(cfg["y"])
    fit = fit_sdpd(y, w1, w2)
    out = _out_dir(cfg.get("out", "."))
    write_panel_csv(fit.residuals, out / "residuals.csv")
    write_json(fit.to_dict(), out / "meanfilter.json")


def _write_diagnostics(rep, out: Path):
    with open(out / "diagnostics_pvalues.csv", "w") as fh:
        fh.write("test,index,p_value\n")
        for name in ("lb_raw", "lb_squared", "moran_raw", "moran_squared"):
            for k, v in enumerate(getattr(rep, name), start=1):
                fh.write(f"{name},{k},{fmt(v)}\n")
    write_json(rep.to_dict(), out / "diagnostics_summary.json")


def cmd_diagnose(args):
    cfg = _merge(_load_config(args.config), args, ["residuals", "w1", "grid", "max_lag", "alpha", "out"])
    w1, _ = _weights(cfg)
    u = read_panel_csv(cfg["residuals"], PanelKind.RESIDUALS)
    rep = panel_diagnostics(u, w1, int(cfg.get("max_lag", 10)), float(cfg.get("alpha", 0.05)))
    _write_diagnostics(rep, _out_dir(cfg.get("out", ".")))


def build_network(spec: dict, y: Panel | None):
    """Weights from a spec: ``{"distance": ..., "k": ...}`` or ``{"grid": ..., "kind": ...}``."""
    if "grid" in spec:
        rows, cols = _grid(spec["grid"])
        return row_standardize(grid_contiguity(rows, cols, spec.get("kind", "queen")))
    dist = spec.get("distance", "correlation")
    if y is None:
        raise ValueError("data-driven networks need a returns panel")
    if dist == "euclidean":
        d = euclidean_distance(y)
    elif dist == "correlation":
        d = correlation_distance(y)
    elif dist == "piccolo":
        d = piccolo_distance(y, int(spec.get("ar_order", 1)))
    else:
        raise ValueError(f"unknown distance {dist!r}")
    return knn_weights(d, int(spec.get("k", 3)))


def cmd_network(args):
    cfg = _merge(_load_config(args.config), args, ["y", "distance", "k", "ar_order", "grid", "kind", "out"])
    y = read_panel_csv(cfg["y"]) if cfg.get("y") else None
    w = build_network(cfg, y)
    out = _out_dir(cfg.get("out", "."))
    write_weights_csv(w, out / "weights.csv")
    write_edge_list(w, out / "edges.csv")


def cmd_mc(args):
    cfg = _merge(_load_config(args.config), args, ["study", "replications", "seed", "out"])
    threads = resolve_threads(args.threads)
    out = _out_dir(cfg.get("out", "."))
    study = cfg.pop("study", "bias_rmse")
    cfg.pop("out", None)
    if study == "bias_rmse":
        mc = McConfig.from_dict(cfg)
        res = run_bias_rmse(mc, threads=threads)
        with open(out / "bias_rmse.csv", "w") as fh:
            fh.write("parameter,truth,bias,rmse\n")
            for row in res.table():
                fh.write(f"{row['parameter']},{fmt(row['truth'])},{fmt(row['bias'])},{fmt(row['rmse'])}\n")
        with open(out / "estimates.csv", "w") as fh:
            fh.write("replication," + ",".join(res.names) + "\n")
            for r, v in zip(res.replication_ids, res.estimates):
                fh.write(f"{r}," + ",".join(fmt(x) for x in v) + "\n")
        write_json(
            {"config": mc.to_dict(), "threads": threads, "failures": [list(f) for f in res.failures],
             "wall_clock_seconds": res.wall_clock,
             "replication_seconds": [float(t) for t in res.timings], "version": __version__},
            out / "manifest.json",
        )
    elif study == "invertibility":
        p = ModelParams.from_dict(cfg["params"]) if "params" in cfg else None
        kw = {k: cfg[k] for k in ("t_len", "steps", "points", "seed") if k in cfg}
        if "grid" in cfg:
            kw["grid"] = _grid(cfg["grid"])
        if "replications" in cfg:
            kw["m"] = int(cfg["replications"])
        st = run_invertibility_study(**({"params": p} if p else {}), **kw)
        with open(out / "maxd.csv", "w") as fh:
            fh.write("t,maxd\n")
            for t, v in enumerate(st.maxd, start=1):
                fh.write(f"{t},{fmt(v)}\n")
        with open(out / "ssd.csv", "w") as fh:
            fh.write("param_a,param_b,offset_a,offset_b,ssd\n")
            for (a, b), grid in st.ssd.items():
                for ia, da in enumerate(st.offsets[a]):
                    for ib, db in enumerate(st.offsets[b]):
                        fh.write(f"{a},{b},{fmt(da)},{fmt(db)},{fmt(grid[ia, ib])}\n")
        write_json({"replications": st.replications, "failures": st.failures}, out / "manifest.json")
    else:
        raise ValueError(f"unknown study {study!r}")


# -- pipeline ------------------------------------------------------------------


def _validate_pipeline(cfg: dict, base: Path) -> dict:
    if "returns" not in cfg:
        raise ValueError("pipeline config needs 'returns'")
    path = (base / cfg["returns"]).resolve()
    if not path.is_file():
        raise FileNotFoundError(f"returns file not found: {path}")
    nets = cfg.get("networks")
    if not nets:
        raise ValueError("pipeline config needs at least one network")
    names = [n.get("name") for n in nets]
    if None in names or len(set(names)) != len(names):
        raise ValueError("networks need unique names")
    _zero_policy(cfg.get("zero_policy"))
    return {"returns_path": path}


def pipeline_run(config_path, out_dir=None) -> Path:
    """
    Ingest returns, filter the mean, estimate the volatility model per
    network, run diagnostics and write a comparison table.

    The mean filter uses ``mean_network`` (default: the first network); the
    volatility model is fitted on its residuals for every network, with W1 =
    W2 = that network's weights.  Artifacts land in ``out_dir`` (default
    ``output_dir`` from the config, relative to the config file).

    Raises
    ------
    StageError
        Naming the failed stage; outputs written so far are kept.
    """
    config_path = Path(config_path)
    raw = config_path.read_bytes()
    cfg = json.loads(raw)
    base = config_path.parent
    info = _validate_pipeline(cfg, base)
    out = _out_dir(out_dir or base / cfg.get("output_dir", "run"))
    seed = int(cfg.get("seed", 0))
    alpha = float(cfg.get("alpha", 0.05))
    max_lag = int(cfg.get("max_lag", 10))
    outputs = []

    def stage(name, fn):
        try:
            return fn()
        except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
            raise StageError(name, exc) from exc

    y, replaced = stage("ingest", lambda: ingest_returns(info["returns_path"], cfg.get("zero_policy"), seed))
    write_panel_csv(y, out / "returns_clean.csv")
    outputs.append("returns_clean.csv")

    nets = {}
    for spec in cfg["networks"]:
        w = stage(f"network:{spec['name']}", lambda spec=spec: build_network(spec, y))
        nets[spec["name"]] = w
        write_weights_csv(w, out / f"weights_{spec['name']}.csv")
        outputs.append(f"weights_{spec['name']}.csv")

    mean_net = cfg.get("mean_network", cfg["networks"][0]["name"])
    if mean_net not in nets:
        raise StageError("meanfilter", ValueError(f"unknown mean_network {mean_net!r}"))
    mf = stage("meanfilter", lambda: fit_sdpd(y, nets[mean_net], nets[mean_net]))
    write_panel_csv(mf.residuals, out / "residuals.csv")
    write_json({**mf.to_dict(), "network": mean_net}, out / "meanfilter.json")
    outputs += ["residuals.csv", "meanfilter.json"]

    opts = FitOptions.from_dict({"seed": seed, **cfg.get("fit_options", {})})
    rows = []
    for name, w in nets.items():
        res = stage(f"estimate:{name}", lambda w=w: fit_qmle(mf.residuals, w, w, opts=opts))
        write_json(res.to_dict(), out / f"estimate_{name}.json")
        outputs.append(f"estimate_{name}.json")
        rows.append((name, res.loglik, res.aic, res.bic, res.converged))
        if res.std_errors is None:
            log.warning("network %s: standard errors unavailable (%s)", name, res.se_message)

    best_aic = min(range(len(rows)), key=lambda k: rows[k][2])
    best_bic = min(range(len(rows)), key=lambda k: rows[k][3])
    with open(out / "comparison.csv", "w") as fh:
        fh.write("network,loglik,aic,bic,converged,min_aic,min_bic\n")
        for k, (name, ll, aic, bic, conv) in enumerate(rows):
            fh.write(f"{name},{fmt(ll)},{fmt(aic)},{fmt(bic)},{int(conv)},{int(k == best_aic)},{int(k == best_bic)}\n")
    outputs.append("comparison.csv")

    diag_net = cfg.get("diagnostics_network", rows[best_aic][0])
    rep = stage("diagnose", lambda: panel_diagnostics(mf.residuals, nets[diag_net], max_lag, alpha))
    _write_diagnostics(rep, out)
    outputs += ["diagnostics_pvalues.csv", "diagnostics_summary.json"]

    import numpy as _np
    import scipy as _sp

    manifest = {
        "config_sha256": hashlib.sha256(_canonical(cfg).encode()).hexdigest(),
        "inputs": {str(cfg["returns"]): sha256_file(info["returns_path"])},
        "seed": seed,
        "zeros_replaced": replaced,
        "versions": {"spegarch": __version__, "numpy": _np.__version__, "scipy": _sp.__version__},
        "outputs": {name: sha256_file(out / name) for name in outputs},
    }
    manifest["manifest_sha256"] = hashlib.sha256(_canonical(manifest).encode()).hexdigest()
    write_json(manifest, out / "manifest.json")
    return out


def cmd_pipeline(args):
    pipeline_run(args.config_file, args.out)


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spegarch", description=__doc__.strip().splitlines()[0])
    ap.add_argument("--threads", type=int, default=None, help="worker cap (env ST_EGARCH_THREADS)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", default=None)
        p.set_defaults(func=fn)
        return p

    p = add("simulate", cmd_simulate, "simulate a panel")
    p.add_argument("--params"); p.add_argument("--w1"); p.add_argument("--w2"); p.add_argument("--grid")
    p.add_argument("--t-len", dest="t_len", type=int); p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--seed", type=int); p.add_argument("--out")

    p = add("invert", cmd_invert, "recover innovations")
    p.add_argument("--y"); p.add_argument("--params"); p.add_argument("--w1"); p.add_argument("--w2")
    p.add_argument("--grid"); p.add_argument("--out")

    p = add("estimate", cmd_estimate, "QML estimation")
    p.add_argument("--y"); p.add_argument("--w1"); p.add_argument("--w2"); p.add_argument("--grid")
    p.add_argument("--n-starts", dest="n_starts", type=int); p.add_argument("--seed", type=int)
    p.add_argument("--two-theta", dest="two_theta", action="store_true", default=None)
    p.add_argument("--out")

    p = add("moments", cmd_moments, "analytic moments")
    p.add_argument("--params"); p.add_argument("--w1"); p.add_argument("--w2"); p.add_argument("--grid")
    p.add_argument("--kind", choices=["nu", "closed", "quadrature"])
    p.add_argument("--node", type=int, help="1-based node"); p.add_argument("--node2", type=int)
    p.add_argument("--trunc-tol", dest="trunc_tol", type=float)
    p.add_argument("--quad-nodes", dest="quad_nodes", type=int); p.add_argument("--out")

    p = add("meanfilter", cmd_meanfilter, "SDPD mean filter")
    p.add_argument("--y"); p.add_argument("--w1"); p.add_argument("--w2"); p.add_argument("--grid"); p.add_argument("--out")

    p = add("diagnose", cmd_diagnose, "residual diagnostics")
    p.add_argument("--residuals"); p.add_argument("--w1"); p.add_argument("--grid")
    p.add_argument("--max-lag", dest="max_lag", type=int); p.add_argument("--alpha", type=float); p.add_argument("--out")

    p = add("network", cmd_network, "build a weight matrix")
    p.add_argument("--y"); p.add_argument("--distance", choices=["euclidean", "correlation", "piccolo"])
    p.add_argument("--k", type=int); p.add_argument("--ar-order", dest="ar_order", type=int)
    p.add_argument("--grid"); p.add_argument("--kind", choices=["rook", "queen"]); p.add_argument("--out")

    p = add("mc", cmd_mc, "Monte Carlo studies")
    p.add_argument("--study", choices=["bias_rmse", "invertibility"])
    p.add_argument("--replications", type=int); p.add_argument("--seed", type=int); p.add_argument("--out")

    p = sub.add_parser("pipeline", help="end-to-end empirical workflow")
    p.add_argument("config_file"); p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        os.environ["ST_EGARCH_THREADS"] = str(args.threads)
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _code(exc.cause)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        print(f"error: {exc}", file=sys.stderr)
        return _code(exc)
    return EXIT_OK


def _code(exc) -> int:
    if isinstance(exc, (InversionError, McFailureError, np.linalg.LinAlgError, ArithmeticError, FloatingPointError)):
        return EXIT_NUMERICAL
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (ValueError, KeyError, TypeError, IndexError, json.JSONDecodeError)):
        return EXIT_VALIDATION
    if isinstance(exc, RuntimeError):
        return EXIT_NUMERICAL
    raise exc


if __name__ == "__main__":
    sys.exit(main())
