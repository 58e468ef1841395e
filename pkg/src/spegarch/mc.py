"""
Monte Carlo harness: bias and RMSE of the QML estimator, and the accuracy of
the innovation inversion at and around the true parameters.

Replication ``r`` draws its innovations from the independent substream
``(seed, r)``, so results do not depend on execution order or worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import itertools
import os
import time

import numpy as np

from .core import (
    INVERSION_STUDY_PARAMS,
    MODEL_A,
    MODEL_B,
    ModelParams,
    seeded_normal_panel,
)
from .inversion import BURN_STEPS, InversionError, NewtonOptions, invert_panel
from .likelihood import FitOptions, fit_qmle
from .networks import grid_contiguity, row_standardize
from .process import simulate

__all__ = [
    "BiasRmseResult",
    "InvertibilityStudy",
    "McConfig",
    "McFailureError",
    "lattice_weights",
    "resolve_threads",
    "run_bias_rmse",
    "run_invertibility_study",
]

MODELS = {"A": MODEL_A, "B": MODEL_B}
MAX_FAILURE_RATE = 0.05
SIM_BURN_IN = 50


class McFailureError(RuntimeError):
    """Too many replications failed for the summary to be trusted."""


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``ST_EGARCH_THREADS``, else 1."""
    if threads is None:
        threads = int(os.environ.get("ST_EGARCH_THREADS", "1"))
    return max(1, int(threads))


def lattice_weights(rows: int, cols: int):
    """Row-standardized Queen (W1) and Rook (W2) weights on a lattice."""
    return (
        row_standardize(grid_contiguity(rows, cols, "queen")),
        row_standardize(grid_contiguity(rows, cols, "rook")),
    )


@dataclass(frozen=True)
class McConfig:
    """
    Parameters
    ----------
    model : {"A", "B"} or ModelParams
    grid : (rows, cols)
        Lattice; ``n = rows * cols``.
    """

    model: object = "A"
    grid: tuple[int, int] = (4, 4)
    t_len: int = 50
    replications: int = 100
    seed: int = 0
    fit_options: FitOptions = field(default_factory=lambda: FitOptions(compute_se=False))

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")

    @property
    def params(self) -> ModelParams:
        if isinstance(self.model, ModelParams):
            return self.model
        try:
            return MODELS[str(self.model).upper()]
        except KeyError:
            raise ValueError(f"unknown model {self.model!r}") from None

    @classmethod
    def from_dict(cls, d: dict) -> McConfig:
        d = dict(d)
        if isinstance(d.get("model"), dict):
            d["model"] = ModelParams.from_dict(d["model"])
        if "grid" in d:
            d["grid"] = tuple(d["grid"])
        if isinstance(d.get("fit_options"), dict):
            d["fit_options"] = FitOptions.from_dict({"compute_se": False, **d["fit_options"]})
        return cls(**d)

    def to_dict(self) -> dict:
        model = self.model.to_dict() if isinstance(self.model, ModelParams) else self.model
        return {
            "model": model,
            "grid": list(self.grid),
            "t_len": self.t_len,
            "replications": self.replications,
            "seed": self.seed,
            "fit_options": self.fit_options.to_dict(),
        }


def _replication_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(r, 1)).generate_state(1)[0])


def _one_replication(cfg: McConfig, r: int):
    p = cfg.params
    w1, w2 = lattice_weights(*cfg.grid)
    n = w1.n
    t0 = time.perf_counter()
    eps = seeded_normal_panel(n, SIM_BURN_IN + cfg.t_len, cfg.seed, r).values
    sim = simulate(p, w1, w2, cfg.t_len, burn_in=SIM_BURN_IN, eps=eps)
    opts = replace(cfg.fit_options, seed=_replication_seed(cfg.seed, r))
    try:
        res = fit_qmle(sim.y, w1, w2, opts=opts)
    except (InversionError, RuntimeError) as exc:
        return r, None, False, str(exc), time.perf_counter() - t0
    return r, res.params.free_vector(), res.converged, "", time.perf_counter() - t0


@dataclass(frozen=True)
class BiasRmseResult:
    names: tuple[str, ...]
    truth: np.ndarray
    estimates: np.ndarray
    replication_ids: np.ndarray
    failures: tuple
    timings: np.ndarray
    wall_clock: float

    @property
    def bias(self) -> np.ndarray:
        return np.mean(self.estimates - self.truth, axis=0)

    @property
    def rmse(self) -> np.ndarray:
        return np.sqrt(np.mean((self.estimates - self.truth) ** 2, axis=0))

    def table(self) -> list[dict]:
        return [
            {"parameter": k, "truth": float(t), "bias": float(b), "rmse": float(e)}
            for k, t, b, e in zip(self.names, self.truth, self.bias, self.rmse)
        ]


def run_bias_rmse(cfg: McConfig, threads: int | None = None) -> BiasRmseResult:
    """
    Simulate and re-estimate ``cfg.replications`` data sets.

    Each replication simulates on a Queen (W1) / Rook (W2) row-standardized
    lattice and fits by QML.  Failed or non-converged fits are excluded and
    listed in ``failures``.

    Raises
    ------
    McFailureError
        If more than 5% of the replications fail.
    """
    threads = resolve_threads(threads)
    start = time.perf_counter()
    reps = range(cfg.replications)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(_one_replication, itertools.repeat(cfg), reps))
    else:
        out = [_one_replication(cfg, r) for r in reps]
    out.sort(key=lambda o: o[0])
    ok = [o for o in out if o[1] is not None and o[2]]
    failures = tuple((o[0], o[3] or "not converged") for o in out if not (o[1] is not None and o[2]))
    if len(failures) > MAX_FAILURE_RATE * cfg.replications:
        raise McFailureError(
            f"{len(failures)} of {cfg.replications} replications failed (cap 5%)"
        )
    p = cfg.params
    k = len(p.free_names()) if not cfg.fit_options.two_theta else 7
    names = ModelParams.from_free_vector(np.zeros(k), two_theta=cfg.fit_options.two_theta).free_names()
    truth = p.free_vector() if not cfg.fit_options.two_theta else np.append(p.free_vector()[:6], p.theta_lag)
    est = np.array([o[1] for o in ok]).reshape(len(ok), k)
    return BiasRmseResult(
        names=names,
        truth=truth,
        estimates=est,
        replication_ids=np.array([o[0] for o in ok], dtype=int),
        failures=failures,
        timings=np.array([o[4] for o in out]),
        wall_clock=time.perf_counter() - start,
    )


# -- invertibility -------------------------------------------------------------


DEFAULT_STEPS = {"alpha": 0.1, "rho0": 0.05, "rho1": 0.05, "lambda0": 0.05, "lambda1": 0.05, "theta": 0.05}


@dataclass(frozen=True)
class InvertibilityStudy:
    """
    ``maxd[t]`` is the replication mean of ``max_i (eps~_t - eps_t)^2``;
    ``ssd[(a, b)]`` is the replication mean of the squared error summed over
    nodes and periods after the burn-in, on the grid ``offsets[a] x offsets[b]``
    around the truth (rows index ``a``).
    """

    maxd: np.ndarray
    ssd: dict
    offsets: dict
    failures: int
    replications: int


def run_invertibility_study(
    params: ModelParams = INVERSION_STUDY_PARAMS,
    grid: tuple[int, int] = (5, 5),
    t_len: int = 50,
    steps: dict | None = None,
    points: int = 5,
    m: int = 50,
    seed: int = 0,
    burn: int = BURN_STEPS,
    pairs=None,
    newton: NewtonOptions = NewtonOptions(),
) -> InvertibilityStudy:
    """
    Invert simulated data at the truth and on two-parameter perturbation
    grids (others held at the truth).

    ``points`` grid values per axis, spaced by ``steps[name]`` and centred on
    the truth.  Perturbed points whose inversion fails contribute ``inf``.
    """
    if points % 2 != 1:
        raise ValueError("points must be odd so the truth is the centre cell")
    steps = {**DEFAULT_STEPS, **(steps or {})}
    names = params.free_names()
    pairs = list(itertools.combinations(names, 2)) if pairs is None else [tuple(p) for p in pairs]
    half = points // 2
    offsets = {k: steps[k] * np.arange(-half, half + 1) for k in names}
    w1, w2 = lattice_weights(*grid)
    n = w1.n
    maxd = np.zeros(t_len)
    ssd = {pr: np.zeros((points, points)) for pr in pairs}
    failures = 0
    for r in range(m):
        eps_all = seeded_normal_panel(n, SIM_BURN_IN + t_len, seed, r).values
        sim = simulate(params, w1, w2, t_len, burn_in=SIM_BURN_IN, eps=eps_all)
        eps = sim.eps.values
        e_hat, _ = invert_panel(sim.y, params, w1, w2, opts=newton)
        maxd += np.max((e_hat.values - eps) ** 2, axis=0)
        for a, b in pairs:
            for ia, da in enumerate(offsets[a]):
                for ib, db in enumerate(offsets[b]):
                    p = params.replace(**{a: getattr(params, a) + da, b: getattr(params, b) + db})
                    try:
                        e_p, _ = invert_panel(sim.y, p, w1, w2, opts=newton)
                        val = float(np.sum((e_p.values[:, burn:] - eps[:, burn:]) ** 2))
                    except (InversionError, np.linalg.LinAlgError):
                        val = np.inf
                        failures += 1
                    ssd[(a, b)][ia, ib] += val
    return InvertibilityStudy(
        maxd=maxd / m,
        ssd={k: v / m for k, v in ssd.items()},
        offsets=offsets,
        failures=failures,
        replications=m,
    )
