"""
Shared domain types for the spatiotemporal E-GARCH model.

Panels are stored as ``(n, T)`` arrays, one row per node.  Numerical kernels
work on the transposed ``(T, n)`` layout internally.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from enum import Enum
import math

import numpy as np

__all__ = [
    "ABS_MEAN_NORMAL",
    "INVERSION_STUDY_PARAMS",
    "InitialConditions",
    "MODEL_A",
    "MODEL_B",
    "ModelParams",
    "Panel",
    "PanelKind",
    "WeightMatrix",
    "as_matrix",
    "make_rng",
    "seeded_normal_panel",
    "validate_params",
]

#: E|eps| for a standard normal innovation.
ABS_MEAN_NORMAL = math.sqrt(2.0 / math.pi)

PARAM_NAMES = ("alpha", "rho0", "rho1", "lambda0", "lambda1", "theta")


@dataclass(frozen=True)
class ModelParams:
    """
    Parameter vector of the spatiotemporal E-GARCH(1, 1) model.

    Parameters
    ----------
    alpha : float
        Intercept shared by all nodes.
    rho0, rho1 : float
        Contemporaneous spatial and temporal E-GARCH coefficients.
    lambda0, lambda1 : float
        Contemporaneous spatial and temporal GARCH coefficients.
    theta : float
        Leverage parameter.  In the two-leverage variant this is the
        leverage of the contemporaneous (W1) term.
    xi : float
        Scale of the absolute-value term, 1 for identification.
    theta1 : float, optional
        Leverage of the lagged term.  ``None`` means the lagged term shares
        ``theta``.
    """

    alpha: float
    rho0: float
    rho1: float
    lambda0: float
    lambda1: float
    theta: float
    xi: float = 1.0
    theta1: float | None = None

    @property
    def theta_lag(self) -> float:
        return self.theta if self.theta1 is None else self.theta1

    @property
    def two_theta(self) -> bool:
        return self.theta1 is not None

    def free_names(self) -> tuple[str, ...]:
        return PARAM_NAMES + (("theta1",) if self.two_theta else ())

    def free_vector(self) -> np.ndarray:
        """Estimated parameters in ``free_names`` order (xi excluded)."""
        return np.array([getattr(self, name) for name in self.free_names()], dtype=float)

    @classmethod
    def from_free_vector(cls, x, xi: float = 1.0, two_theta: bool = False) -> ModelParams:
        x = [float(v) for v in x]
        theta1 = x[6] if two_theta else None
        return cls(*x[:6], xi=xi, theta1=theta1)

    def replace(self, **changes) -> ModelParams:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["theta1"] is None:
            del d["theta1"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ModelParams:
        keys = {"alpha", "rho0", "rho1", "lambda0", "lambda1", "theta", "xi", "theta1"}
        unknown = set(d) - keys
        if unknown:
            raise ValueError(f"unknown parameter fields: {sorted(unknown)}")
        kwargs = {k: (None if v is None else float(v)) for k, v in d.items()}
        return cls(**kwargs)


#: Model A of the simulation study, pronounced contemporaneous spatial effects.
MODEL_A = ModelParams(alpha=0.5, rho0=0.5, rho1=0.35, lambda0=0.2, lambda1=0.3, theta=0.4)
#: Model B of the simulation study, temporal effects dominate.
MODEL_B = ModelParams(alpha=0.5, rho0=0.2, rho1=0.35, lambda0=0.25, lambda1=0.3, theta=0.4)
#: Data-generating parameters of the numerical invertibility experiment.
INVERSION_STUDY_PARAMS = ModelParams(
    alpha=0.5, rho0=0.25, rho1=0.3, lambda0=0.35, lambda1=0.4, theta=0.4
)


def validate_params(p: ModelParams) -> list[str]:
    """
    Return the list of violated constraints, empty if ``p`` is admissible.
    """
    problems = []
    values = [p.alpha, p.rho0, p.rho1, p.lambda0, p.lambda1, p.theta, p.xi]
    if p.theta1 is not None:
        values.append(p.theta1)
    if not all(math.isfinite(v) for v in values):
        problems.append("non-finite field")
        return problems
    if p.xi <= 0:
        problems.append("xi <= 0")
    if abs(p.theta) >= p.xi:
        problems.append("|theta| >= xi")
    if p.theta1 is not None and abs(p.theta1) >= p.xi:
        problems.append("|theta1| >= xi")
    return problems


def as_matrix(w) -> np.ndarray:
    """Dense float array from a WeightMatrix or anything array-like."""
    if isinstance(w, WeightMatrix):
        return w.entries
    return np.asarray(w, dtype=float)


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """
    Spatial or network weights: nonnegative, zero diagonal.

    Parameters
    ----------
    entries : ndarray
        ``(n, n)`` weights; row i holds the weights node i puts on others.
    row_standardized : bool
        Whether nonzero rows have been rescaled to sum to one.
    """

    entries: np.ndarray
    row_standardized: bool = False

    def __post_init__(self):
        w = np.array(self.entries, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ValueError("weight matrix must be square and non-empty")
        if not np.all(np.isfinite(w)):
            raise ValueError("weight matrix contains non-finite entries")
        if np.any(np.diag(w) != 0.0):
            raise ValueError("weight matrix must have a zero diagonal")
        if np.any(w < 0):
            raise ValueError("weight matrix entries must be nonnegative")
        if self.row_standardized:
            sums = w.sum(axis=1)
            nz = sums > 0
            if np.any(np.abs(sums[nz] - 1.0) > 1e-12):
                raise ValueError("row_standardized flag set but rows do not sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "entries", w)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


class PanelKind(str, Enum):
    RETURNS = "Returns"
    INNOVATIONS = "Innovations"
    VOLATILITY = "Volatility"
    LOG_VOLATILITY = "LogVolatility"
    RESIDUALS = "Residuals"


@dataclass(frozen=True, eq=False)
class Panel:
    """
    ``n`` nodes observed at ``t_len`` time points.

    ``values`` has shape ``(n, t_len)``.  ``names`` optionally carries the
    column labels read from or written to CSV.
    """

    values: np.ndarray
    kind: PanelKind = PanelKind.RETURNS
    names: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.size == 0:
            raise ValueError("panel values must be a non-empty (n, T) matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("panel contains NaN or Inf")
        kind = PanelKind(self.kind)
        if kind is PanelKind.VOLATILITY and np.any(v <= 0):
            raise ValueError("volatility panel must be strictly positive")
        if self.names is not None and len(self.names) != v.shape[0]:
            raise ValueError("names must have one entry per node")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "kind", kind)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def t_len(self) -> int:
        return self.values.shape[1]

    def by_time(self) -> np.ndarray:
        """Contiguous ``(T, n)`` copy."""
        return np.ascontiguousarray(self.values.T)

    def column_names(self) -> tuple[str, ...]:
        if self.names is not None:
            return self.names
        return tuple(f"node_{i + 1}" for i in range(self.n))


@dataclass(frozen=True, eq=False)
class InitialConditions:
    """Known ``Y_0`` and ``eps_0`` that start the volatility recursion."""

    y0: np.ndarray
    eps0: np.ndarray

    def __post_init__(self):
        y0 = np.array(self.y0, dtype=float).ravel()
        eps0 = np.array(self.eps0, dtype=float).ravel()
        if y0.shape != eps0.shape:
            raise ValueError("y0 and eps0 must have the same length")
        if np.any(eps0 == 0):
            raise ValueError("eps0 must not contain zeros")
        if np.any(y0 == 0):
            raise ValueError("y0 must not contain zeros")
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "eps0", eps0)

    @classmethod
    def constant(cls, n: int, value: float = 1e-4) -> InitialConditions:
        return cls(np.full(n, value), np.full(n, value))

    @property
    def log_h0(self) -> np.ndarray:
        return np.log(self.y0**2 / self.eps0**2)


def make_rng(seed, *stream: int) -> np.random.Generator:
    """
    Counter-based generator for ``seed``; ``stream`` selects an independent
    substream (e.g. a Monte Carlo replication index).
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def seeded_normal_panel(n: int, t_len: int, seed, *stream: int) -> Panel:
    """I.i.d. standard normal innovations, bit-identical for a given seed."""
    if n < 1 or t_len < 1:
        raise ValueError("n and t_len must be >= 1")
    rng = make_rng(seed, *stream)
    draws = rng.standard_normal((t_len, n))
    return Panel(draws.T, PanelKind.INNOVATIONS)
