"""
Convex reduction module.

Builds the Casimir function Q, its Legendre transform Q*, the velocity-reduced
transform Phi* and the spatial function Phi, and derives the right-hand side
g = (Phi')^{-1}_+ of the Emden-Fowler equation.

Two representations are supported: exact power laws c*x**p (kind "power") and
tables on log-spaced abscissae (kind "tabulated").
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from config import Config
from errors import (
    DomainCutoffError,
    InternalConsistencyError,
    InvalidParameterError,
    InvariantViolationError,
)
from utils import app_logger, read_csv, write_csv

ArrayLike = Union[float, np.ndarray]

# 4*pi*sqrt(2): the velocity measure dv = 4*pi*sqrt(2)*sqrt(E) dE for E = |v|^2/2
VELOCITY_MEASURE = 4.0 * math.pi * math.sqrt(2.0)

POWER = "power"
TABULATED = "tabulated"
INFINITE = "infinite"   # +inf on (-inf, 0): primal functions Q, Phi
ZERO = "zero"           # 0 on (-inf, 0]: transforms Q*, Phi*


def default_abscissae(nodes: int = 0, lo: float = 0.0, hi: float = 0.0) -> np.ndarray:
    """0 followed by log-spaced samples over [lo, hi]."""
    nodes = nodes or Config.TABLE_NODES
    lo = lo or Config.TABLE_MIN
    hi = hi or Config.TABLE_MAX
    return np.concatenate([[0.0], np.geomspace(lo, hi, nodes)])


# --- Convex Functions ---
@dataclass(frozen=True, eq=False)
class ConvexScalarFunction:
    """A convex function on [0, inf) with value, derivative and inverse derivative."""
    kind: str
    coefficient: float = 1.0
    exponent: float = 2.0
    abscissae: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    derivatives: Optional[np.ndarray] = None
    negative_extension: str = INFINITE
    superlinear: bool = True
    admissible: bool = True
    label: str = ""
    _value_spline: Optional[CubicHermiteSpline] = field(default=None, repr=False)
    _derivative_spline: Optional[PchipInterpolator] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.negative_extension not in (INFINITE, ZERO):
            raise InvalidParameterError(f"unknown negative extension '{self.negative_extension}'")
        if self.kind == POWER:
            if not (self.coefficient > 0 and self.exponent > 1):
                raise InvalidParameterError(
                    f"power law needs coefficient > 0 and exponent > 1, "
                    f"got {self.coefficient}, {self.exponent}"
                )
            return
        if self.kind != TABULATED:
            raise InvalidParameterError(f"unknown function kind '{self.kind}'")

        x = np.asarray(self.abscissae, dtype=float)
        y = np.asarray(self.values, dtype=float)
        dy = np.asarray(self.derivatives, dtype=float)
        if not (x.ndim == 1 and x.shape == y.shape == dy.shape and x.size >= 3):
            raise InvariantViolationError("table columns must be 1-D, equal length, >= 3 rows")
        if x[0] != 0.0 or y[0] != 0.0 or dy[0] != 0.0:
            raise InvariantViolationError("table must start at value(0) = derivative(0) = 0")
        if np.any(np.diff(x) <= 0):
            raise InvariantViolationError("abscissae must be strictly increasing")
        if np.any(np.diff(dy) <= 0):
            raise InvariantViolationError("derivative must be strictly increasing")
        if np.any(y < 0) or np.any(np.diff(y) < 0):
            raise InvariantViolationError("values must be nonnegative and nondecreasing")
        slopes = np.diff(y) / np.diff(x)
        if np.any(np.diff(slopes) < -1e-8 * np.abs(slopes[1:]) - 1e-300):
            raise InvariantViolationError("values are not convex (negative second differences)")

        for column in (x, y, dy):
            column.setflags(write=False)
        object.__setattr__(self, "abscissae", x)
        object.__setattr__(self, "values", y)
        object.__setattr__(self, "derivatives", dy)
        object.__setattr__(self, "_value_spline", CubicHermiteSpline(x, y, dy))
        object.__setattr__(self, "_derivative_spline", PchipInterpolator(x, dy))

    # --- Metadata ---
    @property
    def is_power(self) -> bool:
        return self.kind == POWER

    @property
    def cutoff(self) -> float:
        """Largest trusted abscissa."""
        return math.inf if self.is_power else float(self.abscissae[-1])

    @property
    def polytropic_index(self) -> float:
        """Index m with value ~ x**(1 + 1/m): k for Q, n for Phi (power laws only)."""
        if not self.is_power:
            raise InvalidParameterError("polytropic index is only defined for power laws")
        return 1.0 / (self.exponent - 1.0)

    def in_domain(self, x: ArrayLike) -> np.ndarray:
        """True where the function is finite (x >= 0 for primal functions)."""
        x = np.asarray(x, dtype=float)
        finite = x <= self.cutoff
        if self.negative_extension == INFINITE:
            finite &= x >= 0
        return finite

    def _check_argument(self, x: np.ndarray) -> None:
        if self.negative_extension == INFINITE and np.any(x < 0):
            raise DomainCutoffError(f"{self.label or self.kind}: negative argument (value is +inf there)")
        if np.any(x > self.cutoff):
            raise DomainCutoffError(
                f"{self.label or self.kind}: argument {np.max(x):.6g} beyond cutoff {self.cutoff:.6g}"
            )

    # --- Evaluation ---
    def value(self, x: ArrayLike) -> ArrayLike:
        x_arr = np.asarray(x, dtype=float)
        self._check_argument(x_arr)
        pos = np.maximum(x_arr, 0.0)
        if self.is_power:
            out = self.coefficient * pos ** self.exponent
        else:
            out = np.maximum(self._value_spline(pos), 0.0)
        out = np.where(x_arr > 0, out, 0.0)
        return out if np.ndim(x) else float(out)

    def derivative(self, x: ArrayLike) -> ArrayLike:
        x_arr = np.asarray(x, dtype=float)
        self._check_argument(x_arr)
        pos = np.maximum(x_arr, 0.0)
        if self.is_power:
            out = self.coefficient * self.exponent * pos ** (self.exponent - 1.0)
        else:
            out = np.maximum(self._derivative_spline(pos), 0.0)
        out = np.where(x_arr > 0, out, 0.0)
        return out if np.ndim(x) else float(out)

    def inverse_derivative(self, y: ArrayLike) -> ArrayLike:
        """(h')^{-1}_+ : 0 for y <= 0."""
        y_arr = np.asarray(y, dtype=float)
        pos = np.maximum(y_arr, 0.0)
        if self.is_power:
            out = (pos / (self.coefficient * self.exponent)) ** (1.0 / (self.exponent - 1.0))
        else:
            out = self._bisect_derivative(pos)
        out = np.where(y_arr > 0, out, 0.0)
        return out if np.ndim(y) else float(out)

    def _bisect_derivative(self, y: np.ndarray) -> np.ndarray:
        dy = self.derivatives
        if np.any(y > dy[-1]):
            raise DomainCutoffError(
                f"{self.label or self.kind}: derivative value {np.max(y):.6g} beyond table range {dy[-1]:.6g}"
            )
        idx = np.clip(np.searchsorted(dy, y), 1, dy.size - 1)
        lo = np.array(self.abscissae[idx - 1], dtype=float)
        hi = np.array(self.abscissae[idx], dtype=float)
        # bisection until the bracket is below 1e-12 relative to its right end
        for _ in range(200):
            width = hi - lo
            if np.all((width <= 1e-12 * hi) | (y <= 0)):
                break
            mid = 0.5 * (lo + hi)
            below = self._derivative_spline(mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    # --- Export ---
    def sample(self, abscissae: Optional[np.ndarray] = None) -> "ConvexScalarFunction":
        """Tabulated copy (power laws are sampled on the default grid)."""
        if not self.is_power:
            return self
        x = default_abscissae() if abscissae is None else np.asarray(abscissae, dtype=float)
        return ConvexScalarFunction(
            kind=TABULATED,
            abscissae=x,
            values=self.value(x),
            derivatives=self.derivative(x),
            negative_extension=self.negative_extension,
            superlinear=self.superlinear,
            admissible=self.admissible,
            label=self.label,
        )


def save_table(func: ConvexScalarFunction, path: Path) -> Path:
    table = func.sample()
    return write_csv(path, {
        "abscissa": table.abscissae,
        "value": table.values,
        "derivative": table.derivatives,
    })


def load_table(path: Path, negative_extension: str = INFINITE, label: str = "") -> ConvexScalarFunction:
    columns = read_csv(path)
    missing = {"abscissa", "value", "derivative"} - set(columns)
    if missing:
        raise InvariantViolationError(f"{path}: missing columns {sorted(missing)}")
    return ConvexScalarFunction(
        kind=TABULATED,
        abscissae=columns["abscissa"],
        values=columns["value"],
        derivatives=columns["derivative"],
        negative_extension=negative_extension,
        label=label or Path(path).stem,
    )


# --- Polytropes ---
def make_polytrope_q(k: float) -> ConvexScalarFunction:
    """Q(f) = f**(1 + 1/k); admissible for 0 < k < 3/2 (n = k + 3/2 < 3)."""
    if not k > 0:
        raise InvalidParameterError(f"polytrope needs k > 0, got k={k}")
    admissible = k < 1.5
    if not admissible:
        app_logger.warning(f"⚠️ k={k:g} gives n={k + 1.5:g} >= 3: outside the admissible range 0 < n < 3")
    return ConvexScalarFunction(
        kind=POWER, coefficient=1.0, exponent=1.0 + 1.0 / k, admissible=admissible, label=f"Q[k={k:g}]"
    )


def make_polytrope_phi(n: float, coefficient: float = 1.0) -> ConvexScalarFunction:
    """Phi(rho) = c * rho**(1 + 1/n) directly at the spatial level, 0 < n < 3."""
    if not 0 < n < 3:
        raise InvalidParameterError(f"Phi polytrope needs 0 < n < 3, got n={n}")
    return ConvexScalarFunction(
        kind=POWER, coefficient=coefficient, exponent=1.0 + 1.0 / n, label=f"Phi[n={n:g}]"
    )


# --- Legendre Transform ---
def conjugate(h: ConvexScalarFunction) -> ConvexScalarFunction:
    """h*(lam) = sup_{r >= 0} (lam*r - h(r)), attained at r = (h')^{-1}(lam)."""
    if not h.superlinear:
        raise InvariantViolationError(f"{h.label}: conjugate needs superlinear growth h(r)/r -> inf")
    flipped = ZERO if h.negative_extension == INFINITE else INFINITE
    label = f"{h.label}*" if not h.label.endswith("*") else h.label[:-1]

    if h.is_power:
        r_one = h.inverse_derivative(1.0)
        coefficient = r_one - h.value(r_one)
        if not coefficient > 0:
            raise InternalConsistencyError(f"{h.label}: nonpositive conjugate coefficient {coefficient}")
        return ConvexScalarFunction(
            kind=POWER,
            coefficient=coefficient,
            exponent=h.exponent / (h.exponent - 1.0),
            negative_extension=flipped,
            admissible=h.admissible,
            label=label,
        )

    slopes = h.derivatives
    values = np.maximum(slopes * h.abscissae - h.values, 0.0)
    return ConvexScalarFunction(
        kind=TABULATED,
        abscissae=slopes.copy(),
        values=values,
        derivatives=h.abscissae.copy(),
        negative_extension=flipped,
        admissible=h.admissible,
        label=label,
    )


# --- Velocity Reduction ---
def _power_velocity_factor(degree: float) -> float:
    """2 * int_0^1 (1 - s^2)^degree s^2 ds = B(degree + 1, 3/2)."""
    integral, _ = quad(lambda s: (1.0 + s) ** degree * s * s, 0.0, 1.0,
                       weight="alg", wvar=(0.0, degree), epsabs=0.0, epsrel=1e-13)
    return 2.0 * integral


def velocity_integral(func: Callable[[np.ndarray], np.ndarray], lam: np.ndarray,
                       scale: np.ndarray, tol: float) -> np.ndarray:
    """4*pi*sqrt(2) * int_0^lam func(lam - E) sqrt(E) dE for every lam > 0.

    Uses E = lam*s^2 so the weight becomes 2*lam^{3/2} s^2 ds; each component
    is divided by `scale` during integration so small lam keep relative accuracy.
    """
    out = np.zeros_like(lam)
    live = lam > 0
    if not np.any(live):
        return out
    lam_live = lam[live]
    scale_live = np.where(scale[live] > 0, scale[live], 1.0)

    def integrand(s: float) -> np.ndarray:
        return func(lam_live * (1.0 - s * s)) / scale_live * s * s

    integral, _ = quad_vec(integrand, 0.0, 1.0, epsabs=0.0, epsrel=tol, norm="max")
    out[live] = VELOCITY_MEASURE * 2.0 * lam_live ** 1.5 * integral * scale_live
    return out


def velocity_reduce(q_star: ConvexScalarFunction, tol: float = 0.0) -> ConvexScalarFunction:
    """Phi*(lam) = int Q*(lam - |v|^2/2) dv = 4*pi*sqrt(2) int_0^lam Q*(lam - E) sqrt(E) dE."""
    if q_star.negative_extension != ZERO:
        raise InvalidParameterError(f"{q_star.label}: velocity reduction needs a transform vanishing on (-inf, 0]")
    tol = tol or Config.QUAD_TOL
    label = "Phi*"

    if q_star.is_power:
        coefficient = VELOCITY_MEASURE * q_star.coefficient * _power_velocity_factor(q_star.exponent)
        if not coefficient > 0:
            raise InternalConsistencyError(f"negative velocity integral {coefficient}")
        return ConvexScalarFunction(
            kind=POWER,
            coefficient=coefficient,
            exponent=q_star.exponent + 1.5,
            negative_extension=ZERO,
            admissible=q_star.admissible,
            label=label,
        )

    lam = np.asarray(q_star.abscissae, dtype=float)
    values = velocity_integral(q_star.value, lam, q_star.values, tol)
    slopes = velocity_integral(q_star.derivative, lam, q_star.derivatives, tol)
    if np.any(values < 0) or np.any(slopes < 0):
        raise InternalConsistencyError("negative velocity integral for a valid transform")
    app_logger.debug(f"velocity reduction tabulated on {lam.size} nodes up to lambda={lam[-1]:.3g}")
    return ConvexScalarFunction(
        kind=TABULATED,
        abscissae=lam,
        values=values,
        derivatives=slopes,
        negative_extension=ZERO,
        admissible=q_star.admissible,
        label=label,
    )


def phi_from_q(q: ConvexScalarFunction, tol: float = 0.0) -> ConvexScalarFunction:
    """Phi = (velocity_reduce(Q*))*: the reduced spatial function of a Casimir Q."""
    phi = conjugate(velocity_reduce(conjugate(q), tol))
    object.__setattr__(phi, "label", f"Phi<-{q.label}")
    if phi.is_power:
        app_logger.debug(f"{q.label} reduces to Phi = {phi.coefficient:.10g} rho^{phi.exponent:.10g}")
    return phi


# --- Emden-Fowler Right-Hand Side ---
@dataclass(frozen=True, eq=False)
class GFunction:
    """g(lam) = (Phi')^{-1}_+(lam): homogeneous c*lam^n or a monotone table."""
    coefficient: float = 0.0
    exponent: float = 0.0
    lambdas: Optional[np.ndarray] = None
    table: Optional[np.ndarray] = None
    label: str = "g"
    _interpolant: Optional[PchipInterpolator] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.lambdas is None:
            if not (self.coefficient > 0 and self.exponent > 0):
                raise InvalidParameterError(
                    f"homogeneous g needs c > 0 and n > 0, got {self.coefficient}, {self.exponent}"
                )
            return
        lam = np.asarray(self.lambdas, dtype=float)
        vals = np.asarray(self.table, dtype=float)
        if lam.shape != vals.shape or lam[0] != 0.0 or vals[0] != 0.0:
            raise InvariantViolationError("g table must start at g(0) = 0")
        if np.any(np.diff(lam) <= 0) or np.any(np.diff(vals) <= 0):
            raise InvariantViolationError("g table must be strictly increasing")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "table", vals)
        object.__setattr__(self, "_interpolant", PchipInterpolator(lam, vals))

    @classmethod
    def power(cls, coefficient: float, exponent: float, label: str = "") -> "GFunction":
        if exponent >= 3:
            app_logger.warning(f"⚠️ g exponent n={exponent:g} >= 3: no finite-mass minimizer is expected")
        return cls(coefficient=coefficient, exponent=exponent,
                   label=label or f"g[{coefficient:.6g} lam^{exponent:g}]")

    @classmethod
    def from_phi(cls, phi: ConvexScalarFunction) -> "GFunction":
        """g = (Phi')^{-1}_+ read off Phi directly."""
        if phi.is_power:
            n = phi.polytropic_index
            return cls(coefficient=(phi.coefficient * phi.exponent) ** (-n), exponent=n,
                       label=f"g<-{phi.label}")
        return cls(lambdas=phi.derivatives, table=phi.abscissae, label=f"g<-{phi.label}")

    def to_phi(self) -> ConvexScalarFunction:
        """Phi with (Phi')^{-1}_+ = g: Phi(g(lam)) = lam*g(lam) - int_0^lam g."""
        if self.is_homogeneous:
            n = self.exponent
            return ConvexScalarFunction(
                kind=POWER,
                coefficient=n / (n + 1.0) * self.coefficient ** (-1.0 / n),
                exponent=1.0 + 1.0 / n,
                label=f"Phi<-{self.label}",
            )
        primitive = self._interpolant.antiderivative()
        rho = self.table
        return ConvexScalarFunction(
            kind=TABULATED,
            abscissae=rho,
            values=np.maximum(self.lambdas * rho - primitive(self.lambdas), 0.0),
            derivatives=self.lambdas,
            label=f"Phi<-{self.label}",
        )

    @property
    def is_homogeneous(self) -> bool:
        return self.lambdas is None

    @property
    def max_argument(self) -> float:
        return math.inf if self.is_homogeneous else float(self.lambdas[-1])

    def __call__(self, lam: ArrayLike) -> ArrayLike:
        lam_arr = np.asarray(lam, dtype=float)
        pos = np.maximum(lam_arr, 0.0)
        if self.is_homogeneous:
            out = self.coefficient * pos ** self.exponent
        else:
            if np.any(pos > self.lambdas[-1]):
                raise DomainCutoffError(
                    f"{self.label}: argument {np.max(pos):.6g} beyond table range {self.lambdas[-1]:.6g}"
                )
            out = np.maximum(self._interpolant(pos), 0.0)
        out = np.where(lam_arr > 0, out, 0.0)
        return out if np.ndim(lam) else float(out)


def emden_rhs(q: ConvexScalarFunction, tol: float = 0.0) -> GFunction:
    """g(lam) = 4*pi*sqrt(2) int_0^lam (Q')^{-1}(lam - E) sqrt(E) dE = (Phi*)'(lam)."""
    tol = tol or Config.QUAD_TOL
    if q.is_power:
        k = q.polytropic_index
        coefficient = (VELOCITY_MEASURE * (q.coefficient * q.exponent) ** (-k)
                       * _power_velocity_factor(k))
        return GFunction(coefficient=coefficient, exponent=k + 1.5, label=f"g<-{q.label}")

    lam = np.asarray(q.derivatives, dtype=float)
    values = velocity_integral(q.inverse_derivative, lam, q.abscissae, tol)
    return GFunction(lambdas=lam, table=values, label=f"g<-{q.label}")


# --- Per-Point Velocity Minimizer ---
@dataclass(frozen=True, eq=False)
class VelocityProfile:
    """g0(v) = (Q')^{-1}(lam - |v|^2/2) on |v| < sqrt(2*lam), 0 outside."""
    q: ConvexScalarFunction
    lam: float

    @property
    def support_radius(self) -> float:
        return math.sqrt(2.0 * self.lam) if self.lam > 0 else 0.0

    def __call__(self, v: ArrayLike) -> ArrayLike:
        v_arr = np.abs(np.asarray(v, dtype=float))
        out = self.q.inverse_derivative(self.lam - 0.5 * v_arr * v_arr)
        out = np.where(v_arr < self.support_radius, out, 0.0)
        return out if np.ndim(v) else float(out)

    def _moment(self, integrand: Callable[[float], float]) -> float:
        if self.lam <= 0:
            return 0.0
        integral, _ = quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200)
        return VELOCITY_MEASURE * 2.0 * self.lam ** 1.5 * integral

    def density(self) -> float:
        """int g0(v) dv; equals g(lam) from emden_rhs."""
        lam = self.lam
        return self._moment(lambda s: self.q.inverse_derivative(lam * (1 - s * s)) * s * s)

    def cost(self) -> float:
        """int (|v|^2/2 g0 + Q(g0)) dv; equals Phi(g(lam))."""
        lam = self.lam

        def integrand(s: float) -> float:
            g0 = self.q.inverse_derivative(lam * (1 - s * s))
            return (lam * s * s * g0 + self.q.value(g0)) * s * s

        return self._moment(integrand)


def per_point_velocity_minimizer(q: ConvexScalarFunction, lam: float) -> VelocityProfile:
    return VelocityProfile(q=q, lam=float(lam))


# --- Growth Envelopes ---
@dataclass(frozen=True)
class GrowthEnvelope:
    """C_lo rho^{1+1/n} <= Phi for rho >= large_threshold; Phi <= C_up rho^{1+1/n'} for rho <= small_threshold."""
    lower_index: float
    lower_constant: float
    upper_index: float
    upper_constant: float
    large_threshold: float = 0.0
    small_threshold: float = math.inf

    def __post_init__(self) -> None:
        for name in ("lower_index", "upper_index"):
            if not 0 < getattr(self, name) < 3:
                raise InvalidParameterError(f"{name} must lie in (0, 3), got {getattr(self, name)}")
        if not (self.lower_constant > 0 and self.upper_constant > 0):
            raise InvalidParameterError("envelope constants must be positive")

    @classmethod
    def from_power(cls, phi: ConvexScalarFunction) -> "GrowthEnvelope":
        n = phi.polytropic_index
        return cls(n, phi.coefficient, n, phi.coefficient)

    def lower_bound(self, rho: ArrayLike) -> ArrayLike:
        return self.lower_constant * np.asarray(rho, dtype=float) ** (1.0 + 1.0 / self.lower_index)

    def upper_bound(self, rho: ArrayLike) -> ArrayLike:
        return self.upper_constant * np.asarray(rho, dtype=float) ** (1.0 + 1.0 / self.upper_index)

    def contains(self, phi: ConvexScalarFunction, samples: np.ndarray, rtol: float = 1e-9) -> bool:
        """Check both growth bounds on the samples inside their validity ranges."""
        rho = np.asarray(samples, dtype=float)
        values = phi.value(rho)
        large = rho >= self.large_threshold
        small = rho <= self.small_threshold
        lower_ok = np.all(values[large] >= self.lower_bound(rho[large]) * (1 - rtol))
        upper_ok = np.all(values[small] <= self.upper_bound(rho[small]) * (1 + rtol))
        return bool(lower_ok and upper_ok)


def envelope_from_q_bounds(
    q_lower: ConvexScalarFunction,
    q_upper: ConvexScalarFunction,
    large_threshold: float = 0.0,
    small_threshold: float = math.inf,
) -> GrowthEnvelope:
    """Push power-law bounds Q >= q_lower, Q <= q_upper through the reduction."""
    if not (q_lower.is_power and q_upper.is_power):
        raise InvalidParameterError("growth bounds on Q must be power laws")
    phi_lower = phi_from_q(q_lower)
    phi_upper = phi_from_q(q_upper)
    return GrowthEnvelope(
        lower_index=phi_lower.polytropic_index,
        lower_constant=phi_lower.coefficient,
        upper_index=phi_upper.polytropic_index,
        upper_constant=phi_upper.coefficient,
        large_threshold=large_threshold,
        small_threshold=small_threshold,
    )


# --- Diagnostics ---
@dataclass(frozen=True)
class PowerFit:
    """Least-squares fit log y = log c + p log x."""
    exponent: float
    coefficient: float
    residual: float

    @property
    def index(self) -> float:
        """m with p = 1 + 1/m."""
        return 1.0 / (self.exponent - 1.0) if self.exponent != 1.0 else math.inf


def fit_power_law(func: Callable[[np.ndarray], np.ndarray], lo: float = 1e-4, hi: float = 1e2,
                  points: int = 61) -> PowerFit:
    """Fit a power law to func on log-spaced samples of [lo, hi]; residual is the max log deviation."""
    if not 0 < lo < hi:
        raise InvalidParameterError(f"fit range must satisfy 0 < lo < hi, got [{lo}, {hi}]")
    x = np.geomspace(lo, hi, points)
    y = np.asarray(func(x), dtype=float)
    if np.any(y <= 0):
        raise InvalidParameterError("power-law fit needs positive samples")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    residual = float(np.max(np.abs(np.log(y) - (intercept + slope * np.log(x)))))
    return PowerFit(exponent=float(slope), coefficient=float(math.exp(intercept)), residual=residual)
