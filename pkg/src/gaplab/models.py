"""Model catalog: site spaces, conservation laws, interaction graphs.

A model is a triplet (single-site space, conserved quantity, reference
measure) together with a two-site collision mechanism.  This module fixes
those ingredients and the geometry of who collides with whom; the exact,
polynomial and Monte Carlo engines all consume these definitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

#: grid resolution used when a redistribution kernel is given as a matrix
DEFAULT_KERNEL_CELLS = 512
#: tolerance for the detailed-balance residual of a discretized kernel
DETAILED_BALANCE_TOL = 1e-8
#: quadrature nodes used to Fourier-transform an angle density
RHO_QUADRATURE_NODES = 4096
#: default number of Fourier coefficients extracted from an angle density
RHO_DEFAULT_ORDER = 64


# ---------------------------------------------------------------------------
# jump-rate functions for integer site spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFunction:
    """Occupation-dependent jump rate g(k), defined for k >= 1; g(0) = 0."""

    name: str
    fn: Callable[[int], float]

    def __call__(self, k: int) -> float:
        if k < 0:
            raise ValueError(f"occupation number must be nonnegative, got {k}")
        if k == 0:
            return 0.0
        v = float(self.fn(k))
        if not v > 0.0:
            raise ValueError(f"rate function {self.name!r}: g({k}) = {v} is not positive")
        return v

    def log_factorial(self, k: int) -> float:
        """log(g(k)!) = sum_{j<=k} log g(j), with g(0)! = 1."""
        return sum(math.log(self(j)) for j in range(1, k + 1))


G_CONSTANT_ONE = RateFunction("constant-one", lambda k: 1.0)
G_IDENTITY = RateFunction("identity", lambda k: float(k))


def rate_from_table(pairs: Sequence[tuple[int, float]], name: str = "user-table") -> RateFunction:
    """Rate function from explicit (k, g(k)) pairs; k outside the table is an error."""
    table = {int(k): float(v) for k, v in pairs}
    if not table:
        raise ValueError("rate table is empty")

    def fn(k: int) -> float:
        if k not in table:
            raise ValueError(f"rate table {name!r} has no entry for k = {k}")
        return table[k]

    return RateFunction(name, fn)


def rate_by_name(name: str) -> RateFunction:
    if name in ("constant-one", "one", "1"):
        return G_CONSTANT_ONE
    if name in ("identity", "k"):
        return G_IDENTITY
    raise ValueError(f"unknown rate function {name!r} (expected constant-one or identity)")


# ---------------------------------------------------------------------------
# site spaces and conservation laws
# ---------------------------------------------------------------------------

SITE_KINDS = ("real-line-gaussian", "positive-half-line-gamma", "nonneg-integers-zerorange")


@dataclass(frozen=True)
class SiteSpace:
    """Single-site state space plus its reference-measure parameters."""

    kind: str
    gamma: Optional[Fraction] = None      # shape parameter, gamma kind only
    g: Optional[RateFunction] = None      # jump rates, integer kind only

    def __post_init__(self):
        if self.kind not in SITE_KINDS:
            raise ValueError(f"unknown site-space kind {self.kind!r}")
        if self.kind == "positive-half-line-gamma":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("gamma site space needs a positive shape parameter")
        if self.kind == "nonneg-integers-zerorange" and self.g is None:
            raise ValueError("integer site space needs a rate function g")

    @property
    def is_discrete(self) -> bool:
        return self.kind == "nonneg-integers-zerorange"


@dataclass(frozen=True)
class ConservationLaw:
    """The per-site functional whose configuration sum is conserved."""

    form: str  # "square" or "identity"

    def __post_init__(self):
        if self.form not in ("square", "identity"):
            raise ValueError(f"unknown conservation law {self.form!r}")

    def site_value(self, v):
        return v * v if self.form == "square" else v


SQUARE = ConservationLaw("square")
IDENTITY = ConservationLaw("identity")


def conserved_total(config, law: ConservationLaw):
    """Sum of the conserved per-site quantity; exact for integer configurations."""
    total = 0
    for v in config:
        if law.form == "identity" and v < 0:
            raise ValueError(f"site value {v} outside the site space for an identity law")
        total = total + law.site_value(v)
    return total


# ---------------------------------------------------------------------------
# interaction graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InteractionGraph:
    """Vertex/edge structure with the per-pair rate normalization.

    Complete graphs carry the mean-field 1/N scaling; lattices use
    nearest-neighbor edges at unit scaling.
    """

    kind: str                       # "complete" or "lattice"
    N: int                          # vertex count (complete) or linear size (lattice)
    d: int                          # lattice dimension; 1 for complete graphs
    vertices: tuple                 # site labels (ints or coordinate tuples)
    edges: tuple                    # unordered index pairs (a, b), a < b
    pair_scaling: float

    @property
    def n_sites(self) -> int:
        return len(self.vertices)

    def index_of(self, label) -> int:
        return self.vertices.index(label)


def build_graph(kind: str, d: Optional[int] = None, N: int = 2) -> InteractionGraph:
    """Build a complete graph K_N or the cube {1..N}^d with nearest-neighbor edges."""
    if N < 2:
        raise ValueError(f"invalid size: N = {N} < 2")
    if kind == "complete":
        vertices = tuple(range(1, N + 1))
        edges = tuple((i, j) for i in range(N) for j in range(i + 1, N))
        return InteractionGraph("complete", N, 1, vertices, edges, 1.0 / N)
    if kind == "lattice":
        if d is None or d < 1:
            raise ValueError(f"invalid dimension: d = {d}")
        import itertools
        vertices = tuple(itertools.product(range(1, N + 1), repeat=d))
        pos = {v: i for i, v in enumerate(vertices)}
        edges = []
        for v in vertices:
            for ax in range(d):
                if v[ax] < N:
                    u = list(v)
                    u[ax] += 1
                    edges.append((pos[v], pos[tuple(u)]))
        return InteractionGraph("lattice", N, d, vertices, tuple(sorted(edges)), 1.0)
    raise ValueError(f"unknown graph kind {kind!r}")


# ---------------------------------------------------------------------------
# angle densities for the rotation model
# ---------------------------------------------------------------------------

class RhoSpec:
    """Angle density on (-pi, pi], as an evaluable density or Fourier data.

    Coefficients follow the convention rho_hat(n) = int e^{i n theta} rho dtheta,
    so rho_hat(0) = 1 for a probability density and rho_hat(-n) = conj(rho_hat(n)).
    Only n >= 0 is stored.
    """

    def __init__(self, density: Optional[Callable[[float], float]] = None,
                 coefficients: Optional[Sequence[complex]] = None,
                 exact_tail_zero: bool = False,
                 n_max: int = RHO_DEFAULT_ORDER,
                 name: str = "rho"):
        if (density is None) == (coefficients is None):
            raise ValueError("give exactly one of density= or coefficients=")
        self.name = name
        self.density = density
        self.exact_tail_zero = exact_tail_zero
        if coefficients is not None:
            self._coeffs = np.asarray(coefficients, dtype=complex)
            if len(self._coeffs) == 0:
                raise ValueError("need at least the order-0 coefficient")
        else:
            theta = -math.pi + 2 * math.pi * (np.arange(RHO_QUADRATURE_NODES) + 0.5) / RHO_QUADRATURE_NODES
            vals = np.array([density(t) for t in theta])
            ns = np.arange(n_max + 1)
            phase = np.exp(1j * np.outer(ns, theta))
            self._coeffs = (phase * vals).sum(axis=1) * (2 * math.pi / RHO_QUADRATURE_NODES)

    @classmethod
    def uniform(cls) -> "RhoSpec":
        return cls(coefficients=[1.0], exact_tail_zero=True, name="uniform")

    @property
    def order(self) -> int:
        return len(self._coeffs) - 1

    def coefficient(self, n: int) -> complex:
        """rho_hat(n); negative n via conjugate symmetry."""
        a = abs(n)
        if a > self.order:
            if self.exact_tail_zero:
                return 0.0
            raise ValueError(
                f"Fourier order {a} exceeds available order {self.order} for {self.name!r}")
        c = self._coeffs[a]
        return complex(c).conjugate() if n < 0 else complex(c)

    def validate(self) -> "ValidationReport":
        checks = []
        c0 = self.coefficient(0)
        checks.append(CheckResult("normalization rho_hat(0) = 1",
                                  abs(c0 - 1.0) < 1e-6, abs(c0 - 1.0),
                                  f"rho_hat(0) = {c0.real:.6g}"))
        mags = [abs(self.coefficient(n)) for n in range(1, self.order + 1)]
        worst = max(mags, default=0.0)
        checks.append(CheckResult("coefficient bound |rho_hat(n)| <= 1",
                                  worst <= 1.0 + 1e-9, max(0.0, worst - 1.0),
                                  f"max |rho_hat| = {worst:.6g}"))
        # |rho_hat(n)| = 1 for n >= 1 forces a point mass, not a density
        checks.append(CheckResult("no point-mass concentration",
                                  worst < 1.0 - 1e-12, 0.0,
                                  "some |rho_hat(n)| = 1 with n >= 1" if worst >= 1.0 - 1e-12 else ""))
        if self.density is not None:
            theta = -math.pi + 2 * math.pi * (np.arange(RHO_QUADRATURE_NODES) + 0.5) / RHO_QUADRATURE_NODES
            vals = np.array([self.density(t) for t in theta])
            neg = float(-min(0.0, vals.min()))
            checks.append(CheckResult("density nonnegative", neg < 1e-12, neg, ""))
            mass = float(vals.sum() * 2 * math.pi / RHO_QUADRATURE_NODES)
            checks.append(CheckResult("density integrates to 1",
                                      abs(mass - 1.0) < 1e-6, abs(mass - 1.0),
                                      f"integral = {mass:.8g}"))
        return ValidationReport(checks)


# ---------------------------------------------------------------------------
# energy-exchange specification
# ---------------------------------------------------------------------------

@dataclass
class GammaExchangeSpec:
    """Pair energy-redistribution model on the positive half line.

    The pair rate factors as lambda_s(total) * lambda_r(fraction), and the
    redistribution fraction is drawn from `kernel`: either the closed-form
    symmetric Beta kernel ("simple-average") or a row-stochastic matrix on a
    uniform grid of [0, 1].
    """

    gamma: Fraction
    lambda_s: Callable[[float], float] = lambda s: 1.0
    lambda_r: Callable[[float], float] = lambda b: 1.0
    kernel: object = "simple-average"   # or (cells, cells) ndarray
    cells: int = DEFAULT_KERNEL_CELLS

    def __post_init__(self):
        self.gamma = Fraction(self.gamma)
        if not self.gamma > 0:
            raise ValueError("shape parameter must be positive")
        if isinstance(self.kernel, np.ndarray):
            if self.kernel.ndim != 2 or self.kernel.shape[0] != self.kernel.shape[1]:
                raise ValueError("discretized kernel must be a square matrix")
            self.cells = self.kernel.shape[0]

    def grid(self) -> np.ndarray:
        """Cell midpoints of the uniform grid on [0, 1]."""
        return (np.arange(self.cells) + 0.5) / self.cells

    def fraction_weights(self) -> np.ndarray:
        """Invariant fraction distribution p on the grid, normalized cell masses."""
        b = self.grid()
        g = float(self.gamma)
        w = (b * (1 - b)) ** (g - 1) * np.array([self.lambda_r(x) for x in b])
        return w / w.sum()

    def kernel_matrix(self) -> np.ndarray:
        """Row-stochastic redistribution kernel on the grid."""
        if isinstance(self.kernel, np.ndarray):
            rows = self.kernel.astype(float)
            sums = rows.sum(axis=1, keepdims=True)
            return rows / sums
        # simple-average kernel: rows all equal to the symmetric Beta cell masses
        b = self.grid()
        g = float(self.gamma)
        w = (b * (1 - b)) ** (g - 1)
        w = w / w.sum()
        return np.tile(w, (self.cells, 1))


# ---------------------------------------------------------------------------
# model specification and catalog
# ---------------------------------------------------------------------------

FAMILIES = ("kac-uniform", "kac-rho", "gamma-exchange", "zero-range", "simple-average")

MODEL_IDS = {
    "kac": "kac-uniform",
    "kac-rho": "kac-rho",
    "gamma-exchange": "gamma-exchange",
    "zero-range": "zero-range",
    "simple-average": "simple-average",
}


@dataclass(frozen=True)
class ModelSpec:
    """A collision family plus its parameters; fixes the two-site operator."""

    family: str
    rho: Optional[RhoSpec] = None
    exchange: Optional[GammaExchangeSpec] = None
    g: Optional[RateFunction] = None
    # simple-average only: which site space the conditional average acts on
    site_kind: str = "nonneg-integers-zerorange"
    gamma: Optional[Fraction] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "kac-rho" and self.rho is None:
            raise ValueError("kac-rho needs a RhoSpec")
        if self.family == "gamma-exchange" and self.exchange is None:
            raise ValueError("gamma-exchange needs a GammaExchangeSpec")
        if self.family == "zero-range" and self.g is None:
            raise ValueError("zero-range needs a rate function g")
        if self.family == "simple-average":
            if self.site_kind == "nonneg-integers-zerorange" and self.g is None:
                raise ValueError("integer simple-average needs a rate function g")
            if self.site_kind == "positive-half-line-gamma" and self.gamma is None:
                raise ValueError("gamma simple-average needs a shape parameter")

    def site_space(self) -> SiteSpace:
        if self.family in ("kac-uniform", "kac-rho"):
            return SiteSpace("real-line-gaussian")
        if self.family == "gamma-exchange":
            return SiteSpace("positive-half-line-gamma", gamma=self.exchange.gamma)
        if self.family == "zero-range":
            return SiteSpace("nonneg-integers-zerorange", g=self.g)
        if self.site_kind == "real-line-gaussian":
            return SiteSpace("real-line-gaussian")
        if self.site_kind == "positive-half-line-gamma":
            return SiteSpace("positive-half-line-gamma", gamma=Fraction(self.gamma))
        return SiteSpace("nonneg-integers-zerorange", g=self.g)

    def law(self) -> ConservationLaw:
        return SQUARE if self.site_space().kind == "real-line-gaussian" else IDENTITY

    @property
    def is_discrete(self) -> bool:
        return self.site_space().is_discrete


def model_from_id(model_id: str, *, g: Optional[RateFunction] = None,
                  gamma=None, rho: Optional[RhoSpec] = None,
                  exchange: Optional[GammaExchangeSpec] = None) -> ModelSpec:
    """Resolve a CLI model identifier to a ModelSpec."""
    if model_id not in MODEL_IDS:
        raise ValueError(f"unknown model id {model_id!r} (choose from {sorted(MODEL_IDS)})")
    family = MODEL_IDS[model_id]
    if family == "kac-uniform":
        return ModelSpec("kac-uniform")
    if family == "kac-rho":
        return ModelSpec("kac-rho", rho=rho if rho is not None else RhoSpec.uniform())
    if family == "gamma-exchange":
        if exchange is None:
            exchange = GammaExchangeSpec(gamma=Fraction(gamma if gamma is not None else 1))
        return ModelSpec("gamma-exchange", exchange=exchange)
    if family == "zero-range":
        return ModelSpec("zero-range", g=g if g is not None else G_CONSTANT_ONE)
    if gamma is not None:
        return ModelSpec("simple-average", gamma=Fraction(gamma),
                         site_kind="positive-half-line-gamma")
    return ModelSpec("simple-average", g=g if g is not None else G_CONSTANT_ONE)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            extra = f" ({c.detail})" if c.detail else ""
            lines.append(f"  [{status}] {c.name}: residual {c.residual:.3g}{extra}")
        return "\n".join(lines)


def validate_model(spec: ModelSpec) -> ValidationReport:
    """Run the structural checks appropriate for the family; never raises."""
    checks: list[CheckResult] = []
    if spec.family == "kac-rho":
        return spec.rho.validate()
    if spec.family == "kac-uniform":
        checks.append(CheckResult("uniform angle density", True, 0.0))
        return ValidationReport(checks)
    if spec.family == "gamma-exchange":
        ex = spec.exchange
        p = ex.fraction_weights()
        K = ex.kernel_matrix()
        flux = p[:, None] * K
        db = float(np.abs(flux - flux.T).max())
        checks.append(CheckResult("detailed balance of fraction kernel",
                                  db < DETAILED_BALANCE_TOL, db,
                                  f"grid of {ex.cells} cells"))
        checks.append(CheckResult("kernel rows nonnegative",
                                  bool((K >= 0).all()), float(-min(0.0, K.min()))))
        grid = np.linspace(1e-3, 1 - 1e-3, 101)
        lr = np.array([ex.lambda_r(b) for b in grid])
        checks.append(CheckResult("lambda_r bounded on sample grid",
                                  bool(np.isfinite(lr).all()),
                                  0.0, f"sup on grid = {lr.max():.4g}"))
        sgrid = np.linspace(1e-3, 10.0, 101)
        ls = np.array([ex.lambda_s(s) for s in sgrid])
        pos = bool((ls > 0).all() and (lr > 0).all())
        checks.append(CheckResult("rates positive on sample grid", pos,
                                  0.0 if pos else 1.0))
        return ValidationReport(checks)
    # integer families
    g = spec.g
    try:
        vals = [g(k) for k in range(1, 32)]
        ok = all(v > 0 for v in vals)
        checks.append(CheckResult("g positive for 1 <= k <= 31", ok, 0.0))
    except ValueError as err:
        checks.append(CheckResult("g positive for 1 <= k <= 31", False, 1.0, str(err)))
    checks.append(CheckResult("g(0) = 0 convention", g(0) == 0.0, g(0)))
    return ValidationReport(checks)
