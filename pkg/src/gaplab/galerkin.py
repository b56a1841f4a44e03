"""Exact spectral computation on polynomial sectors for the continuous models.

The rotation and energy-redistribution dynamics map polynomials to
polynomials of the same degree, so the generator restricts to an invariant
finite-dimensional sector.  Closed-form moments of the conditioned reference
measures turn the restricted Rayleigh problem into a small generalized
eigenvalue problem with exact-rational matrix entries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Optional, Sequence

import numpy as np

from .models import InteractionGraph, RhoSpec

DEFLATION_TOL = 1e-10
ZERO_TOL = 1e-8

_MODEL_ALIASES = {
    "kac": "kac-uniform",
    "kac-uniform": "kac-uniform",
    "kac-rho": "kac-rho",
    "gamma": "gamma-exchange-simple-average",
    "gamma-exchange-simple-average": "gamma-exchange-simple-average",
}


def _rising(x: Fraction, n: int) -> Fraction:
    r = Fraction(1)
    for t in range(n):
        r *= x + t
    return r


def _double_factorial(n: int) -> int:
    r = 1
    while n > 1:
        r *= n
        n -= 2
    return r


# ---------------------------------------------------------------------------
# multi-index bases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiIndexBasis:
    """Monomial (or symmetrized-orbit) basis of total degree <= degree.

    In "symmetric" mode each basis element is the orbit sum of a sorted
    exponent signature under coordinate permutations; this is only a valid
    invariant sector for permutation-symmetric (complete-graph) generators.
    """

    n_vars: int
    degree: int
    mode: str
    even_only: bool
    elements: tuple     # full: exponent tuples; symmetric: sorted signatures

    @classmethod
    def build(cls, n_vars: int, degree: int, mode: str = "full",
              even_only: bool = False) -> "MultiIndexBasis":
        if mode not in ("full", "symmetric"):
            raise ValueError(f"unknown basis mode {mode!r}")
        if mode == "full":
            elements = []

            def rec(prefix, rem):
                if len(prefix) == n_vars:
                    elements.append(tuple(prefix))
                    return
                for k in range(rem + 1):
                    rec(prefix + [k], rem - k)

            rec([], degree)
            elements.sort(key=lambda k: (sum(k), k))
        else:
            sigs = set()
            for total in range(degree + 1):
                for part in _partitions(total, n_vars):
                    sigs.add(part)
            elements = sorted(sigs, key=lambda k: (sum(k), k))
        if even_only:
            elements = [k for k in elements if sum(k) % 2 == 0]
        return cls(n_vars, degree, mode, even_only, tuple(elements))

    def __len__(self) -> int:
        return len(self.elements)

    def monomials_of(self, element) -> tuple:
        """Expansion of a basis element into plain monomial exponent tuples."""
        if self.mode == "full":
            return (element,)
        return tuple(sorted(set(itertools.permutations(element))))


def _partitions(total: int, max_parts: int):
    """Nonincreasing tuples of length max_parts (zero padded) summing to total."""
    def rec(rem, cap, acc):
        if len(acc) == max_parts:
            if rem == 0:
                yield tuple(acc)
            return
        for v in range(min(rem, cap), -1, -1):
            yield from rec(rem - v, v, acc + [v])
    yield from rec(total, total, [])


# ---------------------------------------------------------------------------
# moment oracles
# ---------------------------------------------------------------------------

class SphereMoments:
    """Monomial moments of the uniform measure on the sphere of squared radius omega."""

    def __init__(self, n_vars: int, omega=1):
        if n_vars < 2:
            raise ValueError("sphere needs at least two coordinates")
        self.n_vars = n_vars
        self.omega = Fraction(omega)
        if not self.omega > 0:
            raise ValueError("squared radius must be positive")
        self._cache: dict = {}

    def exact(self, k: Sequence[int]) -> Fraction:
        key = tuple(sorted((e for e in k if e), reverse=True))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if any(e % 2 for e in key):
            v = Fraction(0)
        else:
            ms = [e // 2 for e in key]
            M = sum(ms)
            num = 1
            for m in ms:
                num *= _double_factorial(2 * m - 1)
            den = 1
            for j in range(M):
                den *= self.n_vars + 2 * j
            v = self.omega ** M * Fraction(num, den)
        self._cache[key] = v
        return v

    def __call__(self, k) -> float:
        return float(self.exact(k))


class DirichletMoments:
    """Monomial moments of the symmetric Dirichlet law scaled to total omega."""

    def __init__(self, n_vars: int, gamma, omega=1):
        if n_vars < 2:
            raise ValueError("simplex needs at least two coordinates")
        self.n_vars = n_vars
        self.gamma = Fraction(gamma)
        self.omega = Fraction(omega)
        if not self.gamma > 0 or not self.omega > 0:
            raise ValueError("shape and total must be positive")
        self._cache: dict = {}

    def exact(self, k: Sequence[int]) -> Fraction:
        key = tuple(sorted((e for e in k if e), reverse=True))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        K = sum(key)
        num = Fraction(1)
        for e in key:
            num *= _rising(self.gamma, e)
        v = self.omega ** K * num / _rising(self.n_vars * self.gamma, K)
        self._cache[key] = v
        return v

    def __call__(self, k) -> float:
        return float(self.exact(k))


def sphere_moment(k: Sequence[int], N: int, omega=1) -> float:
    return SphereMoments(N, omega)(k)


def simplex_moment(k: Sequence[int], N: int, gamma, omega=1) -> float:
    return DirichletMoments(N, gamma, omega)(k)


def trig_moment(p: int, q: int) -> Fraction:
    """Average of cos^p sin^q over the uniform angle; zero unless both even."""
    if p < 0 or q < 0:
        raise ValueError("exponents must be nonnegative")
    if p % 2 or q % 2:
        return Fraction(0)
    return Fraction(_double_factorial(p - 1) * _double_factorial(q - 1),
                    _double_factorial(p + q))


def beta_moment(a: int, b: int, gamma) -> Fraction:
    """E[beta^a (1-beta)^b] for the symmetric Beta law with shape gamma."""
    g = Fraction(gamma)
    return _rising(g, a) * _rising(g, b) / _rising(2 * g, a + b)


def _laurent_coefficients(p: int, q: int) -> dict:
    """cos^p sin^q as {n: amplitude} over complex exponentials e^{in theta}."""
    coeffs = {0: 1.0 + 0.0j}

    def convolve(cur, factor):
        out: dict = {}
        for n, c in cur.items():
            for dn, fc in factor.items():
                out[n + dn] = out.get(n + dn, 0.0) + c * fc
        return out

    cos_f = {1: 0.5 + 0.0j, -1: 0.5 + 0.0j}
    sin_f = {1: -0.5j, -1: 0.5j}
    for _ in range(p):
        coeffs = convolve(coeffs, cos_f)
    for _ in range(q):
        coeffs = convolve(coeffs, sin_f)
    return coeffs


def rho_trig_moment(rho: RhoSpec, p: int, q: int, symmetrized: bool = False) -> float:
    """Integral of cos^p sin^q against the angle density (or its even part)."""
    total = 0.0 + 0.0j
    for n, c in _laurent_coefficients(p, q).items():
        if symmetrized:
            total += c * rho.coefficient(abs(n)).real
        else:
            total += c * rho.coefficient(n)
    return float(total.real)


# ---------------------------------------------------------------------------
# pair actions: conditional average of a pair monomial
# ---------------------------------------------------------------------------

def pair_average_action(model: str, a: int, b: int, gamma=None) -> dict:
    """Conditional pair average of eta_x^a eta_y^b as {(p, q): rational coeff}.

    Rotation averaging kills any odd pair; redistribution averaging spreads
    the total binomially with symmetric-Beta weights.
    """
    name = _MODEL_ALIASES.get(model, model)
    if name == "kac-uniform":
        if a % 2 or b % 2:
            return {}
        T = trig_moment(a, b)
        M = (a + b) // 2
        return {(2 * m, 2 * (M - m)): T * comb(M, m) for m in range(M + 1)}
    if name == "gamma-exchange-simple-average":
        if gamma is None:
            raise ValueError("redistribution action needs the shape parameter")
        bm = beta_moment(a, b, gamma)
        return {(m, a + b - m): bm * comb(a + b, m) for m in range(a + b + 1)}
    raise ValueError(f"no closed-form pair action for model {model!r}")


def rho_pair_action(rho: RhoSpec, a: int, b: int) -> dict:
    """Symmetrized rotation average of eta_x^a eta_y^b under the angle density.

    Expands (x cos - y sin)^a (x sin + y cos)^b and integrates each angle
    monomial against the even part of the density.
    """
    if a + b > 0 and not rho.exact_tail_zero and rho.order < a + b:
        raise ValueError(
            f"need Fourier coefficients to order {a + b}, have {rho.order}")
    out: dict = {}
    for p in range(a + 1):
        for q in range(b + 1):
            P, Q = p + b - q, a - p + q
            m = rho_trig_moment(rho, P, Q, symmetrized=True)
            if m == 0.0:
                continue
            coeff = comb(a, p) * comb(b, q) * (-1) ** (a - p) * m
            key = (p + q, a + b - p - q)
            out[key] = out.get(key, 0.0) + coeff
    return {k: v for k, v in out.items() if abs(v) > 1e-15}


# ---------------------------------------------------------------------------
# assembly and generalized eigenvalue solve
# ---------------------------------------------------------------------------

@dataclass
class GalerkinPair:
    """Quadratic form A of the negated generator and Gram matrix B on a basis."""

    model: str
    A: np.ndarray
    B: np.ndarray
    basis: MultiIndexBasis
    omega: float
    asymmetry: float


def assemble_galerkin(model: str, graph: InteractionGraph, omega=1, degree: int = 4,
                      mode: str = "full", even_only: bool = False,
                      rho: Optional[RhoSpec] = None, gamma=None) -> GalerkinPair:
    """Restrict the generator to the polynomial sector over the graph's sites."""
    name = _MODEL_ALIASES.get(model)
    if name is None:
        raise ValueError(f"unknown sector model {model!r}")
    if degree < 2:
        raise ValueError("degree must be at least 2")
    V = graph.n_sites
    if mode == "symmetric" and graph.kind != "complete":
        raise ValueError("symmetric orbits are only invariant on the complete graph")

    if name in ("kac-uniform", "kac-rho"):
        oracle = SphereMoments(V, omega)
    else:
        if gamma is None:
            raise ValueError("redistribution sector needs the shape parameter")
        oracle = DirichletMoments(V, gamma, omega)

    if name == "kac-uniform":
        action = lambda a, b: pair_average_action("kac-uniform", a, b)
    elif name == "gamma-exchange-simple-average":
        action = lambda a, b: pair_average_action("gamma-exchange-simple-average",
                                                  a, b, gamma=gamma)
    else:
        if rho is None:
            raise ValueError("rotation sector with a density needs rho=")
        action = lambda a, b: rho_pair_action(rho, a, b)

    action_cache: dict = {}

    def cached_action(a, b):
        key = (a, b)
        if key not in action_cache:
            action_cache[key] = {k: float(v) for k, v in action(a, b).items()}
        return action_cache[key]

    basis = MultiIndexBasis.build(V, degree, mode=mode, even_only=even_only)
    n = len(basis)
    scale = graph.pair_scaling

    if mode == "full":
        pos = {k: i for i, k in enumerate(basis.elements)}

        def act_on_monomial(k):
            img: dict = {}
            for (x, y) in graph.edges:
                a, b = k[x], k[y]
                if a == 0 and b == 0:
                    continue
                for (p, q), c in cached_action(a, b).items():
                    kk = list(k)
                    kk[x] = p
                    kk[y] = q
                    key = tuple(kk)
                    img[key] = img.get(key, 0.0) + scale * c
                img[k] = img.get(k, 0.0) - scale
            return img

        C = np.zeros((n, n))
        for l, k in enumerate(basis.elements):
            for key, c in act_on_monomial(k).items():
                row = pos.get(key)
                if row is None:
                    raise ArithmeticError(
                        f"sector closure violated: image monomial {key} of {k} "
                        "lies outside the basis")
                C[row, l] += c
        B = np.empty((n, n))
        for i, ki in enumerate(basis.elements):
            for j in range(i, n):
                v = oracle(tuple(x + y for x, y in zip(ki, basis.elements[j])))
                B[i, j] = v
                B[j, i] = v
    else:
        # orbit sums: act on every monomial in the orbit, re-collect by signature
        sig_pos = {s: i for i, s in enumerate(basis.elements)}
        orbit = {s: basis.monomials_of(s) for s in basis.elements}
        C = np.zeros((n, n))
        for l, s in enumerate(basis.elements):
            img: dict = {}
            for k in orbit[s]:
                for (x, y) in graph.edges:
                    a, b = k[x], k[y]
                    if a == 0 and b == 0:
                        continue
                    for (p, q), c in cached_action(a, b).items():
                        kk = list(k)
                        kk[x] = p
                        kk[y] = q
                        key = tuple(kk)
                        img[key] = img.get(key, 0.0) + scale * c
                    img[k] = img.get(k, 0.0) - scale
            by_sig: dict = {}
            for key, c in img.items():
                sig = tuple(sorted(key, reverse=True))
                by_sig[sig] = by_sig.get(sig, 0.0) + c
            for sig, total in by_sig.items():
                C[sig_pos[sig], l] += total / len(orbit[sig])
        B = np.empty((n, n))
        for i, si in enumerate(basis.elements):
            for j in range(i, n):
                v = 0.0
                for ki in orbit[si]:
                    for kj in orbit[basis.elements[j]]:
                        v += oracle(tuple(x + y for x, y in zip(ki, kj)))
                B[i, j] = v
                B[j, i] = v

    A = -B @ C
    asym = float(np.abs(A - A.T).max())
    A = 0.5 * (A + A.T)
    if asym > 1e-9 * max(1.0, float(np.abs(A).max())):
        raise ArithmeticError(f"assembled form is not symmetric: residual {asym:.2e}")
    return GalerkinPair(name, A, B, basis, float(omega), asym)


@dataclass(frozen=True)
class GalerkinGapReport:
    gap: float
    eigenvalues: np.ndarray        # spectrum on the deflated sector, ascending
    kept_dim: int
    deflated: int
    gram_condition: float
    gap_coefficients: np.ndarray   # basis coefficients of the gap eigenfunction
    basis: MultiIndexBasis


def galerkin_eigensystem(pair: GalerkinPair, deflation_tol: float = DEFLATION_TOL,
                         zero_tol: float = ZERO_TOL) -> GalerkinGapReport:
    """Solve the restricted Rayleigh problem after deflating the Gram null space."""
    s, U = np.linalg.eigh(pair.B)
    smax = float(s.max())
    if s.min() < -deflation_tol * smax:
        raise ArithmeticError(
            f"Gram matrix is indefinite beyond tolerance: min eigenvalue {s.min():.3e}")
    keep = s > deflation_tol * smax
    W = U[:, keep] / np.sqrt(s[keep])
    Ared = W.T @ pair.A @ W
    Ared = 0.5 * (Ared + Ared.T)
    ev, Q = np.linalg.eigh(Ared)
    nz = np.where(ev > zero_tol)[0]
    if len(nz) == 0:
        raise ArithmeticError("no nonzero sector mode found")
    i = int(nz[0])
    coeffs = W @ Q[:, i]
    return GalerkinGapReport(
        gap=float(ev[i]),
        eigenvalues=ev,
        kept_dim=int(keep.sum()),
        deflated=int((~keep).sum()),
        gram_condition=float(s[keep].max() / s[keep].min()),
        gap_coefficients=coeffs,
        basis=pair.basis,
    )


def galerkin_gap(pair: GalerkinPair, deflation_tol: float = DEFLATION_TOL,
                 zero_tol: float = ZERO_TOL) -> float:
    """Smallest nonzero sector eigenvalue; exact sector gap of the restriction."""
    return galerkin_eigensystem(pair, deflation_tol, zero_tol).gap


def sector_polynomial(report: GalerkinGapReport):
    """Gap eigenfunction as a callable on configuration vectors."""
    terms = []
    for c, element in zip(report.gap_coefficients, report.basis.elements):
        if abs(c) < 1e-12:
            continue
        for k in report.basis.monomials_of(element):
            terms.append((float(c), np.array(k, dtype=float)))
    exps = np.array([k for _, k in terms])
    coefs = np.array([c for c, _ in terms])

    def f(x):
        x = np.asarray(x, dtype=float)
        return float(coefs @ np.prod(x[None, :] ** exps, axis=1))

    return f


# ---------------------------------------------------------------------------
# one-dimensional conditional operator on the three-site simplex
# ---------------------------------------------------------------------------

def _solve_fraction(B: list, C: list) -> list:
    """Exact solve of B M = C for square Fraction matrices (Gaussian elimination)."""
    n = len(B)
    M = [row[:] for row in C]
    A = [row[:] for row in B]
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        M[col], M[piv] = M[piv], M[col]
        inv = Fraction(1) / A[col][col]
        A[col] = [v * inv for v in A[col]]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return M


@dataclass(frozen=True)
class ConditionalOperatorReport:
    gamma: Fraction
    degree: int
    eigenvalues: tuple            # by polynomial degree n = 0..degree
    closed_form: tuple
    max_residual: float
    mu1: Fraction
    mu2: Fraction
    linear_eigen_residual: float
    triangular_residual: float
    min_formula_value: Fraction   # (1/3) min(2 + mu1, 2 - 2 mu2)
    gram_condition: float


def conditional_moment_eigenvalue(n: int, gamma) -> Fraction:
    """Closed-form degree-n eigenvalue of the one-site conditional operator."""
    g = Fraction(gamma)
    return Fraction(-1) ** n * _rising(g, n) / _rising(2 * g, n)


def k_operator_check(gamma, degree: int = 6) -> ConditionalOperatorReport:
    """Build nu[phi(eta_2) | eta_1] on monomials via simplex moments and diagonalize.

    The assembly is exact-rational: the operator matrix is the Gram-solve
    of pair moments, which comes out triangular in the monomial basis, so its
    spectrum reads off the diagonal.
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    g = Fraction(gamma)
    oracle = DirichletMoments(3, g, 1)
    n = degree + 1
    B = [[oracle.exact((i + j, 0, 0)) for j in range(n)] for i in range(n)]
    C = [[oracle.exact((i, j, 0)) for j in range(n)] for i in range(n)]
    M = _solve_fraction(B, C)
    tri = max((abs(M[i][j]) for j in range(n) for i in range(j + 1, n)), default=Fraction(0))
    eigs = tuple(M[i][i] for i in range(n))
    closed = tuple(conditional_moment_eigenvalue(i, g) for i in range(n))
    resid = max(abs(a - b) for a, b in zip(eigs, closed))
    # linear eigenfunction zeta - 1/3 must map to -(1/2)(zeta - 1/3)
    vec = [Fraction(-1, 3), Fraction(1)] + [Fraction(0)] * (n - 2)
    img = [sum(M[i][j] * vec[j] for j in range(n)) for i in range(n)]
    lin = max(abs(img[i] + Fraction(1, 2) * vec[i]) for i in range(n))
    mu1 = Fraction(-1, 2)
    mu2 = (1 + g) / (2 * (1 + 2 * g))
    formula = Fraction(1, 3) * min(2 + mu1, 2 - 2 * mu2)
    cond = float(np.linalg.cond(np.array([[float(v) for v in row] for row in B])))
    return ConditionalOperatorReport(
        gamma=g, degree=degree, eigenvalues=eigs, closed_form=closed,
        max_residual=float(resid), mu1=min(eigs[1:]), mu2=max(eigs[1:]),
        linear_eigen_residual=float(lin), triangular_residual=float(tri),
        min_formula_value=formula, gram_condition=cond)


# ---------------------------------------------------------------------------
# small exact polynomial algebra, used for the closed-form eigen identity
# ---------------------------------------------------------------------------

def _poly_add(p: dict, q: dict, c=Fraction(1)) -> dict:
    out = dict(p)
    for k, v in q.items():
        out[k] = out.get(k, Fraction(0)) + c * v
        if out[k] == 0:
            del out[k]
    return out


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for k1, v1 in p.items():
        for k2, v2 in q.items():
            key = tuple(a + b for a, b in zip(k1, k2))
            out[key] = out.get(key, Fraction(0)) + v1 * v2
    return {k: v for k, v in out.items() if v != 0}


def _poly_eliminate_last(p: dict, omega) -> dict:
    """Substitute the last variable by omega minus the sum of the others."""
    n_vars = len(next(iter(p)))
    om = Fraction(omega)
    base = {tuple([0] * n_vars): om}
    for i in range(n_vars - 1):
        mono = [0] * n_vars
        mono[i] = 1
        base[tuple(mono)] = Fraction(-1)
    out: dict = {}
    for k, v in p.items():
        term = {k[:-1] + (0,): v}
        for _ in range(k[-1]):
            term = _poly_mul(term, base)
        out = _poly_add(out, term)
    return out


@dataclass(frozen=True)
class QuadraticIdentityReport:
    gamma: Fraction
    eigenvalue: Fraction
    max_residual: float
    conditional_residual: float


def quadratic_eigen_identity(gamma) -> QuadraticIdentityReport:
    """Verify the sum-of-squares eigenfunction on three sites at unit total.

    Applies the pair averaging to f = sum eta_i^2, adds lambda f with
    lambda = (1 + 3 gamma)/(3 (1 + 2 gamma)), eliminates the constraint and
    reports the largest non-constant coefficient (exactly zero when the
    closed form is right).  Also rechecks the conditional second moment
    coefficient directly.
    """
    g = Fraction(gamma)
    V = 3
    f: dict = {}
    for i in range(V):
        k = [0] * V
        k[i] = 2
        f[tuple(k)] = Fraction(1)
    image: dict = {}
    scale = Fraction(1, V)
    for (x, y) in itertools.combinations(range(V), 2):
        for k, v in f.items():
            a, b = k[x], k[y]
            if a == 0 and b == 0:
                continue
            for (p, q), c in pair_average_action("gamma-exchange-simple-average",
                                                 a, b, gamma=g).items():
                kk = list(k)
                kk[x] = p
                kk[y] = q
                image = _poly_add(image, {tuple(kk): v * c * scale})
            image = _poly_add(image, {k: -v * scale})
    lam = (1 + 3 * g) / (3 * (1 + 2 * g))
    resid_poly = _poly_add(image, f, c=lam)
    reduced = _poly_eliminate_last(resid_poly, 1)
    const_key = tuple([0] * V)
    resid = max((abs(v) for k, v in reduced.items() if k != const_key), default=Fraction(0))
    cond_resid = abs(beta_moment(2, 0, g) - (1 + g) / (2 * (1 + 2 * g)))
    return QuadraticIdentityReport(g, lam, float(resid), float(cond_resid))


# ---------------------------------------------------------------------------
# two-site spectrum of the rotation dynamics via angle modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AngleModeResult:
    gap: float
    kappa: float
    modes: tuple                 # (n, eigenvalue of the negated pair generator)
    truncated: bool
    note: str


def two_site_fourier_gap(rho: RhoSpec, n_max: int = 64) -> AngleModeResult:
    """Pair-generator spectrum on the circle: mode n relaxes at (1 - Re rho_hat(n))/2."""
    if n_max < 1:
        raise ValueError("need at least one mode")
    modes = []
    for n in range(1, n_max + 1):
        rate = 0.5 * (1.0 - rho.coefficient(n).real)
        modes.append((n, rate))
    rates = [r for _, r in modes]
    gap, kappa = min(rates), max(rates)
    if kappa > 1.0 + 1e-12:
        raise ArithmeticError(
            f"pair spectrum exceeds 1 (kappa = {kappa}); the angle data is not "
            "a probability density")
    truncated = not (rho.exact_tail_zero and n_max >= rho.order)
    note = ("extremes over angle modes 1..%d%s" %
            (n_max, "; higher modes not examined" if truncated else "; exact (finite spectrum tail)"))
    return AngleModeResult(gap, min(kappa, 1.0), tuple(modes), truncated, note)
