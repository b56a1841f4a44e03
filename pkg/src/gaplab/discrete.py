"""Exact generators and spectra for integer-valued configuration spaces.

Enumerates the conditioned state space, builds dense generator matrices for
the particle-jump and conditional-average dynamics on any interaction graph,
and diagonalizes their symmetrized forms.  Also hosts the one-dimensional
conditional kernel matrices used for the three-site reduction of the
zero-range family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .models import InteractionGraph, ModelSpec, RateFunction, build_graph

#: hard cap on enumerated state spaces
STATE_CAP = 2_000_000
#: absolute threshold separating the zero mode from the gap
ZERO_TOL = 1e-8
#: eigenvalues of the negated symmetrized generator below this are a bug
PSD_TOL = -1e-9
#: switch from dense full diagonalization to iterative extremal solves
DENSE_LIMIT = 4000


class TooLargeError(ValueError):
    """State space exceeds the enumeration cap; use the Monte Carlo route."""


# ---------------------------------------------------------------------------
# state enumeration and stationary weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateSet:
    """All nonnegative integer configurations on `n_sites` sites summing to omega."""

    n_sites: int
    omega: int
    states: np.ndarray          # (n, n_sites) int64, lexicographic
    index: dict                 # tuple(config) -> row

    def __len__(self) -> int:
        return self.states.shape[0]

    def position(self, config) -> int:
        return self.index[tuple(int(v) for v in config)]


def state_count(V: int, omega: int) -> int:
    return math.comb(omega + V - 1, V - 1)


def enumerate_states(V: int, omega: int, cap: int = STATE_CAP) -> StateSet:
    """Lexicographically ordered compositions of omega into V nonnegative parts."""
    if V < 1:
        raise ValueError(f"need at least one site, got V = {V}")
    if omega < 0:
        raise ValueError(f"total must be nonnegative, got {omega}")
    n = state_count(V, omega)
    if n > cap:
        raise TooLargeError(
            f"{n} states for (V={V}, omega={omega}) exceeds the cap {cap}; "
            "this regime is for the Monte Carlo estimators (gap-mc)")
    out = np.empty((n, V), dtype=np.int64)
    row = 0

    def rec(prefix, rem, depth):
        nonlocal row
        if depth == V - 1:
            out[row, :depth] = prefix[:depth]
            out[row, depth] = rem
            row += 1
            return
        for k in range(rem + 1):
            prefix[depth] = k
            rec(prefix, rem - k, depth + 1)

    rec(np.zeros(V, dtype=np.int64), omega, 0)
    index = {tuple(int(v) for v in out[i]): i for i in range(n)}
    return StateSet(V, omega, out, index)


@dataclass(frozen=True)
class Measure:
    """Normalized stationary weights over a StateSet."""

    states: StateSet
    weights: np.ndarray

    def expectation(self, values: np.ndarray) -> float:
        return float(self.weights @ values)

    def quad(self, values: np.ndarray) -> float:
        """Second moment <values^2>."""
        return float(self.weights @ (values * values))


def stationary_weights(g: RateFunction, states: StateSet) -> Measure:
    """Weights proportional to prod_x 1/g(eta_x)!, computed in log space.

    The fugacity factor is constant on a fixed-total state space and cancels.
    """
    if len(states) == 0:
        raise ValueError("empty state set")
    lgf = np.array([g.log_factorial(k) for k in range(states.omega + 1)])
    logw = -lgf[states.states].sum(axis=1)
    logw -= logw.max()
    w = np.exp(logw)
    total = w.sum()
    if not np.isfinite(total) or total <= 0:
        raise ArithmeticError("non-finite stationary weights")
    return Measure(states, w / total)


def apply_exchange(config, x: int, y: int):
    """Swap the occupations of sites x and y (1-based); x == y is the identity."""
    V = len(config)
    if not (1 <= x <= V and 1 <= y <= V):
        raise ValueError(f"sites must lie in 1..{V}, got ({x}, {y})")
    out = list(config)
    out[x - 1], out[y - 1] = out[y - 1], out[x - 1]
    return tuple(out)


# ---------------------------------------------------------------------------
# generator matrices
# ---------------------------------------------------------------------------

@dataclass
class GeneratorMatrix:
    """Dense generator L over a StateSet with its reversible measure.

    The symmetrized form S = D^{1/2} L D^{-1/2} (D = diag weights) is what
    gets diagonalized; reversibility makes S symmetric.
    """

    L: np.ndarray
    measure: Measure
    label: str = ""

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    def symmetrized(self) -> np.ndarray:
        d = np.sqrt(self.measure.weights)
        S = (d[:, None] * self.L) / d[None, :]
        return 0.5 * (S + S.T)

    def symmetry_residual(self) -> float:
        d = np.sqrt(self.measure.weights)
        S = (d[:, None] * self.L) / d[None, :]
        return float(np.abs(S - S.T).max())

    def row_sum_residual(self) -> float:
        return float(np.abs(self.L.sum(axis=1)).max())

    def spectrum(self) -> np.ndarray:
        """All eigenvalues of -S, ascending."""
        return np.linalg.eigvalsh(-self.symmetrized())


def pair_average_matrix(states: StateSet, measure: Measure, x: int, y: int) -> scipy.sparse.csr_matrix:
    """Stochastic matrix of the conditional average over the pair (x, y), 0-based sites."""
    n = len(states)
    rows, cols, vals = [], [], []
    w = measure.weights
    for i in range(n):
        s = states.states[i]
        tot = int(s[x] + s[y])
        targets = []
        t = s.copy()
        for a in range(tot + 1):
            t[x] = a
            t[y] = tot - a
            targets.append(states.index[tuple(int(v) for v in t)])
        pw = w[targets]
        pw = pw / pw.sum()
        rows.extend([i] * len(targets))
        cols.extend(targets)
        vals.extend(pw.tolist())
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def exchange_permutation(states: StateSet, x: int, y: int) -> np.ndarray:
    """Row permutation of the state index under swapping sites x and y (0-based)."""
    n = len(states)
    perm = np.empty(n, dtype=np.int64)
    for i in range(n):
        s = states.states[i].copy()
        s[x], s[y] = s[y], s[x]
        perm[i] = states.index[tuple(int(v) for v in s)]
    return perm


def build_simple_average_generator(graph: InteractionGraph, states: StateSet,
                                   measure: Measure) -> GeneratorMatrix:
    """Generator summing (conditional average - identity) over the graph's pairs."""
    if states.n_sites != graph.n_sites:
        raise ValueError(
            f"state set has {states.n_sites} sites but graph has {graph.n_sites}")
    n = len(states)
    L = np.zeros((n, n))
    scale = graph.pair_scaling
    for (x, y) in graph.edges:
        E = pair_average_matrix(states, measure, x, y)
        L += scale * E.toarray()
        L[np.diag_indices(n)] -= scale
    return GeneratorMatrix(L, measure, label="simple-average")


def build_zero_range_generator(graph: InteractionGraph, states: StateSet,
                               g: RateFunction) -> GeneratorMatrix:
    """Particle-jump generator: site x fires toward a paired site at rate g(eta_x)."""
    if states.n_sites != graph.n_sites:
        raise ValueError(
            f"state set has {states.n_sites} sites but graph has {graph.n_sites}")
    n = len(states)
    L = np.zeros((n, n))
    scale = graph.pair_scaling
    gv = np.array([g(k) if k > 0 else 0.0 for k in range(states.omega + 1)])
    for i in range(n):
        s = states.states[i]
        for (x, y) in graph.edges:
            for (u, v) in ((x, y), (y, x)):
                if s[u] > 0:
                    r = scale * gv[s[u]]
                    t = s.copy()
                    t[u] -= 1
                    t[v] += 1
                    L[i, states.index[tuple(int(q) for q in t)]] += r
                    L[i, i] -= r
    measure = stationary_weights(g, states)
    return GeneratorMatrix(L, measure, label="zero-range")


def build_generator(model: ModelSpec, graph: InteractionGraph, states: StateSet) -> GeneratorMatrix:
    """Dispatch on the (discrete) model family."""
    if not model.is_discrete:
        raise ValueError(f"exact generators need a discrete family, got {model.family}")
    if model.family == "zero-range":
        return build_zero_range_generator(graph, states, model.g)
    measure = stationary_weights(model.g, states)
    return build_simple_average_generator(graph, states, measure)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

def _extreme_eigs(S: np.ndarray, want_low: bool) -> tuple[float, float, Optional[float]]:
    """(top, second-from-top, bottom or None) eigenvalues of the symmetric S."""
    n = S.shape[0]
    if n <= DENSE_LIMIT:
        if n <= 400:
            ev = np.linalg.eigvalsh(S)
        else:
            ev = scipy.linalg.eigh(S, eigvals_only=True,
                                   subset_by_index=[n - 2, n - 1])
            if want_low:
                low = scipy.linalg.eigh(S, eigvals_only=True, subset_by_index=[0, 0])
                ev = np.concatenate([low, ev])
        top, second = ev[-1], ev[-2]
        bottom = ev[0] if want_low else None
        return float(top), float(second), (float(bottom) if bottom is not None else None)
    Ssp = scipy.sparse.csr_matrix(S)
    hi = scipy.sparse.linalg.eigsh(Ssp, k=2, which="LA", return_eigenvectors=False, tol=1e-11)
    hi = np.sort(hi)
    bottom = None
    if want_low:
        lo = scipy.sparse.linalg.eigsh(Ssp, k=1, which="SA", return_eigenvectors=False, tol=1e-11)
        bottom = float(lo[0])
    return float(hi[-1]), float(hi[-2]), bottom


def spectral_gap(gen: GeneratorMatrix, zero_tol: float = ZERO_TOL) -> float:
    """Smallest eigenvalue of the negated symmetrized generator above `zero_tol`.

    Returns +inf on a one-point state space (Dirac convention).
    Raises if the generator fails nonnegativity, which signals a construction bug.
    """
    if gen.dim == 1:
        return math.inf
    S = gen.symmetrized()
    top, second, _ = _extreme_eigs(S, want_low=False)
    if top > -PSD_TOL:
        raise ArithmeticError(
            f"generator is not negative semidefinite: max eigenvalue {top:.3e}")
    gap = -second
    if gap <= zero_tol:
        # fully degenerate block structure; fall back to the full spectrum
        ev = np.linalg.eigvalsh(-S)
        nz = ev[ev > zero_tol]
        return float(nz.min()) if len(nz) else math.inf
    return float(gap)


def gap_and_kappa(gen: GeneratorMatrix, zero_tol: float = ZERO_TOL) -> tuple[float, float]:
    """(spectral gap, largest eigenvalue) of the negated symmetrized generator."""
    if gen.dim == 1:
        return math.inf, math.inf
    S = gen.symmetrized()
    top, second, bottom = _extreme_eigs(S, want_low=True)
    if top > -PSD_TOL:
        raise ArithmeticError(
            f"generator is not negative semidefinite: max eigenvalue {top:.3e}")
    return float(-second), float(-bottom)


def gap_eigenfunction(gen: GeneratorMatrix, zero_tol: float = ZERO_TOL) -> tuple[float, np.ndarray]:
    """Gap eigenvalue and its eigenfunction as a table over states (unit variance)."""
    S = gen.symmetrized()
    ev, U = np.linalg.eigh(-S)
    nz = np.where(ev > zero_tol)[0]
    if len(nz) == 0:
        raise ArithmeticError("no nonzero mode found")
    i = nz[0]
    f = U[:, i] / np.sqrt(gen.measure.weights)
    return float(ev[i]), f


def exact_gap(model: ModelSpec, graph: InteractionGraph, omega: int,
              cap: int = STATE_CAP) -> tuple[float, float, int]:
    """(gap, kappa, dimension) for a discrete model on a graph at total omega."""
    states = enumerate_states(graph.n_sites, omega, cap=cap)
    if len(states) == 1:
        return math.inf, math.inf, 1
    gen = build_generator(model, graph, states)
    gap, kappa = gap_and_kappa(gen)
    return gap, kappa, len(states)


# ---------------------------------------------------------------------------
# two-site sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoSiteRow:
    omega: int
    gap: float
    kappa: float


@dataclass(frozen=True)
class TwoSiteTable:
    family: str
    rows: tuple
    inf_gap: float
    sup_kappa: float
    trend: str
    note: str = "extremes over the swept totals only; no claim about the full infimum"

    def running_sup_kappa(self, omega: int) -> float:
        vals = [r.kappa for r in self.rows if r.omega <= omega and math.isfinite(r.kappa)]
        if not vals:
            raise ValueError(f"no finite rows at or below omega = {omega}")
        return max(vals)


def two_site_spectrum(model: ModelSpec, omegas: Sequence[int]) -> TwoSiteTable:
    """Exact pair spectrum per total: gap and top eigenvalue of the halved pair operator."""
    omegas = list(omegas)
    if not omegas:
        raise ValueError("empty omega range")
    graph = build_graph("complete", N=2)
    rows = []
    for om in omegas:
        if om == 0:
            rows.append(TwoSiteRow(0, math.inf, math.inf))
            continue
        gap, kappa, _ = exact_gap(model, graph, om)
        rows.append(TwoSiteRow(om, gap, kappa))
    finite = [r.gap for r in rows if math.isfinite(r.gap)]
    inf_gap = min(finite) if finite else math.inf
    fkap = [r.kappa for r in rows if math.isfinite(r.kappa)]
    sup_kappa = max(fkap) if fkap else math.inf
    if len(finite) >= 2:
        if all(a >= b - 1e-12 for a, b in zip(finite, finite[1:])):
            trend = "nonincreasing"
        elif all(a <= b + 1e-12 for a, b in zip(finite, finite[1:])):
            trend = "nondecreasing"
        else:
            trend = "mixed"
    else:
        trend = "single-point"
    return TwoSiteTable(model.family, tuple(rows), inf_gap, sup_kappa, trend)


# ---------------------------------------------------------------------------
# conditional kernel matrices for the three-site reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelMatrix:
    n: int
    matrix: np.ndarray
    spectrum: np.ndarray          # real eigenvalues, ascending
    stationary: np.ndarray        # left Perron-Frobenius vector, normalized
    detailed_balance_residual: float


def kernel_matrix(g: RateFunction, n: int) -> KernelMatrix:
    """The n-by-n conditional kernel of one free coordinate given another.

    Entry (i, j), 1-based: zero when i <= n - j, otherwise the normalized
    product weight 1/(g(n-j)! g(i-1-(n-j))!).  Rows are exactly stochastic.
    Assembled in log space to dodge factorial overflow.
    """
    if n < 1:
        raise ValueError("kernel size must be >= 1")
    lgf = np.array([g.log_factorial(k) for k in range(n)])
    K = np.zeros((n, n))
    log_norm = np.empty(n)
    for i in range(1, n + 1):
        terms = np.array([-(lgf[l] + lgf[i - 1 - l]) for l in range(i)])
        m = terms.max()
        log_norm[i - 1] = m + math.log(np.exp(terms - m).sum())
        for j in range(1, n + 1):
            m_occ = n - j
            if i > m_occ:
                K[i - 1, j - 1] = math.exp(-(lgf[m_occ] + lgf[i - 1 - m_occ]) - log_norm[i - 1])
    # stationary law of the indexed coordinate: occupation n-i with the other
    # two sites holding i-1; weights in log space for the same overflow reason.
    lpi = np.array([-lgf[n - i] + log_norm[i - 1] for i in range(1, n + 1)])
    lpi -= lpi.max()
    pi = np.exp(lpi)
    pi /= pi.sum()
    flux = pi[:, None] * K
    db = float(np.abs(flux - flux.T).max())
    if db < 1e-7:
        d = np.sqrt(pi)
        S = (d[:, None] * K) / d[None, :]
        spec = np.linalg.eigvalsh(0.5 * (S + S.T))
    else:
        ev = np.linalg.eigvals(K)
        if np.abs(ev.imag).max() > 1e-7:
            raise ArithmeticError(
                f"reversibility violation: complex kernel eigenvalue (imag "
                f"{np.abs(ev.imag).max():.2e}, detailed-balance residual {db:.2e})")
        spec = np.sort(ev.real)
    return KernelMatrix(n, K, spec, pi, db)


@dataclass(frozen=True)
class KernelExtremes:
    mu1: float
    mu2: float
    table: tuple      # (n, min(Sp\{1}), max(Sp\{1}))
    tail_change: float


def kernel_spectrum_extremes(g: RateFunction, n_max: int) -> KernelExtremes:
    """Extremes of the kernel spectra with the top eigenvalue removed, n = 2..n_max."""
    if n_max < 2:
        raise ValueError("need n_max >= 2")
    mu1, mu2 = math.inf, -math.inf
    rows = []
    history = []
    for n in range(2, n_max + 1):
        km = kernel_matrix(g, n)
        ev = km.spectrum
        top = int(np.argmin(np.abs(ev - 1.0)))
        if abs(ev[top] - 1.0) > 1e-9:
            raise ArithmeticError(
                f"kernel n={n}: no eigenvalue within 1e-9 of 1 (closest {ev[top]:.12f})")
        rest = np.delete(ev, top)
        lo, hi = float(rest.min()), float(rest.max())
        mu1, mu2 = min(mu1, lo), max(mu2, hi)
        rows.append((n, lo, hi))
        history.append(mu2)
    half = history[max(0, len(history) // 2 - 1)]
    return KernelExtremes(mu1, mu2, tuple(rows), abs(mu2 - half))


# ---------------------------------------------------------------------------
# finite-range scan of the jump-rate growth conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateGrowthReport:
    increment_sup: float
    per_k0: tuple                 # (k0, min gap over the scanned range)
    best: Optional[tuple]         # (k0, C) with the smallest k0 giving C > 0
    note: str = ("finite-range scan over 1 <= j < k <= k_max; "
                 "suggestive only, not a proof of the growth condition")


def lsv_condition_check(g: RateFunction, k_max: int, k0_max: int) -> RateGrowthReport:
    """Scan the bounded-increment and uniform-gap conditions for the rate function."""
    if not (k_max >= k0_max >= 1):
        raise ValueError("need k_max >= k0_max >= 1")
    vals = np.array([g(k) for k in range(1, k_max + 2)])
    inc = float(np.abs(np.diff(vals)).max())
    per = []
    best = None
    for k0 in range(1, k0_max + 1):
        worst = math.inf
        for j in range(1, k_max - k0 + 1):
            diff = vals[j + k0 - 1:k_max] - vals[j - 1]
            if len(diff):
                worst = min(worst, float(diff.min()))
        if worst is math.inf:
            continue
        per.append((k0, worst))
        if best is None and worst > 0:
            best = (k0, worst)
    return RateGrowthReport(inc, tuple(per), best)
