"""Hermite-expansion machinery.

Probabilists' Hermite polynomials, bivariate Hermite coefficients
a_{kl} = E[h(xi, eta) H_k(xi) H_l(eta)] and their rank, the class
coefficients J_k(x) driving the empirical-process limit, summability
diagnostics for sum |a_{kl}| / sqrt(k! l!), and the scaling constants
c_m, d_n, d'_n, H, K.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.integrate import quad
from scipy.special import gammaln

from .errors import ParameterError, RankNotFoundError, RegimeError
from .lrd_sim import Subordinator, replication_rng

QUADRATURE = "quadrature"
CLOSED_FORM = "closed_form"
MONTE_CARLO = "monte_carlo"

DEFAULT_QUAD_ORDER = 200


def hermite_eval(k: int, x):
    """Probabilists' Hermite polynomial H_k(x) by three-term recurrence.

    H_0 = 1, H_1 = x, H_{k+1}(x) = x H_k(x) - k H_{k-1}(x).
    """
    if k < 0:
        raise ParameterError("Hermite degree must be >= 0")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if k == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for j in range(1, k):
        h, h_prev = x * h - j * h_prev, h
    return h if h.ndim else float(h)


def hermite_design(max_degree: int, x: np.ndarray) -> np.ndarray:
    """Matrix of H_0..H_max_degree evaluated at x, shape (Q+1, len(x))."""
    x = np.asarray(x, dtype=float)
    out = np.empty((max_degree + 1, x.size))
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = x
    for j in range(1, max_degree):
        out[j + 1] = x * out[j] - j * out[j - 1]
    return out


def gauss_hermite_prob(order: int):
    """Nodes and weights so that E[f(xi)] ~ sum w_i f(x_i), xi ~ N(0,1)."""
    x, w = hermgauss(order)
    return x * np.sqrt(2.0), w / np.sqrt(np.pi)


def _log_factorial(k) -> np.ndarray:
    return gammaln(np.asarray(k, dtype=float) + 1.0)


@dataclass
class HermiteCoeffTable:
    """Truncated coefficient matrix a_{kl} for total degrees k+l <= Q.

    Entries with k+l > Q are NaN (unset).  ``rank`` is the smallest
    k+l >= 1 with |a_{kl}| > tol, or None if undetectable at this Q.
    """

    Q: int
    entries: np.ndarray
    source: str
    tol: float
    rank: int | None
    quad_order: int | None = None
    warnings: list = field(default_factory=list)

    @property
    def a00(self) -> float:
        return float(self.entries[0, 0])

    def get(self, k: int, l: int) -> float:
        if k + l > self.Q:
            raise ParameterError(f"entry ({k},{l}) beyond total degree {self.Q}")
        return float(self.entries[k, l])

    def diagonal(self, m: int) -> dict:
        """Entries {(k, l): a_{kl}} with k+l = m and |a| > tol."""
        out = {}
        for k in range(m + 1):
            a = self.entries[k, m - k]
            if abs(a) > self.tol:
                out[(k, m - k)] = float(a)
        return out

    def to_json_dict(self) -> dict:
        kept = []
        for k in range(self.Q + 1):
            for l in range(self.Q + 1 - k):
                a = float(self.entries[k, l])
                if abs(a) > self.tol:
                    kept.append([k, l, a])
        return {"Q": self.Q, "source": self.source, "tol": self.tol,
                "entries": kept, "rank": self.rank}

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def from_json_dict(cls, d: dict) -> "HermiteCoeffTable":
        q = int(d["Q"])
        entries = np.full((q + 1, q + 1), np.nan)
        for k in range(q + 1):
            entries[k, :q + 1 - k] = 0.0
        for k, l, a in d["entries"]:
            entries[int(k), int(l)] = float(a)
        return cls(Q=q, entries=entries, source=str(d["source"]),
                   tol=float(d["tol"]), rank=d.get("rank"))


def _finish_table(entries, Q, source, tol, quad_order=None, warns=None):
    table = HermiteCoeffTable(Q=Q, entries=entries, source=source, tol=tol,
                              rank=None, quad_order=quad_order,
                              warnings=list(warns or []))
    try:
        table.rank = rank_2d(table, tol)
    except RankNotFoundError:
        table.rank = None
    return table


def coeffs_2d(kernel, Q: int, quad_order: int = DEFAULT_QUAD_ORDER,
              tol: float | None = None) -> HermiteCoeffTable:
    """Tensor Gauss-Hermite coefficients a_{kl} = E[h(xi,eta)H_k(xi)H_l(eta)].

    ``kernel`` is any object with a vectorized ``eval(x, y)``; a table with
    a machine-readable warning is returned for kernels tagged discontinuous
    (tensor quadrature converges slowly across jumps).
    """
    if Q < 1:
        raise ParameterError("Q must be >= 1")
    if quad_order < Q + 1:
        raise ParameterError("quad_order must be at least Q + 1")
    x, w = gauss_hermite_prob(quad_order)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    hv = np.asarray(kernel.eval(xx, yy), dtype=float)
    if not np.all(np.isfinite(hv)):
        raise ParameterError("kernel evaluated to a non-finite value at "
                             "a quadrature node")
    design = hermite_design(Q, x) * w  # row k: H_k(x_i) w_i
    full = design @ hv @ design.T
    entries = np.full((Q + 1, Q + 1), np.nan)
    for k in range(Q + 1):
        entries[k, :Q + 1 - k] = full[k, :Q + 1 - k]
    if tol is None:
        second_moment = float(np.einsum("i,ij,j->", w, hv * hv, w))
        tol = 1e-8 * math.sqrt(1.0 + second_moment)
    warns = []
    if "discontinuous" in {t.lower() for t in getattr(kernel, "tags", ())}:
        warns.append("quadrature-on-discontinuous-kernel")
    return _finish_table(entries, Q, QUADRATURE, tol, quad_order, warns)


def coeffs_2d_montecarlo(kernel, Q: int, pairs: int = 10 ** 7,
                         seed: int = 0, tol: float | None = None,
                         batch: int = 10 ** 6):
    """Monte Carlo coefficients for kernels where quadrature is unreliable.

    Returns (table, standard_errors) with matching shapes.
    """
    if Q < 1:
        raise ParameterError("Q must be >= 1")
    rng = replication_rng(seed)
    sums = np.zeros((Q + 1, Q + 1))
    sq_sums = np.zeros((Q + 1, Q + 1))
    total = 0
    while total < pairs:
        size = min(batch, pairs - total)
        xi = rng.standard_normal(size)
        eta = rng.standard_normal(size)
        hv = np.asarray(kernel.eval(xi, eta), dtype=float)
        hx = hermite_design(Q, xi)
        hy = hermite_design(Q, eta)
        # term_{kls} = H_k(xi_s) H_l(eta_s) h_s, accumulated without
        # materializing the (Q+1, Q+1, batch) cube
        sums += hx @ (hy * hv).T
        sq_sums += (hx ** 2) @ ((hy ** 2) * (hv ** 2)).T
        total += size
    mean = sums / total
    var = np.maximum(sq_sums / total - mean ** 2, 0.0)
    stderr = np.sqrt(var / total)
    entries = np.full((Q + 1, Q + 1), np.nan)
    err = np.full((Q + 1, Q + 1), np.nan)
    for k in range(Q + 1):
        entries[k, :Q + 1 - k] = mean[k, :Q + 1 - k]
        err[k, :Q + 1 - k] = stderr[k, :Q + 1 - k]
    if tol is None:
        tol = 1e-8
    table = _finish_table(entries, Q, MONTE_CARLO, tol)
    return table, err


def wilcoxon_coeff_closed_form(k: int, l: int) -> float:
    """Closed-form Hermite coefficients of the kernel 1{x <= y}.

    a_{kl} = (-1)^((l+3k-1)/2) Gamma((l+k)/2) / (2 pi) for k+l odd,
    0 for k+l even and positive, and 1/2 for k = l = 0.
    """
    if k < 0 or l < 0:
        raise ParameterError("degrees must be >= 0")
    s = k + l
    if s == 0:
        return 0.5
    if s % 2 == 0:
        return 0.0
    sign = -1.0 if ((l + 3 * k - 1) // 2) % 2 else 1.0
    return sign * math.gamma(s / 2.0) / (2.0 * math.pi)


def closed_form_table(provider, Q: int, tol: float = 1e-12,
                      a00: float | None = None) -> HermiteCoeffTable:
    """Build a coefficient table from a closed-form provider (k, l) -> a."""
    entries = np.full((Q + 1, Q + 1), np.nan)
    for k in range(Q + 1):
        for l in range(Q + 1 - k):
            entries[k, l] = provider(k, l)
    if a00 is not None:
        entries[0, 0] = a00
    return _finish_table(entries, Q, CLOSED_FORM, tol)


def rank_2d(table: HermiteCoeffTable, tol: float | None = None) -> int:
    """Smallest k+l >= 1 with |a_{kl}| > tol; a_{00} is excluded."""
    if table.Q < 1:
        raise ParameterError("table must be populated to degree Q >= 1")
    if tol is None:
        tol = table.tol
    for q in range(1, table.Q + 1):
        for k in range(q + 1):
            if abs(table.entries[k, q - k]) > tol:
                return q
    raise RankNotFoundError(table.Q)


# ---------------------------------------------------------------------------
# class coefficients J_k(x) for the empirical-process route

@dataclass
class ClassCoeffs:
    """J_k on an x-grid for k = 1..k_max, plus the class Hermite rank."""

    grid: np.ndarray
    values: np.ndarray  # shape (k_max, len(grid)); row k-1 holds J_k
    rank: int
    tol: float

    def J(self, k: int) -> np.ndarray:
        return self.values[k - 1]

    @property
    def J_rank(self) -> np.ndarray:
        """J(x) = J_m(x) at the class rank m."""
        return self.values[self.rank - 1]


def class_coeffs(g: Subordinator, k_max: int, grid,
                 tol: float = 1e-8) -> ClassCoeffs:
    """Hermite coefficients J_k(x) = E[1{G(xi) <= x} H_k(xi)].

    Requires monotone G: the indicator restricts the integral to
    s <= G^{-1}(x), which is evaluated by adaptive quadrature.
    """
    if k_max < 1:
        raise ParameterError("k_max must be >= 1")
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2 or np.any(np.diff(grid) < 0):
        raise ParameterError("grid must be sorted")
    if not g.monotone:
        raise ParameterError(
            "class coefficients require a monotone subordinator"
        )
    cutoffs = np.asarray(g.inverse(grid), dtype=float)
    values = np.empty((k_max, grid.size))
    phi = lambda s: np.exp(-0.5 * s * s) / math.sqrt(2.0 * math.pi)
    for k in range(1, k_max + 1):
        integrand = lambda s, k=k: hermite_eval(k, s) * phi(s)
        for j, t in enumerate(cutoffs):
            val, _ = quad(integrand, -np.inf, t, limit=200)
            values[k - 1, j] = val
    max_abs = np.max(np.abs(values), axis=1)
    above = np.nonzero(max_abs > tol)[0]
    if above.size == 0:
        raise RankNotFoundError(k_max)
    return ClassCoeffs(grid=grid, values=values, rank=int(above[0]) + 1,
                       tol=tol)


# ---------------------------------------------------------------------------
# summability diagnostics

CONVERGENT_LIKELY = "ConvergentLikely"
DIVERGENT_LIKELY = "DivergentLikely"
INCONCLUSIVE = "Inconclusive"


@dataclass
class SummabilityReport:
    """Partial sums S(Q) of |a_{kl}| / sqrt(k! l!) and a heuristic verdict.

    The verdict is advisory only: the theory applies the summability
    condition as a sufficient hypothesis, and it is known to fail for
    kernels (Wilcoxon) whose limit is nevertheless correct.
    """

    Q_list: list
    partial_sums: list
    classification: str


def summability_diagnostic(provider, Q_list) -> SummabilityReport:
    """Partial sums S(Q) = sum_{1 <= k+l <= Q} |a_{kl}| / sqrt(k! l!).

    ``provider`` maps (k, l) to a_{kl}.  Classification compares successive
    increments: fast decay suggests convergence, steady growth (the
    harmonic/diagonal-1/k profile) suggests divergence.
    """
    q_list = sorted(int(q) for q in Q_list)
    if not q_list or q_list[0] < 1:
        raise ParameterError("Q_list must contain integers >= 1")
    q_max = q_list[-1]
    weights = np.exp(-0.5 * (_log_factorial(np.arange(q_max + 1))[:, None]
                             + _log_factorial(np.arange(q_max + 1))[None, :]))
    total = 0.0
    sums_by_q = {}
    for q in range(1, q_max + 1):
        for k in range(q + 1):
            total += abs(provider(k, q - k)) * weights[k, q - k]
        sums_by_q[q] = total
    partial = [sums_by_q[q] for q in q_list]
    classification = _classify_increments(partial)
    return SummabilityReport(Q_list=q_list, partial_sums=partial,
                             classification=classification)


def _classify_increments(partial, abs_tol: float = 1e-9) -> str:
    if len(partial) < 2:
        return INCONCLUSIVE
    incs = np.diff(partial)
    last = incs[-1]
    if last < abs_tol:
        return CONVERGENT_LIKELY
    if len(incs) < 2 or incs[-2] < abs_tol:
        return INCONCLUSIVE
    ratio = last / incs[-2]
    if ratio <= 0.5:
        return CONVERGENT_LIKELY
    if ratio >= 0.8:
        return DIVERGENT_LIKELY
    return INCONCLUSIVE


# ---------------------------------------------------------------------------
# scaling constants

@dataclass(frozen=True)
class ScalingConstants:
    """All normalization constants for a given (D, m, n) and L(n)."""

    D: float
    m: int
    n: int
    c_m: float
    d_n: float
    d_n_prime: float
    H: float
    K_const: float


def c_constant(D: float, k: int) -> float:
    """c_k = 2 k! / ((1 - Dk)(2 - Dk)); c_0 := 1 by convention."""
    if k == 0:
        return 1.0
    if D * k >= 1.0:
        raise RegimeError(f"reduction regime violated: D*k = {D * k} >= 1")
    return 2.0 * math.factorial(k) / ((1.0 - D * k) * (2.0 - D * k))


def scaling(D: float, m: int, n: int, L_at_n: float) -> ScalingConstants:
    """Scaling constants: c_m, d'_n = (n^(2-mD) L^m)^(1/2), d_n = sqrt(c_m) d'_n,
    H = 1 - Dm/2 and K = 2 Gamma(D) cos(D pi / 2)."""
    if not 0.0 < D < 1.0:
        raise ParameterError("D must lie in (0, 1)")
    if m < 1:
        raise ParameterError("m must be >= 1")
    if D * m >= 1.0:
        raise RegimeError(f"reduction regime violated: D*m = {D * m} >= 1")
    if n < 1:
        raise ParameterError("n must be >= 1")
    if L_at_n <= 0.0:
        raise ParameterError("L(n) must be positive")
    c_m = c_constant(D, m)
    d_n_prime = math.sqrt(n ** (2.0 - m * D) * L_at_n ** m)
    d_n = math.sqrt(c_m) * d_n_prime
    h = 1.0 - D * m / 2.0
    k_const = 2.0 * math.gamma(D) * math.cos(D * math.pi / 2.0)
    return ScalingConstants(D=D, m=m, n=n, c_m=c_m, d_n=d_n,
                            d_n_prime=d_n_prime, H=h, K_const=k_const)


def hermite_sum_std(params, m: int, n: int) -> float:
    """Exact standard deviation of sum_{i<=n} H_m(xi_i) via Mehler's identity:
    Var = m! * sum_{i,j} gamma(|i-j|)^m."""
    from .lrd_sim import build_covariance

    gamma = build_covariance(params, n - 1)
    lags = np.arange(1, n, dtype=float)
    var = math.factorial(m) * (n + 2.0 * np.dot(n - lags, gamma[1:] ** m))
    return math.sqrt(var)
