"""Monte Carlo harnesses checking the asymptotic theory at desk scale.

Three experiments: partial-sum variance asymptotics of Hermite polynomials
(exact quadratic form vs the LRD/SRD asymptote), the reduction principle
(distance between the U-statistic process and its rank-diagonal
projection), and weak convergence of normalized sup-statistics to the
simulated limit distribution.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import ks_2samp

from .errors import ParameterError, RegimeError
from .hermite import (HermiteCoeffTable, c_constant, closed_form_table,
                      coeffs_2d, hermite_design, hermite_eval,
                      hermite_sum_std, scaling)
from .limit_law import LimitEnsemble
from .lrd_sim import CirculantEmbedding, LrdParams, asymptotic_L, \
    build_covariance, replication_rng
from .ustat import Kernel, ustat_fast


@dataclass
class ExperimentReport:
    """Summary of one verification experiment; reproducible from its seeds."""

    name: str
    params: dict
    per_n: dict
    passed: bool | None
    seed: int
    wall_clock: float

    def to_json_dict(self) -> dict:
        return {"name": self.name, "params": self.params,
                "per_n": self.per_n, "passed": self.passed,
                "seed": self.seed, "wall_clock": self.wall_clock}

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    def summary_text(self) -> str:
        lines = [f"experiment: {self.name}",
                 f"params: {self.params}",
                 f"seed: {self.seed}"]
        for n, row in sorted(self.per_n.items()):
            lines.append(f"  n={n}: " + ", ".join(
                f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                for k, v in row.items()))
        lines.append(f"passed: {self.passed}")
        lines.append(f"wall clock: {self.wall_clock:.2f}s")
        return "\n".join(lines)


def exact_hermite_sum_variance(k: int, params: LrdParams, n: int) -> float:
    """Var(sum_{i<=n} H_k(xi_i)) = k! sum_{i,j} gamma(|i-j|)^k, exactly."""
    return hermite_sum_std(params, k, n) ** 2


def _srd_series_constant(k: int, params: LrdParams, tail: int = 10 ** 6) -> float:
    """sum over all integer lags of gamma(d)^k (converges when Dk > 1)."""
    gamma = build_covariance(params, tail)
    return 1.0 + 2.0 * float(np.sum(gamma[1:] ** k))


def check_variance(k: int, params: LrdParams, n_list, reps: int = 0,
                   seed: int = 0) -> ExperimentReport:
    """Exact (and optionally Monte Carlo) partial-sum variance vs asymptote.

    In the LRD branch (Dk < 1) the asymptote is c_k n^(2-Dk) L(n)^k; in the
    SRD branch (Dk > 1) the variance grows linearly and the report tracks
    Var/n.  reps = 0 runs the exact quadratic form only; a Monte Carlo
    cross-check needs reps >= 100.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if reps != 0 and reps < 100:
        raise ParameterError("Monte Carlo cross-check needs reps >= 100 "
                             "(use reps=0 for exact-only)")
    start = time.perf_counter()
    lrd = params.D * k < 1.0
    per_n = {}
    for n in n_list:
        n = int(n)
        exact = exact_hermite_sum_variance(k, params, n)
        row = {"exact_var": exact}
        if lrd:
            asym = (c_constant(params.D, k)
                    * n ** (2.0 - params.D * k)
                    * asymptotic_L(params, n) ** k)
            row["asymptote"] = asym
            row["ratio"] = exact / asym
        else:
            c_series = _srd_series_constant(k, params)
            row["var_over_n"] = exact / n
            row["asymptote_slope"] = math.factorial(k) * c_series
        if reps:
            emb = CirculantEmbedding(params, n)
            sums = np.empty(reps)
            for r in range(reps):
                xi = emb.sample(replication_rng(seed, r))
                sums[r] = np.sum(hermite_eval(k, xi))
            mc = float(np.var(sums, ddof=1))
            row["mc_var"] = mc
            # variance of the sample variance for approximately normal sums
            row["mc_stderr"] = mc * math.sqrt(2.0 / (reps - 1))
        per_n[n] = row
    return ExperimentReport(
        name="variance_asymptotics",
        params={"k": k, "D": params.D, "family": params.family,
                "branch": "lrd" if lrd else "srd", "reps": reps},
        per_n=per_n, passed=None, seed=seed,
        wall_clock=time.perf_counter() - start)


def _kernel_table(kernel: Kernel, Q: int = 8) -> HermiteCoeffTable:
    if kernel.coeff_provider is not None:
        return closed_form_table(kernel.coeff_provider, Q)
    return coeffs_2d(kernel, Q)


def rank_projection_path(data_xi: np.ndarray, table: HermiteCoeffTable) -> np.ndarray:
    """Degree-m projection process at every split, via prefix sums:

        P(b) = sum_{k+l=m} a_{kl}/(k! l!) (sum_{i<=b} H_k)(sum_{j>b} H_l)

    O(n) per diagonal entry over all splits jointly.
    """
    m = table.rank
    if m is None:
        raise ParameterError("kernel rank not detectable from its table")
    design = hermite_design(m, data_xi)
    prefix = np.cumsum(design, axis=1)
    totals = prefix[:, -1]
    out = np.zeros(data_xi.size - 1)
    for (k, l), a in table.diagonal(m).items():
        left = prefix[k][:-1]
        right = totals[l] - prefix[l][:-1]
        out += a / (math.factorial(k) * math.factorial(l)) * left * right
    return out


def check_reduction(kernel: Kernel, params: LrdParams, n_list,
                    reps: int, seed: int = 0,
                    table: HermiteCoeffTable | None = None) -> ExperimentReport:
    """E[sup_lambda |U_n - rank-m projection| / (d'_n n)] across n.

    The theory predicts this discrepancy vanishes; the report tracks its
    decay over n_list.
    """
    if reps < 1:
        raise ParameterError("reps must be >= 1")
    start = time.perf_counter()
    if table is None:
        table = _kernel_table(kernel)
    m = table.rank
    if m is None:
        raise ParameterError("kernel rank not detectable from its table")
    if m * params.D >= 1.0:
        raise RegimeError(f"reduction regime violated: m*D = {m * params.D}")
    per_n = {}
    for n in n_list:
        n = int(n)
        emb = CirculantEmbedding(params, n)
        sc = scaling(params.D, m, n, asymptotic_L(params, n))
        sups = np.empty(reps)
        for r in range(reps):
            xi = emb.sample(replication_rng(seed, r))
            u = ustat_fast(xi, kernel).raw
            proj = rank_projection_path(xi, table)
            sups[r] = np.max(np.abs(u - proj)) / (sc.d_n_prime * n)
        per_n[n] = {"mean_sup_discrepancy": float(np.mean(sups)),
                    "stderr": float(np.std(sups, ddof=1) / math.sqrt(reps))}
    return ExperimentReport(
        name="reduction_principle",
        params={"kernel": kernel.name, "D": params.D, "family": params.family,
                "m": m, "reps": reps},
        per_n=per_n, passed=None, seed=seed,
        wall_clock=time.perf_counter() - start)


def normalized_sup_statistics(kernel: Kernel, params: LrdParams, n: int,
                              reps: int, seed: int,
                              m: int = 1, center: float | None = None) -> np.ndarray:
    """Sup-statistics of the rank-diagonal-normalized U-statistic process
    for ``reps`` independent simulated datasets."""
    if center is None:
        center = (closed_form_table(kernel.coeff_provider, 2).a00
                  if kernel.coeff_provider is not None else 0.0)
    emb = CirculantEmbedding(params, n)
    sc = scaling(params.D, m, n, asymptotic_L(params, n))
    k_idx = np.arange(1, n, dtype=float)
    offset = k_idx * (n - k_idx) * center
    sups = np.empty(reps)
    for r in range(reps):
        xi = emb.sample(replication_rng(seed, r))
        u = ustat_fast(xi, kernel).raw
        sups[r] = np.max(np.abs(u - offset)) / (sc.d_n_prime * n)
    return sups


def check_weak_convergence(kernel: Kernel, params: LrdParams, n: int,
                           reps: int, limit: LimitEnsemble,
                           seed: int = 0, m: int = 1,
                           center: float | None = None) -> ExperimentReport:
    """Two-sample KS distance between simulated normalized sup-statistics
    and the limit ensemble's sup-statistic distribution."""
    if reps < 1:
        raise ParameterError("reps must be >= 1")
    start = time.perf_counter()
    sups = normalized_sup_statistics(kernel, params, n, reps, seed,
                                     m=m, center=center)
    limit_sups = limit.sup_abs()
    ks = float(ks_2samp(sups, limit_sups).statistic)
    per_n = {n: {"ks_distance": ks,
                 "data_reps": reps,
                 "limit_reps": int(limit_sups.size),
                 "mean_sup_data": float(np.mean(sups)),
                 "mean_sup_limit": float(np.mean(limit_sups))}}
    return ExperimentReport(
        name="weak_convergence",
        params={"kernel": kernel.name, "D": params.D, "family": params.family,
                "n": n, "reps": reps,
                "limit_descriptor": limit.descriptor},
        per_n=per_n, passed=None, seed=seed,
        wall_clock=time.perf_counter() - start)
