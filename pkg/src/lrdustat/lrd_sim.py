"""Simulation of long-range dependent Gaussian sequences and subordination.

The covariance models follow gamma(k) = L(k) k^(-D) with 0 < D < 1 and a
slowly varying L.  Two concrete families are offered:

* ``fgn``: fractional Gaussian noise with Hurst index H = 1 - D/2, for which
  L(k) -> H(2H-1) and the circulant embedding is provably nonnegative
  definite.
* ``tweaked``: gamma(k) = (1+k)^(-D), for which L(k) = (k/(1+k))^D -> 1.

A pure power law k^(-D) is deliberately not offered: it would force
gamma(1) = gamma(0) = 1, which is not a valid nondegenerate covariance.
Sampling is exact-in-distribution via circulant embedding (Davies-Harte).
"""

from __future__ import annotations

import csv
import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.stats import norm

from .errors import NonEmbeddableError, ParameterError

FGN = "fgn"
TWEAKED_POWER_LAW = "tweaked"

#: relative eigenvalue tolerance for the circulant embedding: eigenvalues in
#: (-EMBED_TOL * max_eig, 0) are clipped to zero with a warning, anything
#: below is a hard error.
EMBED_TOL = 1e-10

PATH_MAGIC = b"LRDUSTAT-PATH\x00\x00\x00"

_MASK64 = (1 << 64) - 1


def replication_rng(seed: int, rep: int = 0) -> np.random.Generator:
    """Counter-based generator for Monte Carlo replication ``rep``.

    Uses the Philox bit generator keyed by (seed, rep), so replications are
    independent streams and any (seed, rep) pair is reproducible without
    generating the preceding replications.
    """
    key = ((int(seed) & _MASK64) << 64) | (int(rep) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class LrdParams:
    """LRD model description: exponent D and covariance family."""

    D: float
    family: str = FGN

    def __post_init__(self):
        if not 0.0 < self.D < 1.0:
            raise ParameterError(f"D must lie in (0, 1), got {self.D}")
        if self.family not in (FGN, TWEAKED_POWER_LAW):
            raise ParameterError(f"unknown covariance family {self.family!r}")

    @property
    def hurst(self) -> float:
        """Hurst index H = 1 - D/2 of the associated fBm, in (1/2, 1)."""
        return 1.0 - self.D / 2.0

    def to_dict(self) -> dict:
        return {"family": self.family, "D": self.D}

    @classmethod
    def from_dict(cls, d: dict) -> "LrdParams":
        return cls(D=float(d["D"]), family=str(d["family"]))


def build_covariance(params: LrdParams, max_lag: int) -> np.ndarray:
    """Exact autocovariance gamma(0..max_lag) of the model.

    gamma(0) = 1 for both families.  For ``fgn``,
    gamma(k) = ((k+1)^(2H) - 2 k^(2H) + (k-1)^(2H)) / 2; for ``tweaked``,
    gamma(k) = (1+k)^(-D).
    """
    if max_lag < 0:
        raise ParameterError("max_lag must be >= 0")
    k = np.arange(max_lag + 1, dtype=float)
    if params.family == FGN:
        two_h = 2.0 * params.hurst
        gamma = 0.5 * ((k + 1.0) ** two_h - 2.0 * k ** two_h
                       + np.abs(k - 1.0) ** two_h)
    else:
        gamma = (1.0 + k) ** (-params.D)
    gamma[0] = 1.0
    return gamma


def asymptotic_L(params: LrdParams, n: int) -> float:
    """Slowly varying factor L(n) with gamma(k) ~ L(k) k^(-D).

    For ``fgn`` this is the constant H(2H-1); for ``tweaked`` it is
    (n/(1+n))^D.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if params.family == FGN:
        h = params.hurst
        return h * (2.0 * h - 1.0)
    return (n / (1.0 + n)) ** params.D


class CirculantEmbedding:
    """Precomputed circulant embedding of a stationary covariance sequence.

    Building the embedding costs one FFT; each draw then costs one FFT of
    size 2(n-1).  Reuse one instance across Monte Carlo replications.
    """

    def __init__(self, params: LrdParams, n: int):
        if n < 2:
            raise ParameterError("n must be >= 2")
        self.params = params
        self.n = n
        gamma = build_covariance(params, n - 1)
        # first row of the circulant matrix, size M = 2(n-1)
        row = np.concatenate([gamma, gamma[-2:0:-1]])
        eig = np.fft.fft(row).real
        max_eig = eig.max()
        min_eig = eig.min()
        if min_eig < -EMBED_TOL * max_eig:
            raise NonEmbeddableError(
                f"covariance embedding for family={params.family!r}, "
                f"D={params.D}, n={n} has eigenvalue {min_eig:.3e} below "
                f"-{EMBED_TOL:g} * max eigenvalue"
            )
        if min_eig < 0.0:
            warnings.warn(
                f"clipped {np.count_nonzero(eig < 0)} small negative "
                f"embedding eigenvalues (min {min_eig:.3e}) to zero",
                RuntimeWarning,
            )
            eig = np.maximum(eig, 0.0)
        self._m = row.size
        self._sqrt_eig = np.sqrt(eig / self._m)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """One exact stationary Gaussian draw of length n."""
        n, m = self.n, self._m
        z = np.empty(m, dtype=complex)
        z[0] = rng.standard_normal()
        z[n - 1] = rng.standard_normal()
        if n > 2:
            v = rng.standard_normal((n - 2, 2))
            half = (v[:, 0] + 1j * v[:, 1]) / np.sqrt(2.0)
            z[1:n - 1] = half
            z[n:] = np.conj(half[::-1])
        out = np.fft.fft(self._sqrt_eig * z)
        return np.ascontiguousarray(out.real[:n])


@dataclass(frozen=True)
class GaussianPath:
    """A simulated stationary Gaussian sample with its provenance."""

    values: np.ndarray
    params: LrdParams
    seed: int

    def __len__(self):
        return self.values.size


def simulate_gaussian(params: LrdParams, n: int, seed: int,
                      rep: int = 0) -> GaussianPath:
    """Exact stationary Gaussian sample via circulant embedding.

    Deterministic given (params, n, seed, rep): identical calls give
    bit-identical paths.
    """
    emb = CirculantEmbedding(params, n)
    values = emb.sample(replication_rng(seed, rep))
    values.setflags(write=False)
    return GaussianPath(values=values, params=params, seed=seed)


# ---------------------------------------------------------------------------
# subordination

_GH_NODES = 200


def _gauss_hermite_prob(order: int = _GH_NODES):
    """Nodes/weights for E[f(xi)], xi ~ N(0,1) (probabilists' weight)."""
    x, w = hermgauss(order)
    return x * np.sqrt(2.0), w / np.sqrt(np.pi)


class Subordinator:
    """A monotone transform G with E[G(xi)] = 0 under the standard normal.

    Centering is applied at construction by subtracting the 200-node
    Gauss-Hermite estimate of the mean.
    """

    def __init__(self, fn, inverse=None, *, kind: str, center: bool = True,
                 monotone: bool = True):
        self.kind = kind
        self.monotone = monotone
        self._fn = fn
        self._inverse = inverse
        if center and kind != "identity":
            x, w = _gauss_hermite_prob()
            self.offset = float(np.dot(w, np.asarray(fn(x), dtype=float)))
        else:
            self.offset = 0.0

    @classmethod
    def identity(cls) -> "Subordinator":
        return cls(lambda x: np.asarray(x, dtype=float), lambda y: y,
                   kind="identity", center=False)

    @classmethod
    def from_distribution(cls, dist, center: bool = True) -> "Subordinator":
        """Quantile transform G(x) = F_target^{-1}(Phi(x)) for a frozen
        scipy.stats distribution.  Upper-tail arguments go through the
        survival function to avoid Phi(x) rounding to 1."""

        def fn(x):
            x = np.asarray(x, dtype=float)
            return np.where(x > 0, dist.isf(norm.sf(x)), dist.ppf(norm.cdf(x)))

        def inv(y):
            y = np.asarray(y, dtype=float)
            med = dist.median()
            return np.where(y > med, norm.isf(dist.sf(y)), norm.ppf(dist.cdf(y)))

        return cls(fn, inv, kind="quantile", center=center)

    @classmethod
    def tabulated(cls, xs, ys, center: bool = True) -> "Subordinator":
        """Monotone lookup table; evaluation outside [xs[0], xs[-1]] raises.

        The centering integral clamps to the table endpoints; with a table
        covering a few normal standard deviations the clipped tail mass is
        negligible.
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise ParameterError("tabulated x-grid must be strictly increasing")
        monotone = bool(np.all(np.diff(ys) >= 0))

        def fn(x, _check=True):
            x = np.asarray(x, dtype=float)
            if _check and x.size and (x.min() < xs[0] or x.max() > xs[-1]):
                raise ParameterError(
                    "tabulated subordinator evaluated outside its table range"
                )
            return np.interp(x, xs, ys)

        def inv(y):
            return np.interp(y, ys, xs)

        sub = cls.__new__(cls)
        sub.kind = "tabulated"
        sub.monotone = monotone
        sub._fn = fn
        sub._inverse = inv if monotone else None
        if center:
            x, w = _gauss_hermite_prob()
            sub.offset = float(np.dot(w, fn(np.clip(x, xs[0], xs[-1]))))
        else:
            sub.offset = 0.0
        return sub

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self._fn(x), dtype=float) - self.offset

    def inverse(self, y):
        """Preimage of centered values: G^{-1}(y) with G already centered."""
        if self._inverse is None:
            raise ParameterError(
                f"{self.kind} subordinator has no usable inverse"
            )
        return self._inverse(np.asarray(y, dtype=float) + self.offset)


def subordinate(path: GaussianPath, g: Subordinator) -> np.ndarray:
    """Elementwise X_i = G(xi_i).  Identity returns the values unchanged."""
    if g.kind == "identity":
        return np.asarray(path.values, dtype=float)
    return g(path.values)


# ---------------------------------------------------------------------------
# serialization

def write_path_csv(values: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value"])
        for v in np.asarray(values, dtype=float):
            writer.writerow([repr(float(v))])


def read_path_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["value"]:
            raise ParameterError(f"unexpected CSV header {header!r}")
        return np.array([float(row[0]) for row in reader], dtype=float)


def write_path_binary(values: np.ndarray, path) -> None:
    """Little-endian float64 column with a 16-byte magic header."""
    values = np.asarray(values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(PATH_MAGIC)
        fh.write(struct.pack("<q", values.size))
        fh.write(values.tobytes())


def read_path_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(16)
        if magic != PATH_MAGIC:
            raise ParameterError("not a lrdustat binary path file")
        (count,) = struct.unpack("<q", fh.read(8))
        data = np.frombuffer(fh.read(8 * count), dtype="<f8")
        if data.size != count:
            raise ParameterError("truncated binary path file")
        return data.astype(float)


def write_config_json(params: LrdParams, n: int, seed: int, path) -> None:
    with open(path, "w") as fh:
        json.dump({**params.to_dict(), "n": n, "seed": seed}, fh, indent=2)
