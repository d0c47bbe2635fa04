"""Block-fading channel models and the distribution of per-round mutual information.

A channel is a pair (SNR distribution, MI function).  The per-round mutual
information ``I = mi(SNR)`` is i.i.d. across HARQ rounds, and everything
downstream only needs its distribution, which is represented by
:class:`MiDistribution`:

* discrete channels (two-state MI, constant SNR) keep exact atoms, and a
  point exactly at a decoding threshold counts as a success;
* continuous channels are discretised on the lattice ``j * grid_step``.  The
  mass of ``I`` in ``[(j - 1/2) * step, (j + 1/2) * step)`` sits on point ``j``
  and is treated as spread uniformly over that cell when compared with a
  threshold, so a point lying exactly on a threshold is split half/half.  The
  mass of the first half-cell is folded into point 1 so that no mass sits at
  zero.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.special import logsumexp

from .exceptions import ConfigurationError
from .validation import check_positive, check_probability

LN2 = math.log(2.0)
DEFAULT_GRID_STEP = 0.005
TAIL_PROB = 1e-6
# slack used when comparing accumulated MI with accumulated rate on exact atoms
TIE_EPS = 1e-12
QAM_ORDERS = (4, 16, 64, 256)

__all__ = [
    "Rayleigh", "TwoStateMi", "Constant", "GaussianCodebook", "Qam",
    "MiDistribution", "ChannelModel", "mi_gaussian", "mi_qam", "qam_constellation",
    "mi_distribution", "cdf_sum", "ergodic_capacity", "sample_mi",
    "db_to_linear", "linear_to_db",
]


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(lin):
    return 10.0 * np.log10(np.asarray(lin, dtype=float))


# ---------------------------------------------------------------------------
# SNR distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rayleigh:
    """Rayleigh block fading: the SNR is exponential with mean ``avg_snr`` (linear)."""

    avg_snr: float

    def __post_init__(self):
        object.__setattr__(self, "avg_snr", check_positive(self.avg_snr, "avg_snr"))

    @classmethod
    def from_db(cls, avg_snr_db):
        return cls(float(db_to_linear(avg_snr_db)))

    def cdf(self, snr):
        snr = np.asarray(snr, dtype=float)
        return np.where(snr > 0, -np.expm1(-np.maximum(snr, 0) / self.avg_snr), 0.0)

    def quantile(self, q):
        return -self.avg_snr * np.log1p(-np.asarray(q, dtype=float))

    def sample(self, rng, size=None):
        # inverse CDF; 1 - U lies in (0, 1] so the log is finite
        u = 1.0 - rng.random(size)
        return -self.avg_snr * np.log(u)


@dataclass(frozen=True)
class Constant:
    """Deterministic (non-fading) SNR."""

    snr: float

    def __post_init__(self):
        object.__setattr__(self, "snr", check_positive(self.snr, "snr", allow_zero=True))

    def cdf(self, snr):
        return np.where(np.asarray(snr, dtype=float) > self.snr, 1.0, 0.0)

    def quantile(self, q):
        return np.full(np.shape(q), self.snr)

    def sample(self, rng, size=None):
        return np.full(size if size is not None else (), self.snr, dtype=float)


@dataclass(frozen=True)
class TwoStateMi:
    """MI takes value ``i_a`` with probability ``1 - p`` and ``i_b`` with probability ``p``.

    This kind specifies the MI directly and bypasses the SNR-to-MI map.
    """

    i_a: float
    i_b: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "i_a", check_positive(self.i_a, "i_a", allow_zero=True))
        object.__setattr__(self, "i_b", check_positive(self.i_b, "i_b", allow_zero=True))
        object.__setattr__(self, "p", check_probability(self.p, "p"))

    def atoms(self):
        if self.i_a == self.i_b:
            return ((self.i_a, 1.0),)
        return ((self.i_a, 1.0 - self.p), (self.i_b, self.p))

    def sample(self, rng, size=None):
        return np.where(rng.random(size) < self.p, self.i_b, self.i_a)


# ---------------------------------------------------------------------------
# MI functions
# ---------------------------------------------------------------------------

def mi_gaussian(snr):
    """MI of a Gaussian codebook, ``log2(1 + snr)``, in bits per symbol."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0) or np.any(np.isnan(snr)):
        raise ValueError("snr must be >= 0")
    out = np.log1p(snr) / LN2
    return float(out) if out.ndim == 0 else out


def qam_constellation(m):
    """Square M-QAM constellation normalised to unit average energy."""
    if m not in QAM_ORDERS:
        raise ConfigurationError(f"unsupported QAM order {m}; expected one of {QAM_ORDERS}")
    side = int(round(math.sqrt(m)))
    levels = np.arange(-side + 1, side, 2, dtype=float)
    points = (levels[:, None] + 1j * levels[None, :]).ravel()
    return points / math.sqrt(2.0 * (m - 1) / 3.0)


@functools.lru_cache(maxsize=None)
def _gauss_hermite_2d(order):
    t, w = np.polynomial.hermite.hermgauss(order)
    # z = t_a + j t_b with weight e^{-t_a^2 - t_b^2}: exactly CN(0, 1) after 1/pi
    z = (t[:, None] + 1j * t[None, :]).ravel()
    wz = (w[:, None] * w[None, :]).ravel() / math.pi
    return z, wz


def _mi_qam_scalar(snr, m, order):
    if snr == 0.0:
        return 0.0
    x = qam_constellation(m)
    z, wz = _gauss_hermite_2d(order)
    d = math.sqrt(snr) * (x[:, None] - x[None, :])
    d2 = np.abs(d) ** 2
    zc = np.conj(z)
    total = 0.0
    chunk = max(1, 2 ** 22 // (m * z.size))
    for start in range(0, m, chunk):
        dd = d[start:start + chunk, :, None]
        expo = -(d2[start:start + chunk, :, None] + 2.0 * (dd * zc[None, None, :]).real)
        total += float((logsumexp(expo, axis=1) @ wz).sum())
    mi = math.log2(m) - total / (m * LN2)
    return min(max(mi, 0.0), math.log2(m))


def mi_qam(snr, m=16, order=32):
    """MI of uniformly used ``m``-QAM over complex AWGN, by 2-D Gauss-Hermite quadrature.

    Parameters
    ----------
    snr : float or array_like
        Linear SNR, ``>= 0``.
    m : int
        Constellation size, one of 4, 16, 64, 256.
    order : int
        Quadrature nodes per real dimension (``>= 8``).
    """
    if m not in QAM_ORDERS:
        raise ConfigurationError(f"unsupported QAM order {m}; expected one of {QAM_ORDERS}")
    if order < 8:
        raise ConfigurationError("quadrature order must be >= 8")
    snr_arr = np.asarray(snr, dtype=float)
    if np.any(snr_arr < 0) or np.any(np.isnan(snr_arr)):
        raise ValueError("snr must be >= 0")
    flat = [_mi_qam_scalar(float(s), m, order) for s in snr_arr.ravel()]
    out = np.asarray(flat).reshape(snr_arr.shape)
    return float(out) if out.ndim == 0 else out


@functools.lru_cache(maxsize=None)
def _qam_table(m, order):
    snr_db = np.linspace(-50.0, 60.0, 441)
    mi = mi_qam(db_to_linear(snr_db), m, order)
    mi = np.maximum.accumulate(mi)
    forward = PchipInterpolator(snr_db, mi)
    # the inverse needs a strictly increasing abscissa; drop the saturated tail
    keep = np.concatenate(([True], np.diff(mi) > 1e-12))
    keep &= mi < math.log2(m) - 1e-9
    inverse = PchipInterpolator(mi[keep], snr_db[keep])
    return snr_db, mi, forward, inverse, float(mi[keep][0]), float(mi[keep][-1])


@dataclass(frozen=True)
class GaussianCodebook:
    """``I = log2(1 + snr)``; strictly increasing and unbounded."""

    max_mi = math.inf

    def __call__(self, snr):
        return mi_gaussian(snr)

    fast = __call__

    def inverse(self, mi):
        mi = np.asarray(mi, dtype=float)
        return np.expm1(np.maximum(mi, 0.0) * LN2)


@dataclass(frozen=True)
class Qam:
    """Uniform square ``m``-QAM input; MI is bounded by ``log2 m``."""

    m: int = 16
    quadrature_order: int = 32

    def __post_init__(self):
        if self.m not in QAM_ORDERS:
            raise ConfigurationError(f"unsupported QAM order {self.m}; expected one of {QAM_ORDERS}")
        if int(self.quadrature_order) != self.quadrature_order or self.quadrature_order < 8:
            raise ConfigurationError("quadrature_order must be an integer >= 8")

    @property
    def max_mi(self):
        return math.log2(self.m)

    def __call__(self, snr):
        return mi_qam(snr, self.m, self.quadrature_order)

    def fast(self, snr):
        """Interpolated MI (monotone cubic in dB); used for bulk sampling."""
        snr_db_tab, _, forward, _, _, _ = _qam_table(self.m, self.quadrature_order)
        snr = np.asarray(snr, dtype=float)
        with np.errstate(divide="ignore"):
            db = 10.0 * np.log10(snr)
        out = np.empty_like(snr)
        low = db < snr_db_tab[0]
        high = db > snr_db_tab[-1]
        mid = ~(low | high)
        out[low] = snr[low] / LN2  # small-SNR slope of any unit-energy input
        out[high] = self.max_mi
        out[mid] = forward(db[mid])
        return np.clip(out, 0.0, self.max_mi)

    def inverse(self, mi):
        """SNR at which the MI reaches ``mi`` (``inf`` at or above saturation)."""
        _, _, _, inverse, mi_lo, mi_hi = _qam_table(self.m, self.quadrature_order)
        mi = np.asarray(mi, dtype=float)
        out = np.empty_like(mi)
        low = mi < mi_lo
        high = mi > mi_hi
        mid = ~(low | high)
        out[low] = np.maximum(mi[low], 0.0) * LN2
        out[high] = np.inf
        out[mid] = db_to_linear(inverse(mi[mid]))
        return out


# ---------------------------------------------------------------------------
# Discretised MI distribution
# ---------------------------------------------------------------------------

class MiDistribution:
    """Distribution of the per-round MI ``I``.

    Exactly one of ``mass`` (lattice masses on ``j * grid_step``, ``j = 0..n``)
    or ``atoms`` (``(value, prob)`` pairs) is given.  ``grid_step`` is also the
    lattice used by the MDP solver for atom distributions.
    """

    def __init__(self, grid_step=DEFAULT_GRID_STEP, mass=None, atoms=None):
        self.grid_step = check_positive(grid_step, "grid_step")
        if (mass is None) == (atoms is None):
            raise ConfigurationError("give exactly one of mass= or atoms=")
        if atoms is not None:
            atoms = sorted((float(v), float(p)) for v, p in atoms)
            values = np.array([v for v, _ in atoms])
            probs = np.array([p for _, p in atoms])
            if values.size == 0:
                raise ConfigurationError("atoms must be non-empty")
            if np.any(values < 0) or not np.all(np.isfinite(values)):
                raise ConfigurationError("MI atoms must be finite and >= 0")
            uniq, inv = np.unique(values, return_inverse=True)
            self._values = uniq
            self._probs = np.bincount(inv, weights=probs)
            self.tie = "success"
        else:
            mass = np.array(mass, dtype=float)
            if mass.ndim != 1 or mass.size == 0:
                raise ConfigurationError("mass must be a non-empty 1-D array")
            # FFT-free convolutions only produce rounding-level negatives
            mass[(mass < 0) & (mass > -1e-15)] = 0.0
            nz = np.nonzero(mass)[0]
            mass = mass[: nz[-1] + 1] if nz.size else mass[:1]
            self._probs = mass
            self._values = np.arange(mass.size) * self.grid_step
            self.tie = "split"
        if np.any(self._probs < 0):
            raise ConfigurationError("probabilities must be >= 0")
        total = float(self._probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"total probability is {total!r}, expected 1")
        self._cum = np.concatenate(([0.0], np.cumsum(self._probs)))

    # -- basic views -------------------------------------------------------
    @property
    def is_atomic(self):
        return self.tie == "success"

    @property
    def values(self):
        return self._values

    @property
    def probs(self):
        return self._probs

    @property
    def mass(self):
        """Lattice masses (empty for atom distributions)."""
        return np.empty(0) if self.is_atomic else self._probs

    @property
    def atoms(self):
        if not self.is_atomic:
            return ()
        return tuple(zip(self._values.tolist(), self._probs.tolist()))

    @property
    def support_max(self):
        if self.is_atomic:
            return float(self._values[-1])
        return (self._probs.size - 0.5) * self.grid_step

    def __repr__(self):
        if self.is_atomic:
            return f"MiDistribution(grid_step={self.grid_step}, atoms={self.atoms})"
        return (f"MiDistribution(grid_step={self.grid_step}, "
                f"points={self._probs.size}, support_max={self.support_max:.4f})")

    # -- threshold semantics -----------------------------------------------
    def fail_weight(self, values, threshold):
        """Fraction of a point at ``values`` that lies strictly below ``threshold``."""
        values = np.asarray(values, dtype=float)
        threshold = np.asarray(threshold, dtype=float)
        if self.is_atomic:
            return (values < threshold - TIE_EPS).astype(float)
        return np.clip((threshold - values) / self.grid_step + 0.5, 0.0, 1.0)

    def cdf(self, x):
        """``Pr{I < x}`` under the threshold convention of this distribution."""
        x = np.asarray(x, dtype=float)
        if self.is_atomic:
            idx = np.searchsorted(self._values, x - TIE_EPS, side="left")
            out = self._cum[idx]
        else:
            n = self._probs.size
            u = x / self.grid_step + 0.5
            fl = np.floor(u)
            frac = u - fl
            fl = np.clip(fl, -1, n).astype(np.int64)
            out = self._cum[np.clip(fl, 0, n)]
            inside = (fl >= 0) & (fl < n)
            out = out + np.where(inside, frac * self._probs[np.clip(fl, 0, n - 1)], 0.0)
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def ccdf(self, x):
        """``Pr{I >= x}``; always exactly ``1 - cdf(x)``."""
        return 1.0 - self.cdf(x)

    def mean(self):
        return float(self._values @ self._probs)

    def partial_mean(self, x):
        """``E[I * 1{I < x}]`` (the mean MI collected in a failed round at rate ``x``)."""
        return float((self._values * self.fail_weight(self._values, x)) @ self._probs)

    # -- sums of independent rounds ------------------------------------------
    def add_independent(self, values, probs, upto=None):
        """Sub-distribution of ``V + I`` for independent ``V ~ (values, probs)``.

        Points above ``upto`` are dropped (they can never fall back below a
        threshold since ``I >= 0``).
        """
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if self.is_atomic:
            sums = (values[:, None] + self._values[None, :]).ravel()
            weights = (probs[:, None] * self._probs[None, :]).ravel()
            if upto is not None:
                keep = sums <= upto + TIE_EPS
                sums, weights = sums[keep], weights[keep]
            keys = np.round(sums, 10)
            uniq, inv = np.unique(keys, return_inverse=True)
            return uniq, np.bincount(inv, weights=weights, minlength=uniq.size)
        step = self.grid_step
        idx = np.rint(values / step).astype(np.int64)
        dense = np.bincount(idx, weights=probs) if idx.size else np.zeros(1)
        base = self._probs
        if upto is not None:
            limit = int(math.floor(upto / step + 1e-9)) + 1
            dense = dense[:limit]
            base = base[:limit]
        out = np.convolve(dense, base)
        if upto is not None:
            out = out[:limit]
        return np.arange(out.size) * step, out

    def sum_distribution(self, k):
        """Distribution of the sum of ``k`` i.i.d. copies of ``I``."""
        if k < 1:
            raise ConfigurationError("k must be >= 1")
        values, probs = self._values, self._probs
        for _ in range(k - 1):
            values, probs = self.add_independent(values, probs)
        if self.is_atomic:
            return MiDistribution(self.grid_step, atoms=list(zip(values, probs)))
        return MiDistribution(self.grid_step, mass=probs)

    def lattice_masses(self, length=None):
        """Masses on the lattice ``j * grid_step`` (atoms are snapped to it).

        Raises if an atom is not within 1e-9 of a lattice point.
        """
        if self.is_atomic:
            idx_f = self._values / self.grid_step
            idx = np.rint(idx_f).astype(np.int64)
            if np.any(np.abs(idx_f - idx) > 1e-9 * np.maximum(1.0, idx_f)):
                raise ConfigurationError(
                    f"MI atoms {self._values.tolist()} are not multiples of grid_step={self.grid_step}")
            p = np.bincount(idx, weights=self._probs)
        else:
            p = self._probs.copy()
        if length is not None:
            p = np.pad(p, (0, max(0, length - p.size)))[:length]
        return p

    def sample(self, rng, size=None):
        return rng.choice(self._values, size=size, p=self._probs / self._probs.sum())


# ---------------------------------------------------------------------------
# Channel = SNR distribution + MI function
# ---------------------------------------------------------------------------

_SNR_KINDS = {"rayleigh": Rayleigh, "two_state_mi": TwoStateMi, "constant": Constant}


@dataclass(frozen=True)
class ChannelModel:
    """An i.i.d. block-fading channel described by its SNR law and MI map.

    Continuous channels expose exact ``cdf``/``ccdf``/``partial_mean`` through the
    SNR distribution; :meth:`discretize` produces the gridded
    :class:`MiDistribution` used by the analytic and MDP modules.
    """

    snr: object
    mi: object = GaussianCodebook()

    def __post_init__(self):
        if self.mi is None:
            object.__setattr__(self, "mi", GaussianCodebook())

    @property
    def is_discrete(self):
        return isinstance(self.snr, (TwoStateMi, Constant))

    def _atoms_dist(self, grid_step=DEFAULT_GRID_STEP):
        if isinstance(self.snr, TwoStateMi):
            return MiDistribution(grid_step, atoms=self.snr.atoms())
        value = float(self.mi(self.snr.snr))
        return MiDistribution(grid_step, atoms=[(value, 1.0)])

    def upper_mi(self, tail=TAIL_PROB):
        """MI at the ``1 - tail`` SNR quantile (capped by the MI bound)."""
        if self.is_discrete:
            return self._atoms_dist().support_max
        snr_q = float(self.snr.quantile(1.0 - tail))
        return float(min(self.mi.fast(np.array([snr_q]))[0], self.mi.max_mi))

    def cdf(self, x):
        """Exact ``Pr{I < x}``."""
        if self.is_discrete:
            return self._atoms_dist().cdf(x)
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, self.snr.cdf(self.mi.inverse(np.maximum(x, 0.0))), 0.0)
        out = np.where(x > self.mi.max_mi, 1.0, out)
        return float(out) if out.ndim == 0 else out

    def ccdf(self, x):
        return 1.0 - self.cdf(x)

    def mean(self):
        """Ergodic capacity ``E[I]`` by adaptive quadrature of the survival function."""
        if self.is_discrete:
            return self._atoms_dist().mean()
        hi = self.upper_mi(1e-15)
        # the interpolated QAM inverse is only C1, so ask for less
        tol = 1e-10 if isinstance(self.mi, GaussianCodebook) else 1e-8
        val, _ = integrate.quad(lambda t: float(self.ccdf(t)), 0.0, hi, limit=400,
                                epsabs=tol / 10, epsrel=tol)
        return val

    def partial_mean(self, x):
        """``E[I * 1{I < x}] = x F(x) - int_0^x F(t) dt``."""
        if self.is_discrete:
            return self._atoms_dist().partial_mean(x)
        if x <= 0:
            return 0.0
        tol = 1e-10 if isinstance(self.mi, GaussianCodebook) else 1e-8
        integral, _ = integrate.quad(lambda t: float(self.cdf(t)), 0.0, x, limit=400,
                                     epsabs=tol / 100, epsrel=tol)
        return float(x * self.cdf(x) - integral)

    def discretize(self, grid_step=DEFAULT_GRID_STEP, tail=TAIL_PROB):
        """Gridded :class:`MiDistribution` of the per-round MI."""
        grid_step = check_positive(grid_step, "grid_step")
        if self.is_discrete:
            return self._atoms_dist(grid_step)
        i_max = self.upper_mi(tail)
        n = max(2, int(math.ceil(i_max / grid_step - 1e-9)))
        edges = (np.arange(1, n) + 0.5) * grid_step
        cdf_edges = np.asarray(self.cdf(edges), dtype=float)
        cdf_edges = np.maximum.accumulate(np.clip(cdf_edges, 0.0, 1.0))
        mass = np.zeros(n + 1)
        mass[1] = cdf_edges[0]
        mass[2:n] = np.diff(cdf_edges)
        mass[n] = 1.0 - cdf_edges[-1]
        return MiDistribution(grid_step, mass=mass)

    def sample_snr(self, rng, size=None):
        if isinstance(self.snr, TwoStateMi):
            raise ConfigurationError("a two-state MI channel has no SNR to sample")
        return self.snr.sample(rng, size)

    def sample_mi(self, rng, size=None):
        """Exact MI draws (no grid quantisation)."""
        if isinstance(self.snr, TwoStateMi):
            return self.snr.sample(rng, size)
        snr = np.atleast_1d(self.snr.sample(rng, size))
        out = self.mi.fast(snr)
        return out if size is not None else float(out[0])

    # -- configuration ------------------------------------------------------
    @classmethod
    def from_config(cls, spec):
        """Build from ``{"snr": {...}, "mi": {...}}``; SNR values are given in dB."""
        if not isinstance(spec, dict):
            raise ConfigurationError("channel spec must be an object")
        _reject_unknown(spec, {"snr", "mi"}, "channel")
        snr_spec = spec.get("snr")
        if not isinstance(snr_spec, dict) or "kind" not in snr_spec:
            raise ConfigurationError("channel.snr must be an object with a 'kind'")
        kind = snr_spec["kind"]
        if kind == "rayleigh":
            _reject_unknown(snr_spec, {"kind", "avg_snr_db"}, "channel.snr")
            snr = Rayleigh.from_db(_require_number(snr_spec, "avg_snr_db", "channel.snr"))
        elif kind == "constant":
            _reject_unknown(snr_spec, {"kind", "snr_db"}, "channel.snr")
            snr = Constant(float(db_to_linear(_require_number(snr_spec, "snr_db", "channel.snr"))))
        elif kind == "two_state_mi":
            _reject_unknown(snr_spec, {"kind", "i_a", "i_b", "p"}, "channel.snr")
            snr = TwoStateMi(*(_require_number(snr_spec, f, "channel.snr") for f in ("i_a", "i_b", "p")))
        else:
            raise ConfigurationError(f"channel.snr.kind: unknown kind {kind!r}; "
                                     f"expected one of {sorted(_SNR_KINDS)}")
        mi_spec = spec.get("mi", {"kind": "gaussian"})
        if not isinstance(mi_spec, dict) or "kind" not in mi_spec:
            raise ConfigurationError("channel.mi must be an object with a 'kind'")
        if mi_spec["kind"] == "gaussian":
            _reject_unknown(mi_spec, {"kind"}, "channel.mi")
            mi = GaussianCodebook()
        elif mi_spec["kind"] == "qam":
            _reject_unknown(mi_spec, {"kind", "m", "quadrature_order"}, "channel.mi")
            mi = Qam(int(mi_spec.get("m", 16)), int(mi_spec.get("quadrature_order", 32)))
        else:
            raise ConfigurationError(f"channel.mi.kind: unknown kind {mi_spec['kind']!r}")
        return cls(snr, mi)


def _reject_unknown(obj, allowed, where):
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigurationError(f"{where}: unknown field(s) {unknown}")


def _require_number(obj, key, where):
    if key not in obj:
        raise ConfigurationError(f"{where}.{key} is required")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{where}.{key} must be a number")
    return float(value)


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------

def mi_distribution(snr_dist, mi_fn=GaussianCodebook(), grid_step=DEFAULT_GRID_STEP):
    """Discretise ``I = mi_fn(SNR)`` for ``SNR ~ snr_dist``."""
    return ChannelModel(snr_dist, mi_fn).discretize(grid_step)


def cdf_sum(dist, k, x):
    """``Pr{I_1 + ... + I_k < x}`` by repeated discrete convolution."""
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    x = float(x)
    upto = x + dist.grid_step
    values, probs = np.zeros(1), np.ones(1)
    for _ in range(k):
        values, probs = dist.add_independent(values, probs, upto=upto)
    return float(np.clip(probs @ dist.fail_weight(values, x), 0.0, 1.0))


def ergodic_capacity(dist):
    """``E[I]``; an upper bound on any throughput without transmitter CSI."""
    return dist.mean()


def sample_mi(source, rng, size=None):
    """Draw per-round MI from a :class:`ChannelModel` (exact) or a :class:`MiDistribution`."""
    if isinstance(source, tuple):
        source = ChannelModel(*source)
    if isinstance(source, ChannelModel):
        return source.sample_mi(rng, size)
    return source.sample(rng, size)
