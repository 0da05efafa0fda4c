"""Seeded random variate generation for the samplers.

All samplers take an explicit ``numpy.random.Generator``. Use
:func:`make_rng` (or :class:`SeededGenerator`) to build one from a
``(seed, stream)`` pair so that parallel chains get independent,
reproducible streams.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

GENERATOR_ALGORITHM = "PCG64"


@dataclass(frozen=True)
class SeededGenerator:
    """Reproducible generator identity: equal ``(seed, stream)`` means equal draws."""

    seed: int
    stream: int = 0
    algorithm: str = GENERATOR_ALGORITHM

    def rng(self):
        if self.algorithm != GENERATOR_ALGORITHM:
            raise ValueError(f"unsupported generator algorithm {self.algorithm!r}")
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))


def make_rng(seed, stream=0):
    return SeededGenerator(seed, stream).rng()


def _positive(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive, got {value!r}")
    return arr


def sample_dirichlet(concentrations, rng, size=None):
    """Dirichlet draw(s) via normalized gamma variates.

    ``concentrations`` may be a vector (one draw) or a 2-D array with one
    row of concentrations per draw.
    """
    a = _positive("concentrations", concentrations)
    if size is not None:
        a = np.broadcast_to(a, tuple(np.atleast_1d(size)) + a.shape[-1:])
    g = rng.standard_gamma(a)
    total = g.sum(axis=-1, keepdims=True)
    # All-zero rows only happen for tiny concentrations; redraw them.
    bad = ~(total[..., 0] > 0)
    while np.any(bad):
        g[bad] = rng.standard_gamma(a[bad] if a.ndim > 1 else a)
        total = g.sum(axis=-1, keepdims=True)
        bad = ~(total[..., 0] > 0)
    return g / total


def _std_normal_lower_tail(a, rng):
    """Draw ``Y ~ N(0, 1)`` conditioned on ``Y > a``, elementwise in ``a``.

    Plain rejection when ``a <= 0`` (acceptance >= 1/2), otherwise
    exponential rejection with the optimal rate (Robert, 1995), which
    stays efficient arbitrarily far into the tail.
    """
    a = np.asarray(a, dtype=float)
    out = np.empty(a.shape)
    flat_a = a.ravel()
    flat = out.ravel()
    todo = np.arange(flat_a.size)
    naive = flat_a[todo] <= 0.0
    idx = todo[naive]
    while idx.size:
        y = rng.standard_normal(idx.size)
        ok = y > flat_a[idx]
        flat[idx[ok]] = y[ok]
        idx = idx[~ok]
    idx = todo[~naive]
    while idx.size:
        lo = flat_a[idx]
        lam = 0.5 * (lo + np.sqrt(lo * lo + 4.0))
        y = lo + rng.standard_exponential(idx.size) / lam
        ok = rng.random(idx.size) <= np.exp(-0.5 * (y - lam) ** 2)
        flat[idx[ok]] = y[ok]
        idx = idx[~ok]
    return flat.reshape(a.shape)


def sample_truncated_normal(mean, variance, positive, rng):
    """Normal draws truncated to ``(0, inf)`` or ``(-inf, 0]``.

    Parameters
    ----------
    mean, variance : array_like
        Parameters of the untruncated normal.
    positive : array_like of bool
        True keeps the draw on ``(0, inf)``, False on ``(-inf, 0]``.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(_positive("variance", variance))
    positive = np.asarray(positive, dtype=bool)
    mean, sd, positive = np.broadcast_arrays(mean, sd, positive)
    # positive: Y > -mean/sd, X = mean + sd*Y; negative: Y >= mean/sd, X = mean - sd*Y
    bound = np.where(positive, -mean / sd, mean / sd)
    y = _std_normal_lower_tail(bound, rng)
    x = np.where(positive, mean + sd * y, mean - sd * y)
    # Rounding can land exactly on 0 when mean is huge relative to sd.
    x = np.where(positive & (x <= 0.0), np.nextafter(0.0, 1.0), x)
    x = np.where(~positive & (x > 0.0), 0.0, x)
    return x


def sample_truncated_normal_interval(mean, sd, lo, hi, rng):
    """One draw of ``N(mean, sd^2)`` restricted to ``(lo, hi)``.

    Plain rejection when the interval holds at least a quarter of the
    mass; otherwise inversion on whichever tail keeps precision.
    """
    if not lo < hi or not sd > 0:
        raise ValueError("need lo < hi and sd > 0")
    a, b = (lo - mean) / sd, (hi - mean) / sd
    if a > 0:  # interval in the upper tail: invert the survival function
        qa, qb = special.ndtr(-a), special.ndtr(-b)
        mass = qa - qb
    else:
        pa, pb = special.ndtr(a), special.ndtr(b)
        mass = pb - pa
    if mass >= 0.25:
        while True:
            y = rng.standard_normal()
            if a < y < b:
                return mean + sd * y
    v = rng.random()
    if a > 0:
        y = -special.ndtri(qa - v * mass)
    else:
        y = special.ndtri(pa + v * mass)
    return mean + sd * float(np.clip(y, a, b))


def sample_inverse_gamma(shape, scale, rng, size=None):
    """IG(shape, scale) with density proportional to x^(-shape-1) exp(-scale/x)."""
    shape = _positive("shape", shape)
    scale = _positive("scale", scale)
    return scale / rng.standard_gamma(shape, size=size)


def sample_categorical(weights, rng):
    """Index drawn with probability proportional to ``weights``.

    A 2-D input draws one index per row.
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("categorical weights must be finite and nonnegative")
    single = w.ndim == 1
    w = np.atleast_2d(w)
    cum = np.cumsum(w, axis=1)
    total = cum[:, -1]
    if np.any(total <= 0):
        raise ValueError("categorical weights must have a positive sum")
    r = rng.random(w.shape[0]) * total
    idx = (cum <= r[:, None]).sum(axis=1)
    # Guard against r landing on the float-rounded top edge.
    idx = np.minimum(idx, w.shape[1] - 1)
    while True:
        zero = w[np.arange(w.shape[0]), idx] == 0
        if not np.any(zero):
            break
        idx[zero] -= 1
    return int(idx[0]) if single else idx


def sample_beta(a, b, rng, size=None):
    a = _positive("a", a)
    b = _positive("b", b)
    x = rng.beta(a, b, size=size)
    # Keep the draw in the open interval.
    tiny = np.finfo(float).tiny
    return np.clip(x, tiny, 1.0 - np.finfo(float).epsneg)
