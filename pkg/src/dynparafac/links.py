"""Monotone links g: R -> (0, 1) used to build stick-breaking weights."""

import numpy as np
from scipy import special


class LinkFunction:
    """Base class for a stick-breaking link.

    Subclasses supply the CDF-like map together with log-space versions
    of ``g`` and ``1 - g`` and their first two derivatives, which the
    mode-finding Metropolis step relies on.
    """

    name = "link"

    def __call__(self, x):
        return self.cdf(x)

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        """1 - g(x), computed without cancellation."""
        raise NotImplementedError

    def ppf(self, p):
        raise NotImplementedError

    def isf(self, q):
        """Inverse of :meth:`sf`."""
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def log_cdf(self, x):
        return np.log(self.cdf(x))

    def log_sf(self, x):
        return np.log(self.sf(x))

    def dlog_cdf(self, x):
        raise NotImplementedError

    def d2log_cdf(self, x):
        raise NotImplementedError

    def dlog_sf(self, x):
        raise NotImplementedError

    def d2log_sf(self, x):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


def _mills(x):
    # phi(x) / Phi(x), stable for very negative x
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x - 0.5 * np.log(2 * np.pi) - special.log_ndtr(x))


class ProbitLink(LinkFunction):
    name = "probit"

    def cdf(self, x):
        return special.ndtr(x)

    def sf(self, x):
        return special.ndtr(-np.asarray(x, dtype=float))

    def ppf(self, p):
        return special.ndtri(p)

    def isf(self, q):
        return -special.ndtri(q)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi)

    def log_cdf(self, x):
        return special.log_ndtr(x)

    def log_sf(self, x):
        return special.log_ndtr(-np.asarray(x, dtype=float))

    def dlog_cdf(self, x):
        return _mills(x)

    def d2log_cdf(self, x):
        m = _mills(x)
        return -m * (np.asarray(x, dtype=float) + m)

    def dlog_sf(self, x):
        return -_mills(-np.asarray(x, dtype=float))

    def d2log_sf(self, x):
        x = np.asarray(x, dtype=float)
        m = _mills(-x)
        return -m * (m - x)


class LogitLink(LinkFunction):
    name = "logit"

    def cdf(self, x):
        return special.expit(x)

    def sf(self, x):
        return special.expit(-np.asarray(x, dtype=float))

    def ppf(self, p):
        return special.logit(p)

    def isf(self, q):
        return -special.logit(q)

    def pdf(self, x):
        g = special.expit(x)
        return g * (1.0 - g)

    def log_cdf(self, x):
        return special.log_expit(x)

    def log_sf(self, x):
        return special.log_expit(-np.asarray(x, dtype=float))

    def dlog_cdf(self, x):
        return special.expit(-np.asarray(x, dtype=float))

    def d2log_cdf(self, x):
        x = np.asarray(x, dtype=float)
        return -special.expit(x) * special.expit(-x)

    def dlog_sf(self, x):
        return -special.expit(x)

    def d2log_sf(self, x):
        return self.d2log_cdf(x)


LINKS = {"probit": ProbitLink(), "logit": LogitLink()}


def get_link(link):
    """Resolve a link name (or pass an instance through)."""
    if isinstance(link, LinkFunction):
        return link
    try:
        return LINKS[str(link).lower()]
    except KeyError:
        raise ValueError(f"unknown link {link!r}; choose from {sorted(LINKS)}") from None
