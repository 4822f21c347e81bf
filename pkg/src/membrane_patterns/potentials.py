"""Double-well potentials ``W = W1 + W2`` with ``W1`` convex and ``W2`` concave.

Three families are supported:

* ``polynomial``: ``a4 s^4 - a2 s^2 - mu0 s + a0`` with ``W1 = a4 s^4``.
* ``log_extended``: Flory-Huggins ``theta/2 ((1+s)ln(1+s) + (1-s)ln(1-s))
  - theta_c/2 s^2 - mu0 s``, whose convex part is continued beyond
  ``|s| >= 1 - delta`` by its second-order Taylor polynomial, so the
  potential is finite on the whole real line.
* ``moreau_yosida``: the convex logarithmic part replaced by its
  Moreau-Yosida regularization with parameter ``lam``.

The double-obstacle potential is intentionally absent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConvergenceError, InvalidParameterError

VARIANTS = ("polynomial", "log_extended", "moreau_yosida")


@dataclass(frozen=True)
class PotentialSpec:
    variant: str
    a4: float = 0.0
    a2: float = 0.0
    a0: float = 0.0
    mu0: float = 0.0
    theta: float = 4.0
    theta_c: float = 5.0
    delta: float = 0.02
    lam: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidParameterError(f"unknown potential variant {self.variant!r}")
        if self.variant == "polynomial":
            if not (self.a4 > 0 and self.a2 > 0):
                raise InvalidParameterError("polynomial potential needs a4 > 0 and a2 > 0")
        else:
            if not (0 < self.theta < self.theta_c):
                raise InvalidParameterError("logarithmic potential needs 0 < theta < theta_c")
            if self.variant == "log_extended" and not (0 < self.delta < 1):
                raise InvalidParameterError("cutoff delta must lie in (0, 1)")
            if self.variant == "moreau_yosida" and not self.lam > 0:
                raise InvalidParameterError("Moreau-Yosida parameter lam must be positive")

    @property
    def seam(self) -> float:
        return 1.0 - self.delta

    # -- convex part -------------------------------------------------------
    def convex(self, s):
        """``(W1, W1', W1'')`` evaluated elementwise."""
        s = np.asarray(s, dtype=np.float64)
        if self.variant == "polynomial":
            return self.a4 * s**4, 4.0 * self.a4 * s**3, 12.0 * self.a4 * s**2
        if self.variant == "log_extended":
            return kernels.K.log_convex(s, self.theta, self.seam)
        star = resolvent(self, self.lam, s)
        w1, _, d2 = _log_exact(star, self.theta)
        val = (s - star) ** 2 / (2.0 * self.lam) + w1
        return val, (s - star) / self.lam, d2 / (1.0 + self.lam * d2)

    # -- concave part ------------------------------------------------------
    def concave(self, s):
        """``(W2, W2')`` evaluated elementwise."""
        s = np.asarray(s, dtype=np.float64)
        if self.variant == "polynomial":
            return -self.a2 * s**2 - self.mu0 * s + self.a0, -2.0 * self.a2 * s - self.mu0
        return -0.5 * self.theta_c * s**2 - self.mu0 * s, -self.theta_c * s - self.mu0

    def W(self, s):
        return self.convex(s)[0] + self.concave(s)[0]

    def dW(self, s):
        return self.convex(s)[1] + self.concave(s)[1]


def polynomial(a4=1.0, a2=2.0, a0=0.0, mu0=0.0) -> PotentialSpec:
    return PotentialSpec("polynomial", a4=a4, a2=a2, a0=a0, mu0=mu0)


def log_extended(theta=4.0, theta_c=5.0, mu0=0.0, delta=0.02) -> PotentialSpec:
    return PotentialSpec("log_extended", theta=theta, theta_c=theta_c, mu0=mu0, delta=delta)


def moreau_yosida(lam, base: Optional[PotentialSpec] = None) -> PotentialSpec:
    base = base or log_extended()
    return PotentialSpec("moreau_yosida", theta=base.theta, theta_c=base.theta_c,
                         mu0=base.mu0, delta=base.delta, lam=lam)


def membrane_potential() -> PotentialSpec:
    """The Taylor-extended logarithmic potential used for the pattern studies."""
    return log_extended(theta=4.0, theta_c=5.0, mu0=0.0, delta=0.02)


def eval_split(spec: PotentialSpec, s):
    """Return ``(W1, W2, W1', W2')`` at ``s``."""
    w1, dw1, _ = spec.convex(s)
    w2, dw2 = spec.concave(s)
    return w1, w2, dw1, dw2


def _log_exact(s, theta):
    # unextended convex logarithmic part on (-1, 1)
    s = np.asarray(s, dtype=np.float64)
    half = 0.5 * theta
    lp, lm = np.log1p(s), np.log1p(-s)
    return half * ((1 + s) * lp + (1 - s) * lm), half * (lp - lm), theta / (1 - s * s)


def resolvent(base: PotentialSpec, lam: float, r):
    """``(id + lam W1')^{-1}(r)`` for the logarithmic convex part, elementwise in ``r``."""
    if not lam > 0:
        raise InvalidParameterError("lam must be positive")
    if base.variant == "polynomial":
        raise InvalidParameterError("resolvent is defined for the logarithmic convex part only")
    scalar = np.ndim(r) == 0
    s, iters = kernels.K.log_resolvent(np.atleast_1d(np.asarray(r, dtype=np.float64)),
                                       lam, base.theta, 1e-12, 200)
    if iters < 0:
        raise ConvergenceError("resolvent iteration did not converge in 200 steps")
    return float(s[0]) if scalar else s


def moreau_yosida_eval(base: PotentialSpec, lam: float, r):
    """``(W1_lam(r), W1_lam'(r))`` for the logarithmic convex part of ``base``."""
    star = resolvent(base, lam, r)
    w1 = _log_exact(star, base.theta)[0]
    r = np.asarray(r, dtype=np.float64)
    val = (r - star) ** 2 / (2.0 * lam) + w1
    der = (r - star) / lam
    if np.ndim(val) == 0:
        return float(val), float(der)
    return val, der


def log_convex_exact(base: PotentialSpec, s):
    """Unregularised logarithmic ``W1``; ``+inf`` outside ``[-1, 1]``."""
    s = np.asarray(s, dtype=np.float64)
    inside = np.abs(s) <= 1.0
    sc = np.where(inside, s, 0.0)
    half = 0.5 * base.theta
    # 0 ln 0 := 0 at the end points
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(sc > -1.0, (1 + sc) * np.log1p(sc), 0.0)
        b = np.where(sc < 1.0, (1 - sc) * np.log1p(-sc), 0.0)
    return np.where(inside, half * (a + b), np.inf)
