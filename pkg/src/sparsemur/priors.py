"""Rectified power-exponential scale-mixture (RPESM) priors.

Every prior used by the solvers has a penalty of the power form

    penalty(h) = c * sum log(tau + stat(h)),    stat = h**z (or a block statistic)

and enters the multiplicative update only through its weight matrix
``Omega`` with ``d penalty / dh = Omega * h**(z-1)``.  The coefficient ``c``
is ``z * alpha`` with ``alpha`` the exponent of the density
``(tau + h**z)**(-alpha)``; this reproduces the reweighted-l2 weight
``2 (tau+1) / (tau + h**2)`` and the reweighted-l1 weight
``(tau+1) / (tau + h)`` exactly.

Besides the weights, this module evaluates the (rectified) densities and a
quadrature oracle for the scale-mixture identities.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy import integrate, special

from .exceptions import NegativeEntryError, ValidationError
from .matcore import check_nonneg

if TYPE_CHECKING:  # pragma: no cover
    from .blocksparse import BlockStructure

RECTIFIED_GAUSSIAN = "rectified_gaussian"
EXPONENTIAL = "exponential"
RST = "rst"
RGDP = "rgdp"
NONINFORMATIVE = "noninformative"
BLOCK_RST = "block_rst"
BLOCK_RGDP = "block_rgdp"

FAMILIES = (RECTIFIED_GAUSSIAN, EXPONENTIAL, RST, RGDP, NONINFORMATIVE, BLOCK_RST, BLOCK_RGDP)
BLOCK_FAMILIES = (BLOCK_RST, BLOCK_RGDP)
POWER_FAMILIES = (RST, RGDP, BLOCK_RST, BLOCK_RGDP)

_FAMILY_Z = {
    RECTIFIED_GAUSSIAN: 2,
    RST: 2,
    BLOCK_RST: 2,
    EXPONENTIAL: 1,
    RGDP: 1,
    BLOCK_RGDP: 1,
}

_ALIASES = {
    "rg": RECTIFIED_GAUSSIAN,
    "gaussian": RECTIFIED_GAUSSIAN,
    "exp": EXPONENTIAL,
    "l1": EXPONENTIAL,
    "student": RST,
    "rl2": RST,
    "reweighted_l2": RST,
    "gdp": RGDP,
    "rl1": RGDP,
    "reweighted_l1": RGDP,
    "none": NONINFORMATIVE,
    "flat": NONINFORMATIVE,
    "nmf": NONINFORMATIVE,
    "brst": BLOCK_RST,
    "brgdp": BLOCK_RGDP,
}


def canonical_family(name):
    key = str(name).strip().lower().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in FAMILIES:
        raise ValidationError(f"unknown prior family {name!r}; expected one of {FAMILIES}")
    return key


@dataclass(frozen=True)
class PriorSpec:
    """Prior family plus parameters.

    Parameters
    ----------
    family : str
        One of ``FAMILIES`` (aliases such as ``"rl1"``, ``"brst"`` accepted).
    tau : float
        Shape parameter, > 0.  For the rectified Gaussian it is the variance
        and for the exponential the rate.
    alpha : float, optional
        Exponent of the power form.  Defaults to ``(tau+1)/2`` for the
        Student's-t families and ``tau+1`` for the double-Pareto families.
    z : int, optional
        Power-exponential exponent; fixed by the family, may be given
        explicitly only for the non-informative prior.
    blocks : BlockStructure, optional
        Required for (and only for) the block families.
    """

    family: str = NONINFORMATIVE
    tau: float = 0.1
    alpha: Optional[float] = None
    z: Optional[int] = None
    blocks: Optional["BlockStructure"] = field(default=None, compare=False)

    def __post_init__(self):
        family = canonical_family(self.family)
        object.__setattr__(self, "family", family)
        tau = float(self.tau)
        if not (tau > 0 and math.isfinite(tau)):
            raise ValidationError(f"tau must be a positive finite real, got {self.tau!r}")
        object.__setattr__(self, "tau", tau)
        if self.alpha is not None and not float(self.alpha) > 0:
            raise ValidationError(f"alpha must be positive, got {self.alpha!r}")
        expected_z = _FAMILY_Z.get(family)
        z = self.z
        if z is None:
            z = expected_z if expected_z is not None else 1
        z = int(z)
        if z not in (1, 2):
            raise ValidationError(f"z must be 1 or 2, got {self.z!r}")
        if expected_z is not None and z != expected_z:
            raise ValidationError(f"family {family!r} requires z={expected_z}, got z={z}")
        object.__setattr__(self, "z", z)
        if family in BLOCK_FAMILIES and self.blocks is None:
            raise ValidationError(f"family {family!r} requires a block structure")
        if family not in BLOCK_FAMILIES and self.blocks is not None:
            raise ValidationError(f"family {family!r} does not take a block structure")

    @property
    def is_block(self):
        return self.family in BLOCK_FAMILIES

    @property
    def alpha_(self):
        """Resolved power-form exponent."""
        if self.alpha is not None:
            return float(self.alpha)
        if self.family in (RST, BLOCK_RST):
            return (self.tau + 1.0) / 2.0
        return self.tau + 1.0

    @property
    def penalty_coef(self):
        """``c`` in ``c * sum log(tau + stat)``; equals ``tau + 1`` by default."""
        return self.z * self.alpha_

    def with_tau(self, tau):
        """Copy with a new ``tau``; an explicit ``alpha`` is kept as is."""
        return PriorSpec(self.family, tau, self.alpha, self.z, self.blocks)

    def to_dict(self):
        out = {"family": self.family, "tau": self.tau, "z": self.z}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.blocks is not None:
            out["blocks"] = self.blocks.to_list()
        return out


def _stat(prior, H):
    """Per-entry statistic the weights depend on (broadcast for blocks)."""
    if prior.family == BLOCK_RST:
        return prior.blocks.stats(H, "l2sq")
    if prior.family == BLOCK_RGDP:
        return prior.blocks.stats(H, "l1")
    if prior.z == 2:
        return H * H
    return H


def _check_h(H, name="H"):
    H = np.asarray(H, dtype=np.float64)
    if H.ndim == 1:
        H = H.reshape(-1, 1)
    if np.isnan(H).any():
        raise ValidationError(f"{name} contains NaN")
    neg = np.argwhere(H < 0)
    if neg.size:
        r, c = neg[0]
        raise NegativeEntryError(name, r, c, H[r, c])
    return H


def weight_matrix(prior, Ht):
    """EM weight matrix ``Omega`` (``Phi`` for block priors) at ``Ht``.

    The update denominator penalty is ``lam * Omega * H**(z-1)``.

    ===================  =====================================
    family               Omega
    ===================  =====================================
    rst                  2 (tau+1) / (tau + Ht**2)
    rgdp                 (tau+1) / (tau + Ht)
    block_rst            2 (tau+1) / (tau + blockwise ||.||_2^2)
    block_rgdp           (tau+1) / (tau + blockwise ||.||_1)
    exponential          1
    rectified_gaussian   1 / tau
    noninformative       0
    ===================  =====================================
    """
    Ht = _check_h(Ht, "Ht")
    fam = prior.family
    if fam == NONINFORMATIVE:
        return np.zeros_like(Ht)
    if fam == EXPONENTIAL:
        return np.ones_like(Ht)
    if fam == RECTIFIED_GAUSSIAN:
        return np.full_like(Ht, 1.0 / prior.tau)
    return (prior.z * prior.penalty_coef) / (prior.tau + _stat(prior, Ht))


def penalty_gradient(prior, H):
    """``d penalty / dH = Omega(H) * H**(z-1)`` evaluated at ``H`` itself."""
    H = _check_h(H)
    omega = weight_matrix(prior, H)
    return omega * H if prior.z == 2 else omega


def neg_log_prior(prior, H):
    """Penalty term of the MAP objective, up to an additive constant.

    ``rst``: ``(tau+1) sum log(tau + h^2)``;  ``rgdp``: ``(tau+1) sum log(tau + h)``;
    block families put the blockwise ``||.||_2^2`` / ``||.||_1`` inside the log;
    ``exponential``: ``sum h``;  ``rectified_gaussian``: ``sum h^2 / (2 tau)``;
    ``noninformative``: 0.  The constant is chosen so the all-zero matrix
    scores ``c * N * log(tau)`` for the power families, i.e. 0 when tau=1.
    """
    H = _check_h(H)
    fam = prior.family
    if fam == NONINFORMATIVE:
        return 0.0
    if fam == EXPONENTIAL:
        return float(np.sum(H))
    if fam == RECTIFIED_GAUSSIAN:
        return float(np.sum(H * H) / (2.0 * prior.tau))
    if prior.is_block:
        mode = "l2sq" if fam == BLOCK_RST else "l1"
        stats = prior.blocks.block_values(H, mode)
    else:
        stats = _stat(prior, H)
    return float(prior.penalty_coef * np.sum(np.log(prior.tau + stats)))


# ---------------------------------------------------------------------------
# densities (Table-1 style, rectified to h >= 0)


def _rg_pdf(h, gamma):
    return math.sqrt(2.0 / (math.pi * gamma)) * math.exp(-h * h / (2.0 * gamma))


def _exp_pdf(h, rate):
    return rate * math.exp(-rate * h)


def _gamma_pdf(g, shape, rate):
    # rate parameterisation; normalised
    if g <= 0:
        return 0.0
    return math.exp(shape * math.log(rate) + (shape - 1) * math.log(g) - rate * g - special.gammaln(shape))


def _invgamma_pdf(g, shape, scale):
    if g <= 0:
        return 0.0
    return math.exp(shape * math.log(scale) - (shape + 1) * math.log(g) - scale / g - special.gammaln(shape))


def _rst_pdf(h, tau):
    logc = math.log(2.0) + special.gammaln((tau + 1) / 2) - 0.5 * math.log(tau * math.pi) - special.gammaln(tau / 2)
    return math.exp(logc - (tau + 1) / 2 * math.log1p(h * h / tau))


_eta_lock = threading.Lock()


@lru_cache(maxsize=None)
def _rgdp_eta_cached(a, b, tau):
    # 1 / (2 * integral of the unnormalised kernel over [0, inf))
    kernel = lambda h: (1.0 + h ** b / (tau * a ** b)) ** (-(tau + 1.0 / b))
    val, _ = integrate.quad(kernel, 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    return 1.0 / (2.0 * val)


def rgdp_eta(a, b, tau):
    """Normalising constant of the rectified generalised double Pareto.

    Computed once per parameter triple by quadrature.
    """
    with _eta_lock:
        return _rgdp_eta_cached(float(a), float(b), float(tau))


def _rgdp_pdf(h, a, b, tau):
    return 2.0 * rgdp_eta(a, b, tau) * (1.0 + h ** b / (tau * a ** b)) ** (-(tau + 1.0 / b))


def density(family, params, h):
    """Rectified pdf of ``family`` at scalar ``h``; 0 for ``h < 0``.

    ``params`` keys per family:

    - ``rectified_gaussian``: ``gamma`` (variance), default 1
    - ``exponential``: ``gamma`` (rate), default 1
    - ``rst``: ``tau``, default 1
    - ``rgdp``: ``a``, ``b``, ``tau``, defaults 1, 1, 1
    - ``gamma``: ``a`` (shape), ``b`` (rate)
    - ``inverse_gamma``: ``a`` (shape), ``b`` (scale)
    """
    params = dict(params or {})
    fam = str(family).lower()
    if fam not in ("gamma", "inverse_gamma"):
        fam = canonical_family(fam)
    for key, val in params.items():
        if not float(val) > 0:
            raise ValidationError(f"parameter {key}={val!r} must be positive")
    h = float(h)
    if h < 0:
        return 0.0
    if fam == RECTIFIED_GAUSSIAN:
        return _rg_pdf(h, float(params.get("gamma", 1.0)))
    if fam == EXPONENTIAL:
        return _exp_pdf(h, float(params.get("gamma", 1.0)))
    if fam == RST:
        return _rst_pdf(h, float(params.get("tau", 1.0)))
    if fam == RGDP:
        return _rgdp_pdf(h, float(params.get("a", 1.0)), float(params.get("b", 1.0)), float(params.get("tau", 1.0)))
    if fam == "gamma":
        return _gamma_pdf(h, float(params["a"]), float(params["b"]))
    if fam == "inverse_gamma":
        return _invgamma_pdf(h, float(params["a"]), float(params["b"]))
    raise ValidationError(f"no density for family {family!r}")


# ---------------------------------------------------------------------------
# scale-mixture oracle


@dataclass(frozen=True)
class MixtureRow:
    """One scale-mixture identity: conditional exponent, mixing law, marginal."""

    z: int
    mixing: str
    marginal: str


MIXTURE_ROWS = (
    MixtureRow(2, "exponential(tau^2/2)", EXPONENTIAL),
    MixtureRow(2, "inverse_gamma(tau/2, tau/2)", RST),
    MixtureRow(1, "gamma(tau, tau)", RGDP),
)


@dataclass(frozen=True)
class QuadratureSpec:
    epsabs: float = 1e-12
    epsrel: float = 1e-10
    limit: int = 400
    max_error: float = 1e-8


class QuadratureError(ArithmeticError):
    def __init__(self, value, error):
        self.value = value
        self.error = error
        super().__init__(f"quadrature did not converge: value={value!r}, estimated error={error!r}")


def _mixing_pdf(row, tau, g):
    if row.z == 2 and row.marginal == EXPONENTIAL:
        return _exp_pdf(g, tau * tau / 2.0)
    if row.z == 2:
        return _invgamma_pdf(g, tau / 2.0, tau / 2.0)
    return _gamma_pdf(g, tau, tau)


def _conditional_pdf(row, h, g):
    # z=2: rectified Gaussian with variance g;  z=1: exponential with rate g
    if row.z == 2:
        return _rg_pdf(h, g)
    return _exp_pdf(h, g)


def closed_form_marginal(row, h, tau):
    if h < 0:
        return 0.0
    if row.marginal == EXPONENTIAL:
        return _exp_pdf(h, tau)
    if row.marginal == RST:
        return _rst_pdf(h, tau)
    return _rgdp_pdf(h, 1.0, 1.0, tau)


def mixture_quadrature(row, h, tau=1.0, grid=None):
    """Integrate ``p(h | g) p(g)`` over ``g in (0, inf)`` numerically.

    The integral is taken in ``u = log g`` which removes the endpoint
    singularities of the mixing densities.

    Raises
    ------
    QuadratureError
        If the estimated absolute error exceeds ``grid.max_error``.
    """
    grid = grid or QuadratureSpec()
    h = float(h)
    if h < 0:
        return 0.0

    def integrand(u):
        if u < -700.0 or u > 700.0:
            # g underflows / overflows; the integrand vanishes at both ends
            return 0.0
        g = math.exp(u)
        return _conditional_pdf(row, h, g) * _mixing_pdf(row, tau, g) * g

    # split at the mode region so quad sees the mass
    pieces = (-np.inf, -20.0, -5.0, 0.0, 5.0, 20.0, np.inf)
    total = 0.0
    err = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        val, e = integrate.quad(integrand, lo, hi, epsabs=grid.epsabs, epsrel=grid.epsrel, limit=grid.limit)
        total += val
        err += e
    if err > grid.max_error:
        raise QuadratureError(total, err)
    return total


def integrate_density(family, params=None):
    """Total mass of ``density`` on ``[0, inf)`` by adaptive quadrature."""
    f = lambda h: density(family, params, h)
    a, _ = integrate.quad(f, 0, 1, limit=200)
    b, _ = integrate.quad(f, 1, np.inf, limit=400)
    return a + b
