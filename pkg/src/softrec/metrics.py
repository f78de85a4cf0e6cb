"""Sender-side soft metrics from the disclosed value and the known symbol.

Knowing her transmitted symbol a_j and the disclosed metric n, the sender
entertains M hypotheses, one per possible receiver decision: decision i
together with n pins the channel output at g_i^{-1}(n). The density of each
hypothesis is

    f(n, i | j) = f_{Y|X}(g_i^{-1}(n) | a_j) / |g_i'(g_i^{-1}(n))|

and everything downstream (decision posteriors, per-bit LAPPRs) is built
from these M numbers. All combination happens in log-domain; the raw
Gaussian ratios underflow at high SNR.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from softrec.channel import log_output_density
from softrec.constellation import Constellation, bit_partitions
from softrec.softening import SofteningTransform, inverse_and_jacobian

__all__ = [
    "LAPPR_CLAMP",
    "LapprVector",
    "joint_conditional_density",
    "joint_density_ratio_form",
    "log_joint_conditional_density",
    "posterior_decisions",
    "lappr",
    "lappr_batch",
]

# Clamp for LAPPR magnitudes (natural-log units). Far above any
# decision-relevant magnitude but keeps the decoder away from +-inf.
LAPPR_CLAMP = 50.0

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class LapprVector:
    """Per-bit log a-posteriori probability ratios for one symbol slot.

    Attributes
    ----------
    values : ndarray, shape (L,)
        log(P(bit=0)/P(bit=1)) per bit position, scaled by ``alpha`` and
        clamped to [-LAPPR_CLAMP, LAPPR_CLAMP].
    alpha : float
        The multiplicative scaling that was applied.
    """

    values: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if not np.all(np.isfinite(vals)):
            raise ValueError("LAPPR values must be finite")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")


def _log_joint_from_y(y, i, j, t: SofteningTransform):
    """log f(n, i | j) given the already-inverted output y = g_i^{-1}(n)."""
    ch = t.channel
    a = ch.constellation.points
    aj = a[np.asarray(j)]
    log_fyx = -((y - aj) ** 2) / (2.0 * ch.noise_variance) - _LOG_SQRT_2PI - np.log(ch.sigma)
    # 1 / |g'| = dF_i / f_Y(y)
    return log_fyx - log_output_density(y, ch) + np.log(t.deltas[np.asarray(i)])


def log_joint_conditional_density(n, i, j, t: SofteningTransform):
    """log of the joint conditional density; broadcasts over n, i, j."""
    y, _ = inverse_and_jacobian(n, i, t)
    return _log_joint_from_y(y, i, j, t)


def joint_conditional_density(n, i, j, t: SofteningTransform):
    """Joint conditional density of (metric, decision) given the sent symbol.

    Parameters
    ----------
    n : float or array
        Disclosed metric in (0, 1); endpoint values are clamped inward by
        N_EPS.
    i : int or array
        Hypothesized receiver decision (region index).
    j : int or array
        Transmitted symbol index.
    t : SofteningTransform

    Returns
    -------
    float or ndarray
        Non-negative density value(s); for fixed j they integrate to 1 over
        (n, i).
    """
    out = np.exp(log_joint_conditional_density(n, i, j, t))
    if np.isscalar(n) and np.isscalar(i) and np.isscalar(j):
        return float(np.asarray(out).reshape(()))
    return out


def joint_density_ratio_form(n, i, j, t: SofteningTransform):
    """Same density through the expanded mixture-ratio identity.

    Substituting the mixture forms of f_{Y|X} and f_Y collapses the joint
    density to

        dF_i / sum_k P_k exp(-(2 y - a_j - a_k)(a_j - a_k) / (2 sigma^2))

    with y = g_i^{-1}(n). Kept as an independent evaluation route and
    cross-checked against the definition form in the tests; do not fold the
    two together.
    """
    ch = t.channel
    y, _ = inverse_and_jacobian(n, i, t)
    a = ch.constellation.points
    aj = a[np.asarray(j)]
    yb = np.asarray(y)[..., None]
    ajb = np.asarray(aj)[..., None]
    expo = -((2.0 * yb - ajb - a) * (ajb - a)) / (2.0 * ch.noise_variance)
    log_den = logsumexp(expo, axis=-1, b=ch.constellation.priors)
    out = np.exp(np.log(t.deltas[np.asarray(i)]) - log_den)
    if np.isscalar(n) and np.isscalar(i) and np.isscalar(j):
        return float(np.asarray(out).reshape(()))
    return out


def _log_joint_all_decisions(n, j, t: SofteningTransform):
    """log f(n, i | j) for every decision i; shapes (..., M).

    One vectorized quantile solve covers all regions.
    """
    m = t.order
    narr = np.asarray(n, dtype=float)
    jarr = np.asarray(j)
    i_all = np.arange(m)
    y, _ = inverse_and_jacobian(narr[..., None], i_all, t)
    return _log_joint_from_y(y, i_all, jarr[..., None], t)


def posterior_decisions(n, j, t: SofteningTransform):
    """Posterior over the receiver's decision given (sent symbol, metric).

    Returns a length-M probability vector (or (..., M) array) summing to 1;
    computed by a log-domain softmax so high-SNR ratios cannot underflow to
    an all-zero numerator.
    """
    logf = _log_joint_all_decisions(n, j, t)
    logz = logsumexp(logf, axis=-1, keepdims=True)
    return np.exp(logf - logz)


def lappr(
    n: float,
    j: int,
    t: SofteningTransform,
    c: Constellation | None = None,
    alpha: float = 1.0,
) -> LapprVector:
    """Per-bit LAPPRs for one symbol slot.

    Parameters
    ----------
    n : float
        Disclosed metric, in (0, 1).
    j : int
        The sender's own symbol index.
    t : SofteningTransform
    c : Constellation, optional
        Supplies the bit labeling; defaults to the channel's constellation.
    alpha : float
        Multiplicative scaling applied before clamping; 1.0 leaves the
        log-ratios untouched. 0.65 is the documented tuned preset for the
        bundled rate-1/2 decoder.

    Returns
    -------
    LapprVector
        values[l] = clamp(alpha * log(sum_{i: bit_l(i)=0} f / sum_{i: bit_l(i)=1} f)).
    """
    values = lappr_batch(np.asarray([n]), np.asarray([j]), t, alpha=alpha, c=c)[0]
    return LapprVector(values=values, alpha=alpha)


def lappr_batch(
    n,
    j,
    t: SofteningTransform,
    alpha: float = 1.0,
    c: Constellation | None = None,
) -> np.ndarray:
    """Vectorized LAPPRs for many symbol slots.

    Parameters
    ----------
    n : array, shape (S,)
    j : int array, shape (S,)
    t : SofteningTransform
    alpha : float
    c : Constellation, optional

    Returns
    -------
    ndarray, shape (S, L)
        Bit-position-major LAPPRs per slot, clamped to +-LAPPR_CLAMP.
    """
    if c is None:
        c = t.channel.constellation
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    jarr = np.asarray(j)
    if jarr.size and (jarr.min() < 0 or jarr.max() >= t.order):
        raise ValueError("symbol index out of range")
    logf = _log_joint_all_decisions(np.asarray(n, dtype=float), jarr, t)
    nbits = c.bits_per_symbol
    out = np.empty(logf.shape[:-1] + (nbits,), dtype=float)
    for l in range(nbits):
        zeros, ones = bit_partitions(c, l)
        l0 = logsumexp(logf[..., zeros], axis=-1)
        l1 = logsumexp(logf[..., ones], axis=-1)
        out[..., l] = alpha * (l0 - l1)
    np.clip(out, -LAPPR_CLAMP, LAPPR_CLAMP, out=out)
    return out
