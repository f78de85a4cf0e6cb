"""Piecewise softening transforms over the decision regions.

The receiver maps his observation y, landing in decision region D_i, through
a region-local monotone reparameterization of the output CDF:

    increasing piece:  g_i(y) = (F_Y(y) - F_Y(inf D_i)) / dF_i
    decreasing piece:  g_i(y) = (F_Y(sup D_i) - F_Y(y)) / dF_i

with dF_i = F_Y(sup D_i) - F_Y(inf D_i). Either way the disclosed value
N = g(Y) is Uniform[0,1] conditioned on ANY decision, which is what makes
publishing it leak nothing about the decision itself. The monotonicity sign
per region is a free design choice; both pieces share the Jacobian
|g_i'(y)| = f_Y(y) / dF_i.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from softrec.channel import ChannelModel, output_cdf, output_density, output_quantile
from softrec.constellation import DecisionRegions, decide, map_decision_regions

__all__ = [
    "MonotonicityConfig",
    "SofteningTransform",
    "TailSaturationWarning",
    "build_transform",
    "enumerate_configs",
    "soften",
    "unsoften",
    "transform_jacobian",
    "N_EPS",
]

# Disclosed-metric clamp: n in {0, 1} maps to +-inf on unbounded edge
# regions, so callers of the inverse work inside [N_EPS, 1 - N_EPS].
N_EPS = 1e-12

_EDGE_SUM_TOL = 1e-10


class TailSaturationWarning(RuntimeWarning):
    """Inverse/Jacobian requested at the exact endpoint of an unbounded region."""


@dataclass(frozen=True)
class MonotonicityConfig:
    """Per-region monotonicity choice for the transform pieces.

    Attributes
    ----------
    signs : tuple of int
        One entry per decision region; +1 for an increasing piece, -1 for a
        decreasing one.
    """

    signs: tuple[int, ...]

    def __post_init__(self) -> None:
        signs = tuple(int(s) for s in self.signs)
        object.__setattr__(self, "signs", signs)
        if not signs:
            raise ValueError("signs must be non-empty")
        if set(signs) - {1, -1}:
            raise ValueError("signs entries must be +1 or -1")

    @classmethod
    def base(cls, m: int) -> "MonotonicityConfig":
        """All pieces increasing."""
        return cls(signs=(1,) * m)

    @classmethod
    def alternating(cls, m: int) -> "MonotonicityConfig":
        """Signs alternate between adjacent regions, starting increasing."""
        return cls(signs=tuple(1 if i % 2 == 0 else -1 for i in range(m)))

    @classmethod
    def from_string(cls, text: str, m: int) -> "MonotonicityConfig":
        """Parse 'base', 'alternating', or an explicit sign string like '+-+-'."""
        name = text.strip().lower()
        if name == "base":
            return cls.base(m)
        if name == "alternating":
            return cls.alternating(m)
        if set(name) <= {"+", "-"} and name:
            if len(name) != m:
                raise ValueError(f"sign string {text!r} must have length {m}")
            return cls(signs=tuple(1 if ch == "+" else -1 for ch in name))
        raise ValueError(f"unrecognized monotonicity config {text!r}")

    def __str__(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.signs)

    @property
    def name(self) -> str:
        """Canonical name: 'base', 'alternating', or the sign string."""
        m = len(self.signs)
        if self == MonotonicityConfig.base(m):
            return "base"
        if self == MonotonicityConfig.alternating(m):
            return "alternating"
        return str(self)


def enumerate_configs(m: int):
    """Yield all 2^M monotonicity configurations for M regions.

    Order is lexicographic with increasing-first, so the base (all
    increasing) config comes first.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    for signs in itertools.product((1, -1), repeat=m):
        yield MonotonicityConfig(signs=signs)


@dataclass(frozen=True)
class SofteningTransform:
    """A fully built softening transform bound to a channel.

    The CDF values at all region edges are precomputed once; they are hit in
    per-sample hot loops. ``cdf_edges[i] = F_Y(inf D_i)`` with a final entry
    of 1, so region i spans probability [cdf_edges[i], cdf_edges[i+1]] and
    ``deltas[i]`` is its mass, which also equals P(decision = i).
    """

    channel: ChannelModel
    regions: DecisionRegions
    config: MonotonicityConfig
    cdf_edges: np.ndarray
    deltas: np.ndarray

    def __post_init__(self) -> None:
        m = self.regions.count
        if len(self.config.signs) != m:
            raise ValueError(f"config has {len(self.config.signs)} signs for {m} regions")
        if self.cdf_edges.shape != (m + 1,):
            raise ValueError("cdf_edges must have one entry per region edge")
        if not np.all(self.deltas > 0):
            raise ValueError("every region must carry positive probability mass")
        if abs(self.deltas.sum() - 1.0) > _EDGE_SUM_TOL:
            raise ValueError("region probability masses must sum to 1")

    @property
    def order(self) -> int:
        """Number of regions M."""
        return self.regions.count


def build_transform(
    ch: ChannelModel,
    config: MonotonicityConfig | str | None = None,
    regions: DecisionRegions | None = None,
) -> SofteningTransform:
    """Construct the transform for a channel, config, and decision regions.

    Parameters
    ----------
    ch : ChannelModel
    config : MonotonicityConfig or str, optional
        Defaults to all-increasing. Strings accept 'base', 'alternating',
        or a sign string like '+-+-'.
    regions : DecisionRegions, optional
        Defaults to the MAP regions of the channel's constellation.
    """
    if regions is None:
        regions = map_decision_regions(ch.constellation, ch.noise_variance)
    m = regions.count
    if config is None:
        config = MonotonicityConfig.base(m)
    elif isinstance(config, str):
        config = MonotonicityConfig.from_string(config, m)
    inner = output_cdf(regions.boundaries, ch) if m > 1 else np.empty(0)
    edges = np.concatenate(([0.0], np.atleast_1d(inner), [1.0]))
    deltas = np.diff(edges)
    return SofteningTransform(
        channel=ch, regions=regions, config=config, cdf_edges=edges, deltas=deltas
    )


def soften(y, t: SofteningTransform):
    """Map observation(s) to (disclosed metric, decision index).

    Parameters
    ----------
    y : float or array
        Finite channel outputs.
    t : SofteningTransform

    Returns
    -------
    (n, decision)
        ``n`` in [0, 1] with the same shape as ``y``; ``decision`` the
        region index of each observation.
    """
    arr = np.asarray(y, dtype=float)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError("soften: observations must be finite")
    d = decide(arr, t.regions)
    didx = np.asarray(d)
    fy = output_cdf(arr, t.channel)
    signs = np.asarray(t.config.signs)[didx]
    lo = t.cdf_edges[didx]
    hi = t.cdf_edges[didx + 1]
    n = np.where(signs > 0, fy - lo, hi - fy) / t.deltas[didx]
    n = np.clip(n, 0.0, 1.0)
    if arr.ndim == 0:
        return float(n), int(d)
    return n, d


def _clamped_p(n, i, t: SofteningTransform, warn: bool):
    """Probability-space target of the piecewise inverse, endpoint-clamped."""
    narr = np.asarray(n, dtype=float)
    iarr = np.asarray(i)
    if narr.size and (np.nanmin(narr) < 0.0 or np.nanmax(narr) > 1.0):
        raise ValueError("metric n must lie in [0, 1]")
    if np.isnan(narr).any():
        raise ValueError("metric n must not be NaN")
    if iarr.size and (iarr.min() < 0 or iarr.max() >= t.order):
        raise ValueError("region index out of range")
    if warn:
        # n at the exact endpoint of an unbounded region maps to +-inf;
        # the clamp below saturates it to the far tail instead.
        s_first = t.config.signs[0]
        s_last = t.config.signs[t.order - 1]
        hits = (iarr == 0) & (narr == (0.0 if s_first > 0 else 1.0))
        hits |= (iarr == t.order - 1) & (narr == (1.0 if s_last > 0 else 0.0))
        if np.any(hits):
            warnings.warn(
                "inverse transform evaluated at the endpoint of an unbounded region; "
                "result saturates to the far tail",
                TailSaturationWarning,
                stacklevel=3,
            )
    nc = np.clip(narr, N_EPS, 1.0 - N_EPS)
    signs = np.asarray(t.config.signs)[iarr]
    lo = t.cdf_edges[iarr]
    hi = t.cdf_edges[iarr + 1]
    p = np.where(signs > 0, lo + nc * t.deltas[iarr], hi - nc * t.deltas[iarr])
    # Guard the open-interval requirement of the quantile against rounding.
    tiny = 1e-300
    return np.clip(p, tiny, 1.0 - 1e-16), narr, iarr


def unsoften(n, i, t: SofteningTransform):
    """Invert the i-th transform piece: the y in region i with g_i(y) = n.

    ``n`` values of exactly 0 or 1 on an unbounded edge region would map to
    +-inf; they are clamped to [N_EPS, 1 - N_EPS] first and a
    TailSaturationWarning is emitted.
    """
    p, narr, iarr = _clamped_p(n, i, t, warn=True)
    y = output_quantile(p, t.channel)
    if narr.ndim == 0 and iarr.ndim == 0:
        return float(np.asarray(y).reshape(()))
    return y


def transform_jacobian(n, i, t: SofteningTransform):
    """|g_i'| evaluated at g_i^{-1}(n): f_Y(g_i^{-1}(n)) / dF_i.

    Identical for increasing and decreasing pieces. Strictly positive for
    n inside (0, 1); saturates (with a warning) at the endpoints of
    unbounded regions where the density vanishes.
    """
    p, narr, iarr = _clamped_p(n, i, t, warn=True)
    y = output_quantile(p, t.channel)
    val = output_density(y, t.channel) / t.deltas[np.asarray(iarr)]
    if narr.ndim == 0 and np.asarray(iarr).ndim == 0:
        return float(np.asarray(val).reshape(()))
    return val


def inverse_and_jacobian(n, i, t: SofteningTransform):
    """Fused (g_i^{-1}(n), |g_i'| at that point); one quantile solve.

    Hot-path helper for metric construction; no endpoint warning, silent
    clamping only.
    """
    p, _, iarr = _clamped_p(n, i, t, warn=False)
    y = output_quantile(p, t.channel)
    jac = output_density(y, t.channel) / t.deltas[np.asarray(iarr)]
    return y, jac
