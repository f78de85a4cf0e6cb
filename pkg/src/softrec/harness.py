"""End-to-end experiment orchestration with seeded reproducibility.

Three layers:

* ``run_protocol``: one reconciliation frame exactly as the protocol runs
  it, returning both parties' bits and a transcript holding only what
  crossed the public channel (the softened metric values and the
  syndrome), so leakage audits can work from the transcript alone.
* ``mi_sweep``: per-SNR mutual information curves for the direct, hard,
  and softened reverse schemes, plus the inverse view (SNR required to
  reach fixed MI levels) by monotone cubic interpolation.
* ``ber_sweep``: Monte Carlo coded-BER runs for the three schemes with
  early stopping, Wilson intervals, and per-frame seed substreams derived
  from (master seed, grid point, scheme, config, frame index), making the
  output a pure function of the experiment spec.

CSV emission uses ``repr`` for floats, so identical runs produce identical
bytes.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import logsumexp

from .channel import ChannelModel, transmit
from .constellation import (
    Constellation,
    DecisionRegions,
    bit_partitions,
    decide,
    demap,
    map_decision_regions,
)
from .infotheory import MiResult, mi_direct, mi_hard, mi_rrs, transition_matrix
from .ldpc import LdpcCode, decode, load_code, syndrome
from .metrics import LAPPR_CLAMP, LapprVector, lappr_batch
from .softening import MonotonicityConfig, SofteningTransform, build_transform, soften

__all__ = [
    "SCHEMES",
    "MI_TARGETS",
    "ExperimentSpec",
    "FrameResult",
    "BerPoint",
    "Transcript",
    "ProtocolResult",
    "noise_variance_for_snr_db",
    "run_protocol",
    "mi_sweep",
    "snr_at_mi",
    "ber_sweep",
    "hard_rr_baseline_lapprs",
    "direct_bit_llrs",
    "write_mi_csv",
    "write_snr_at_mi_csv",
    "write_ber_csv",
    "append_run_log",
]

SCHEMES = ("direct", "hard", "rrs")

# Fixed-MI levels used for the inverse (SNR-at-MI) presentation.
MI_TARGETS = (1.75, 1.0, 0.75, 0.3, 0.1, 0.01)


def noise_variance_for_snr_db(snr_db: float, c: Constellation) -> float:
    """Noise variance realizing a given SNR for a constellation.

    SNR is Es/N0 in dB with N0 = 2 sigma^2, i.e.
    sigma^2 = Es / (2 * 10^(SNR/10)). Under this convention the direct
    channel of uniform PAM-4 reaches 1 bit at 2.11 dB.
    """
    es = c.average_power
    return es / (2.0 * 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a sweep needs; immutable and picklable.

    Attributes
    ----------
    constellation : Constellation
    snr_grid_db : tuple of float
        Non-empty, ascending recommended (not enforced).
    schemes : tuple of str
        Subset of {'direct', 'hard', 'rrs'}.
    configs : tuple of MonotonicityConfig
        Monotonicity configs for the rrs scheme; defaults to base and
        alternating for the constellation's order. Strings accepted.
    code : str
        Preset name, alist path, or alist text (BER sweeps only).
    alpha : float
        LAPPR scaling for the rrs decoder input; > 0.
    frames_per_point : int
        Cap on simulated frames per (snr, scheme, config) cell.
    master_seed : int
    workers : int
        Process count for BER frames; 1 = in-process.
    max_iters : int
        Belief-propagation sweep cap per frame.
    stop_bit_errors, stop_frame_errors : int
        Early-stop thresholds: a cell stops once both are reached.
    """

    constellation: Constellation
    snr_grid_db: tuple
    schemes: tuple = SCHEMES
    configs: tuple = ()
    code: str = "hamming74"
    alpha: float = 1.0
    frames_per_point: int = 1
    master_seed: int = 0
    workers: int = 1
    max_iters: int = 100
    stop_bit_errors: int = 100
    stop_frame_errors: int = 20

    def __post_init__(self) -> None:
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid:
            raise ValueError("snr grid must be non-empty")
        object.__setattr__(self, "snr_grid_db", grid)
        schemes = tuple(self.schemes)
        for s in schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; expected subset of {SCHEMES}")
        if not schemes:
            raise ValueError("at least one scheme required")
        object.__setattr__(self, "schemes", schemes)
        m = self.constellation.order
        raw = self.configs or ("base", "alternating")
        configs = tuple(
            c if isinstance(c, MonotonicityConfig) else MonotonicityConfig.from_string(c, m)
            for c in raw
        )
        for c in configs:
            if len(c.signs) != m:
                raise ValueError(f"config {c} does not match constellation order {m}")
        object.__setattr__(self, "configs", configs)
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.frames_per_point < 1:
            raise ValueError("frames_per_point must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class FrameResult:
    """Outcome of a single simulated frame."""

    snr_db: float
    scheme: str
    bit_errors: int
    frame_errors: int
    iterations: int
    converged: bool


@dataclass(frozen=True)
class BerPoint:
    """Aggregate of one (snr, scheme, config) cell of a BER sweep."""

    snr_db: float
    scheme: str
    config: str
    alpha: float
    frames: int
    bit_errors: int
    frame_errors: int
    ber: float
    ber_ci_lo: float
    ber_ci_hi: float
    fer: float
    undersampled: bool


@dataclass(frozen=True)
class Transcript:
    """Exactly what crossed the public channel in one frame: nothing else."""

    n_values: np.ndarray
    syndrome: np.ndarray


@dataclass(frozen=True)
class ProtocolResult:
    """Unpacks as (alice_bits, bob_bits, transcript); decoder detail rides
    along in ``outcome``."""

    alice_bits: np.ndarray
    bob_bits: np.ndarray
    transcript: Transcript
    outcome: object

    def __iter__(self):
        return iter((self.alice_bits, self.bob_bits, self.transcript))


# ---------------------------------------------------------------------------
# Soft-input construction per scheme


def direct_bit_llrs(y, ch: ChannelModel, c: Constellation | None = None) -> np.ndarray:
    """Per-bit channel LLRs log(P(bit=0|y)/P(bit=1|y)) from raw outputs.

    This is the receiver-side soft demapper of the direct scheme: the
    party holding y decodes toward the sender's syndrome.

    Returns
    -------
    ndarray, shape (len(y), L), clamped to +-LAPPR_CLAMP.
    """
    if c is None:
        c = ch.constellation
    ya = np.atleast_1d(np.asarray(y, dtype=float))
    logw = -((ya[:, None] - c.points[None, :]) ** 2) / (2.0 * ch.noise_variance)
    logw += np.log(c.priors)[None, :]
    nbits = c.bits_per_symbol
    out = np.empty((ya.size, nbits))
    for l in range(nbits):
        zeros, ones = bit_partitions(c, l)
        out[:, l] = logsumexp(logw[:, zeros], axis=1) - logsumexp(logw[:, ones], axis=1)
    return np.clip(out, -LAPPR_CLAMP, LAPPR_CLAMP)


def _hard_rr_table(ch: ChannelModel, regions: DecisionRegions, c: Constellation) -> np.ndarray:
    """(M, L) table of DMC bit-LLRs: row x holds the LAPPRs for sent symbol x."""
    t = transition_matrix(ch, regions)
    nbits = c.bits_per_symbol
    out = np.empty((c.order, nbits))
    with np.errstate(divide="ignore"):
        for l in range(nbits):
            zeros, ones = bit_partitions(c, l)
            out[:, l] = np.log(t[:, zeros].sum(axis=1)) - np.log(t[:, ones].sum(axis=1))
    return np.clip(out, -LAPPR_CLAMP, LAPPR_CLAMP)


def hard_rr_baseline_lapprs(
    x: int,
    c: Constellation,
    regions: DecisionRegions,
    ch: ChannelModel,
) -> LapprVector:
    """Soft inputs available to the sender under hard reverse reconciliation.

    Without any disclosed metric the sender only knows the discrete channel
    P(decision | sent = a_x), so every frame slot carrying symbol x gets the
    same per-bit LLR log(P(bit=0|x)/P(bit=1|x)). Magnitudes saturate at the
    clamp as the channel becomes noiseless.
    """
    if not 0 <= x < c.order:
        raise ValueError("symbol index out of range")
    table = _hard_rr_table(ch, regions, c)
    return LapprVector(values=table[x], alpha=1.0)


# ---------------------------------------------------------------------------
# Frame simulation


def _symbols_for(code_n: int, bits_per_symbol: int) -> int:
    return -(-code_n // bits_per_symbol)


def _draw_frame(rng, ch: ChannelModel, count: int):
    c = ch.constellation
    x = rng.choice(c.order, size=count, p=c.priors)
    y = transmit(x, ch, rng)
    return x, y


def _frame_rrs(code, ch, transform, alpha, max_iters, rng):
    c = ch.constellation
    x, y = _draw_frame(rng, ch, _symbols_for(code.n, c.bits_per_symbol))
    n, i = soften(y, transform)
    bob = demap(i, c)[: code.n]
    syn = syndrome(code, bob)
    lap = lappr_batch(n, x, transform, alpha=alpha).reshape(-1)[: code.n]
    out = decode(code, lap, syn, max_iters=max_iters)
    return out, bob, Transcript(n_values=n, syndrome=syn)


def _frame_hard(code, ch, regions, max_iters, rng):
    c = ch.constellation
    x, y = _draw_frame(rng, ch, _symbols_for(code.n, c.bits_per_symbol))
    i = decide(y, regions)
    bob = demap(i, c)[: code.n]
    syn = syndrome(code, bob)
    lap = _hard_rr_table(ch, regions, c)[x].reshape(-1)[: code.n]
    out = decode(code, lap, syn, max_iters=max_iters)
    return out, bob


def _frame_direct(code, ch, max_iters, rng):
    c = ch.constellation
    x, y = _draw_frame(rng, ch, _symbols_for(code.n, c.bits_per_symbol))
    alice = demap(x, c)[: code.n]
    syn = syndrome(code, alice)
    lap = direct_bit_llrs(y, ch, c).reshape(-1)[: code.n]
    out = decode(code, lap, syn, max_iters=max_iters)
    return out, alice


def run_protocol(spec: ExperimentSpec, seed, snr_db: float | None = None, config=None) -> ProtocolResult:
    """Simulate one full softened-reverse frame.

    The sender draws symbols, the channel adds noise, the receiver decides,
    softens, demaps, and computes the syndrome; the sender then builds
    LAPPRs from its own symbols and the disclosed metric and decodes toward
    the receiver's bits. Non-convergence is recorded in the outcome, never
    raised.

    Parameters
    ----------
    spec : ExperimentSpec
    seed : int or numpy seed
    snr_db : float, optional
        Defaults to the first grid point.
    config : MonotonicityConfig or str, optional
        Defaults to the first config of the spec.

    Returns
    -------
    ProtocolResult
        (alice_bits, bob_bits, transcript) plus the decode outcome.
    """
    snr = float(spec.snr_grid_db[0] if snr_db is None else snr_db)
    cfg = spec.configs[0] if config is None else config
    ch = ChannelModel(spec.constellation, noise_variance_for_snr_db(snr, spec.constellation))
    transform = build_transform(ch, cfg)
    code = _cached_code(spec.code)
    rng = np.random.default_rng(seed)
    out, bob, transcript = _frame_rrs(code, ch, transform, spec.alpha, spec.max_iters, rng)
    return ProtocolResult(alice_bits=out.bits, bob_bits=bob, transcript=transcript, outcome=out)


# ---------------------------------------------------------------------------
# MI sweep


def mi_sweep(spec: ExperimentSpec, out_dir: str | Path | None = None, mi_targets=MI_TARGETS):
    """Evaluate MI curves over the SNR grid for the selected schemes.

    Returns the list of MiResult rows in deterministic order (scheme, then
    config, then grid order). When ``out_dir`` is given, writes ``mi.csv``
    and, for grids with at least two points, the inverse table
    ``snr_at_mi.csv``.
    """
    c = spec.constellation
    results: list[MiResult] = []
    for scheme in spec.schemes:
        if scheme == "direct":
            for snr in spec.snr_grid_db:
                ch = ChannelModel(c, noise_variance_for_snr_db(snr, c))
                val, err = mi_direct(ch, with_error=True)
                results.append(MiResult(snr, "direct", "", val, err))
        elif scheme == "hard":
            for snr in spec.snr_grid_db:
                ch = ChannelModel(c, noise_variance_for_snr_db(snr, c))
                results.append(MiResult(snr, "hard", "", mi_hard(ch), 0.0))
        else:
            for cfg in spec.configs:
                for snr in spec.snr_grid_db:
                    ch = ChannelModel(c, noise_variance_for_snr_db(snr, c))
                    transform = build_transform(ch, cfg)
                    val, err = mi_rrs(transform, with_error=True)
                    results.append(MiResult(snr, "rrs", cfg.name, val, err))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_mi_csv(results, out / "mi.csv")
        if len(spec.snr_grid_db) >= 2:
            write_snr_at_mi_csv(snr_at_mi(results, mi_targets), out / "snr_at_mi.csv")
    return results


def snr_at_mi(results: list[MiResult], mi_targets=MI_TARGETS) -> list[dict]:
    """Invert MI curves: the SNR at which each curve reaches each target.

    Uses monotone cubic (PCHIP) interpolation of SNR as a function of MI
    per (scheme, config) curve; cells outside the computed MI range are
    flagged ``out-of-range`` with an empty SNR, curves with fewer than two
    usable points flag ``insufficient-grid``.
    """
    curves: dict[tuple, list[MiResult]] = {}
    order: list[tuple] = []
    for r in results:
        key = (r.scheme, r.config)
        if key not in curves:
            curves[key] = []
            order.append(key)
        curves[key].append(r)
    rows = []
    for key in order:
        pts = sorted(curves[key], key=lambda r: r.snr_db)
        mi = np.array([p.value_bits for p in pts])
        snr = np.array([p.snr_db for p in pts])
        # MI is strictly increasing in SNR; drop any numerically flat tail
        # so the interpolant stays invertible.
        keep = np.concatenate(([True], np.diff(mi) > 0))
        mi, snr = mi[keep], snr[keep]
        interp = PchipInterpolator(mi, snr, extrapolate=False) if mi.size >= 2 else None
        for tgt in mi_targets:
            row = {"mi_bits": float(tgt), "scheme": key[0], "config": key[1]}
            if interp is None:
                row.update(snr_db=None, status="insufficient-grid")
            else:
                v = float(interp(tgt)) if mi[0] <= tgt <= mi[-1] else float("nan")
                if np.isnan(v):
                    row.update(snr_db=None, status="out-of-range")
                else:
                    row.update(snr_db=v, status="ok")
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# BER sweep

_SCHEME_INDEX = {s: k for k, s in enumerate(SCHEMES)}
_BATCH = 16  # stop-rule evaluation granularity, fixed so results do not depend on workers

_CODE_CACHE: dict[str, LdpcCode] = {}


def _cached_code(source: str) -> LdpcCode:
    code = _CODE_CACHE.get(source)
    if code is None:
        code = load_code(source)
        _CODE_CACHE[source] = code
    return code


def _ber_frame(task) -> FrameResult:
    (code_src, c, snr, scheme, cfg_signs, alpha, max_iters, master, point, cfg_idx, frame) = task
    code = _cached_code(code_src)
    ch = ChannelModel(c, noise_variance_for_snr_db(snr, c))
    seed = np.random.SeedSequence(
        master, spawn_key=(point, _SCHEME_INDEX[scheme], cfg_idx, frame)
    )
    rng = np.random.default_rng(seed)
    if scheme == "rrs":
        transform = build_transform(ch, MonotonicityConfig(cfg_signs))
        out, target, _ = _frame_rrs(code, ch, transform, alpha, max_iters, rng)
    elif scheme == "hard":
        regions = map_decision_regions(c, ch.noise_variance)
        out, target = _frame_hard(code, ch, regions, max_iters, rng)
    else:
        out, target = _frame_direct(code, ch, max_iters, rng)
    nerr = int(np.count_nonzero(out.bits != target))
    return FrameResult(
        snr_db=snr,
        scheme=scheme,
        bit_errors=nerr,
        frame_errors=int(nerr > 0),
        iterations=out.iterations_used,
        converged=out.converged,
    )


def _wilson(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    ph = k / n
    z2 = z * z
    den = 1.0 + z2 / n
    center = (ph + z2 / (2.0 * n)) / den
    half = z * float(np.sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n))) / den
    # rounding in sqrt can leave the k=0 (k=n) bound a hair off its exact
    # value of 0 (1); the interval must always contain the point estimate
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


def ber_sweep(
    spec: ExperimentSpec,
    out_dir: str | Path | None = None,
    log_path: str | Path | None = None,
) -> list[BerPoint]:
    """Monte Carlo coded-BER estimation over the grid and schemes.

    Per (snr, scheme, config) cell, frames are simulated in fixed-size
    batches until either ``frames_per_point`` is reached or both early-stop
    thresholds (bit and frame errors) are met; cells that never meet them
    are flagged ``undersampled``. Every frame draws its generator from
    (master seed, point index, scheme, config, frame index), so the result
    is independent of batching and worker count.
    """
    code = _cached_code(spec.code)
    cells = []
    for point, snr in enumerate(spec.snr_grid_db):
        for scheme in spec.schemes:
            if scheme == "rrs":
                for cfg_idx, cfg in enumerate(spec.configs):
                    cells.append((point, snr, scheme, cfg_idx, cfg))
            else:
                cells.append((point, snr, scheme, 0, None))

    points: list[BerPoint] = []
    pool = ProcessPoolExecutor(max_workers=spec.workers) if spec.workers > 1 else None
    try:
        for point, snr, scheme, cfg_idx, cfg in cells:
            signs = cfg.signs if cfg is not None else None
            bit_err = frame_err = frames = iters = 0
            while frames < spec.frames_per_point:
                batch = min(_BATCH, spec.frames_per_point - frames)
                tasks = [
                    (
                        spec.code,
                        spec.constellation,
                        snr,
                        scheme,
                        signs,
                        spec.alpha,
                        spec.max_iters,
                        spec.master_seed,
                        point,
                        cfg_idx,
                        frames + b,
                    )
                    for b in range(batch)
                ]
                if pool is not None:
                    outs = list(pool.map(_ber_frame, tasks))
                else:
                    outs = [_ber_frame(t) for t in tasks]
                for fr in outs:
                    bit_err += fr.bit_errors
                    frame_err += fr.frame_errors
                    iters += fr.iterations
                frames += batch
                if bit_err >= spec.stop_bit_errors and frame_err >= spec.stop_frame_errors:
                    break
            nbits = frames * code.n
            lo, hi = _wilson(bit_err, nbits)
            pt = BerPoint(
                snr_db=snr,
                scheme=scheme,
                config=cfg.name if cfg is not None else "",
                alpha=spec.alpha if scheme == "rrs" else 1.0,
                frames=frames,
                bit_errors=bit_err,
                frame_errors=frame_err,
                ber=bit_err / nbits,
                ber_ci_lo=lo,
                ber_ci_hi=hi,
                fer=frame_err / frames,
                undersampled=not (
                    bit_err >= spec.stop_bit_errors and frame_err >= spec.stop_frame_errors
                ),
            )
            points.append(pt)
            if log_path is not None:
                append_run_log(
                    log_path,
                    {
                        "event": "ber-point",
                        "snr_db": snr,
                        "scheme": scheme,
                        "config": pt.config,
                        "frames": frames,
                        "bit_errors": bit_err,
                        "frame_errors": frame_err,
                        "ber": pt.ber,
                        "mean_iterations": iters / frames,
                        "undersampled": pt.undersampled,
                    },
                )
    finally:
        if pool is not None:
            pool.shutdown()
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_ber_csv(points, out / "ber.csv")
    return points


# ---------------------------------------------------------------------------
# Serialization


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_mi_csv(results: list[MiResult], path) -> None:
    _write_rows(
        path,
        ["snr_db", "scheme", "config", "mi_bits", "err_est"],
        [(r.snr_db, r.scheme, r.config, r.value_bits, r.error_estimate) for r in results],
    )


def write_snr_at_mi_csv(rows: list[dict], path) -> None:
    _write_rows(
        path,
        ["mi_bits", "scheme", "config", "snr_db", "status"],
        [(r["mi_bits"], r["scheme"], r["config"], r["snr_db"], r["status"]) for r in rows],
    )


def write_ber_csv(points: list[BerPoint], path) -> None:
    _write_rows(
        path,
        [
            "snr_db",
            "scheme",
            "config",
            "alpha",
            "frames",
            "bit_errors",
            "ber",
            "ber_ci_lo",
            "ber_ci_hi",
            "fer",
        ],
        [
            (
                p.snr_db,
                p.scheme,
                p.config,
                p.alpha,
                p.frames,
                p.bit_errors,
                p.ber,
                p.ber_ci_lo,
                p.ber_ci_hi,
                p.fer,
            )
            for p in points
        ],
    )


def append_run_log(path, record: dict) -> None:
    """Append one JSON object as a line to the run log."""
    with open(path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True, default=str) + "\n")
