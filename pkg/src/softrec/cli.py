"""Command-line surface binding the library into reproducible runs.

Subcommands
-----------
mi-sweep
    MI curves over an SNR grid for the selected schemes and configs, with
    the inverse SNR-at-MI table. Writes mi.csv / snr_at_mi.csv.
ber-sweep
    Monte Carlo coded-BER runs. Writes ber.csv.
audit
    Disclosure audit over a grid: analytic leakage, Monte-Carlo mutual
    information between the disclosed metric and the receiver's decisions
    estimated from simulated transcripts, and per-decision KS uniformity
    tests. Exits 1 when any check breaches its threshold.
reconcile
    Single-frame protocol demo; prints the public transcript as JSON.
codegen
    Emit a built-in parity-check matrix in alist form.

Configuration precedence: explicit flags > config file (YAML, unknown keys
rejected) > built-in defaults. The default output directory comes from
$SOFTREC_OUTDIR, falling back to the working directory. Every subcommand
echoes its fully resolved configuration (defaults and seed included) to the
JSON-lines run log in the output directory before computing anything.

Exit codes: 0 success, 1 audit/check failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml
from scipy.stats import kstest

from .channel import ChannelModel, transmit
from .constellation import pam
from .harness import (
    MI_TARGETS,
    SCHEMES,
    ExperimentSpec,
    append_run_log,
    ber_sweep,
    mi_sweep,
    noise_variance_for_snr_db,
    run_protocol,
)
from .infotheory import leakage
from .ldpc import PRESETS, load_code, to_alist
from .softening import MonotonicityConfig, build_transform, enumerate_configs, soften

log = logging.getLogger("softrec")

# Audit thresholds.
ANALYTIC_LEAKAGE_MAX = 1e-6
MC_LEAKAGE_MAX = 1e-3
KS_LEVEL = 0.01
MC_BINS = 20

# Test seam: when set, the audit builds its transforms through this callable
# (signature: (channel, config) -> SofteningTransform) instead of
# build_transform. Lets a harness inject a deliberately broken transform and
# assert the audit catches it.
_AUDIT_TRANSFORM_HOOK = None


class UsageError(Exception):
    """Validation problem that maps to exit code 2."""


# ---------------------------------------------------------------------------
# Flag/file/default resolution

_COMMON_KEYS = {"constellation", "snr", "out", "seed", "log_level"}
_COMMAND_KEYS = {
    "mi-sweep": _COMMON_KEYS | {"schemes", "configs", "mi_targets"},
    "ber-sweep": _COMMON_KEYS
    | {"schemes", "configs", "code", "alpha", "frames", "workers", "max_iters"},
    "audit": _COMMON_KEYS | {"configs", "samples_per_decision"},
    "reconcile": _COMMON_KEYS | {"config", "code", "alpha", "max_iters"},
    "codegen": {"code", "out", "log_level"},
}

_DEFAULTS = {
    "constellation": "pam4",
    "snr": None,
    "out": None,
    "seed": 0,
    "log_level": "info",
    "schemes": "direct,hard,rrs",
    "configs": "base,alternating",
    "config": "base",
    "mi_targets": ",".join(str(t) for t in MI_TARGETS),
    "code": "hamming74",
    "alpha": 1.0,
    "frames": 100,
    "workers": 1,
    "max_iters": 100,
    "samples_per_decision": 100000,
}


def _resolve(args: argparse.Namespace, command: str) -> dict:
    """Merge CLI flags over config-file values over defaults."""
    allowed = _COMMAND_KEYS[command]
    from_file: dict = {}
    if getattr(args, "config_file", None):
        path = Path(args.config_file)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        loaded = yaml.safe_load(path.read_text()) or {}
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a mapping")
        unknown = sorted(set(loaded) - allowed)
        if unknown:
            raise UsageError(
                f"unknown config keys for {command}: {', '.join(unknown)}"
            )
        from_file = loaded
    resolved = {}
    for key in sorted(allowed):
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in from_file:
            resolved[key] = from_file[key]
        else:
            resolved[key] = _DEFAULTS[key]
    return resolved


def _parse_snr(text) -> tuple:
    """Grid syntax: 'start:stop:step' (inclusive), 'a,b,c', or a single value."""
    if text is None:
        raise UsageError("--snr is required")
    if isinstance(text, (int, float)):
        return (float(text),)
    s = str(text).strip()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise UsageError(f"bad snr range {s!r}; expected start:stop:step")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise UsageError(f"bad snr range {s!r}") from None
        if step <= 0:
            raise UsageError("snr step must be > 0")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise UsageError(f"empty snr grid {s!r}")
        return tuple(float(start + k * step) for k in range(count))
    try:
        vals = tuple(float(p) for p in s.split(",") if p.strip())
    except ValueError:
        raise UsageError(f"bad snr list {s!r}") from None
    if not vals:
        raise UsageError("empty snr grid")
    return vals


def _parse_constellation(text: str):
    s = str(text).strip().lower()
    if not s.startswith("pam"):
        raise UsageError(f"unknown constellation {s!r}; expected pamM (e.g. pam4)")
    try:
        order = int(s[3:])
    except ValueError:
        raise UsageError(f"unknown constellation {s!r}") from None
    try:
        return pam(order)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _parse_configs(text, order: int) -> tuple:
    s = str(text).strip()
    if s.lower() == "all":
        return tuple(enumerate_configs(order))
    items = [p.strip() for p in s.split(",") if p.strip()]
    if not items:
        raise UsageError("empty config list")
    try:
        return tuple(MonotonicityConfig.from_string(p, order) for p in items)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _parse_schemes(text) -> tuple:
    alias = {"hard-rr": "hard", "rr": "hard", "dr": "direct"}
    items = [alias.get(p.strip().lower(), p.strip().lower()) for p in str(text).split(",") if p.strip()]
    for s in items:
        if s not in SCHEMES:
            raise UsageError(f"unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
    if not items:
        raise UsageError("empty scheme list")
    return tuple(dict.fromkeys(items))


def _out_dir(resolved: dict) -> Path:
    out = resolved.get("out") or os.environ.get("SOFTREC_OUTDIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _echo_config(command: str, resolved: dict, out: Path) -> Path:
    log_path = out / "run_log.jsonl"
    append_run_log(log_path, {"event": "config", "command": command, **resolved})
    return log_path


def _setup_logging(resolved: dict) -> None:
    level = getattr(logging, str(resolved.get("log_level", "info")).upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_mi_sweep(args) -> int:
    resolved = _resolve(args, "mi-sweep")
    _setup_logging(resolved)
    c = _parse_constellation(resolved["constellation"])
    spec = ExperimentSpec(
        constellation=c,
        snr_grid_db=_parse_snr(resolved["snr"]),
        schemes=_parse_schemes(resolved["schemes"]),
        configs=_parse_configs(resolved["configs"], c.order),
        master_seed=int(resolved["seed"]),
    )
    targets = tuple(float(t) for t in str(resolved["mi_targets"]).split(",") if t.strip())
    out = _out_dir(resolved)
    _echo_config("mi-sweep", resolved, out)
    log.info("mi-sweep: %d grid points, schemes %s", len(spec.snr_grid_db), spec.schemes)
    mi_sweep(spec, out_dir=out, mi_targets=targets)
    return 0


def _cmd_ber_sweep(args) -> int:
    resolved = _resolve(args, "ber-sweep")
    _setup_logging(resolved)
    c = _parse_constellation(resolved["constellation"])
    code_src = str(resolved["code"])
    try:
        load_code(code_src)
    except ValueError as e:
        raise UsageError(str(e)) from None
    frames = int(resolved["frames"])
    if frames < 1:
        raise UsageError("frames must be >= 1")
    spec = ExperimentSpec(
        constellation=c,
        snr_grid_db=_parse_snr(resolved["snr"]),
        schemes=_parse_schemes(resolved["schemes"]),
        configs=_parse_configs(resolved["configs"], c.order),
        code=code_src,
        alpha=float(resolved["alpha"]),
        frames_per_point=frames,
        master_seed=int(resolved["seed"]),
        workers=int(resolved["workers"]),
        max_iters=int(resolved["max_iters"]),
    )
    out = _out_dir(resolved)
    log_path = _echo_config("ber-sweep", resolved, out)
    log.info(
        "ber-sweep: %d points x %d schemes, <=%d frames each",
        len(spec.snr_grid_db),
        len(spec.schemes),
        frames,
    )
    ber_sweep(spec, out_dir=out, log_path=log_path)
    return 0


def _audit_cell(ch, transform, rng, samples_per_decision: int):
    """One (snr, config) audit cell: returns (analytic, mc, min KS p-value)."""
    analytic = leakage(transform)
    order = ch.constellation.order
    counts = np.zeros(order, dtype=np.int64)
    chunks_n: list = []
    chunks_d: list = []
    # Draw until every decision has its quota; chunk size targets the
    # rarest decision, so a couple of rounds normally suffice.
    min_delta = float(np.min(transform.deltas))
    while counts.min() < samples_per_decision:
        need = samples_per_decision - int(counts.min())
        size = min(4_000_000, max(50_000, int(1.3 * need / min_delta)))
        x = rng.choice(order, size=size, p=ch.constellation.priors)
        y = transmit(x, ch, rng)
        n, d = soften(y, transform)
        chunks_n.append(n)
        chunks_d.append(d)
        counts += np.bincount(d, minlength=order)
    n = np.concatenate(chunks_n)
    d = np.concatenate(chunks_d)

    # Plug-in MI of the (decision, binned metric) joint with the
    # Miller-Madow correction; zero leakage shows up at the sampling floor.
    joint, _, _ = np.histogram2d(
        d, n, bins=[order, MC_BINS], range=[[-0.5, order - 0.5], [0.0, 1.0]]
    )
    total = joint.sum()
    pj = joint / total
    pr = pj.sum(axis=1, keepdims=True)
    pc = pj.sum(axis=0, keepdims=True)
    mask = pj > 0
    mc = float(np.sum(pj[mask] * np.log2(pj[mask] / (pr @ pc)[mask])))
    k_j = int(np.count_nonzero(pj))
    k_r = int(np.count_nonzero(pr))
    k_c = int(np.count_nonzero(pc))
    mc -= (k_j - k_r - k_c + 1) / (2.0 * total * np.log(2.0))

    ks_min = 1.0
    for i in range(order):
        p = kstest(n[d == i], "uniform").pvalue
        ks_min = min(ks_min, float(p))
    return analytic, mc, ks_min


def _cmd_audit(args) -> int:
    resolved = _resolve(args, "audit")
    _setup_logging(resolved)
    c = _parse_constellation(resolved["constellation"])
    grid = _parse_snr(resolved["snr"])
    configs = _parse_configs(resolved["configs"], c.order)
    samples = int(resolved["samples_per_decision"])
    if samples < 1:
        raise UsageError("samples_per_decision must be >= 1")
    out = _out_dir(resolved)
    log_path = _echo_config("audit", resolved, out)
    seed = int(resolved["seed"])
    failures = []
    for cell, (snr, cfg) in enumerate(
        (s, cf) for s in grid for cf in configs
    ):
        ch = ChannelModel(c, noise_variance_for_snr_db(snr, c))
        build = _AUDIT_TRANSFORM_HOOK or build_transform
        transform = build(ch, cfg)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(cell,)))
        analytic, mc, ks_min = _audit_cell(ch, transform, rng, samples)
        ok = (
            abs(analytic) <= ANALYTIC_LEAKAGE_MAX
            and abs(mc) <= MC_LEAKAGE_MAX
            and ks_min >= KS_LEVEL
        )
        record = {
            "event": "audit-cell",
            "snr_db": snr,
            "config": cfg.name,
            "analytic_bits": analytic,
            "mc_bits": mc,
            "ks_min_pvalue": ks_min,
            "pass": ok,
        }
        append_run_log(log_path, record)
        line = (
            f"audit snr={snr:+.2f} config={cfg.name}: "
            f"analytic={analytic:.3e} mc={mc:.3e} ks_p={ks_min:.4f} "
            f"{'ok' if ok else 'FAIL'}"
        )
        print(line)
        if not ok:
            failures.append((snr, cfg.name))
    if failures:
        print("failed cells: " + "; ".join(f"({s} dB, {n})" for s, n in failures), file=sys.stderr)
        return 1
    return 0


def _cmd_reconcile(args) -> int:
    resolved = _resolve(args, "reconcile")
    _setup_logging(resolved)
    c = _parse_constellation(resolved["constellation"])
    snr = _parse_snr(resolved["snr"] if resolved["snr"] is not None else 3.0)
    cfg = _parse_configs(resolved["config"], c.order)[0]
    try:
        load_code(str(resolved["code"]))
    except ValueError as e:
        raise UsageError(str(e)) from None
    spec = ExperimentSpec(
        constellation=c,
        snr_grid_db=snr,
        configs=(cfg,),
        code=str(resolved["code"]),
        alpha=float(resolved["alpha"]),
        master_seed=int(resolved["seed"]),
        max_iters=int(resolved["max_iters"]),
    )
    out = _out_dir(resolved)
    _echo_config("reconcile", resolved, out)
    result = run_protocol(spec, spec.master_seed)
    res = {
        "snr_db": snr[0],
        "config": cfg.name,
        "transcript": {
            "n_values": [float(v) for v in result.transcript.n_values],
            "syndrome": [int(b) for b in result.transcript.syndrome],
        },
        "converged": bool(result.outcome.converged),
        "iterations": int(result.outcome.iterations_used),
        "residual_bit_errors": int(np.count_nonzero(result.alice_bits != result.bob_bits)),
    }
    print(json.dumps(res))
    return 0


def _cmd_codegen(args) -> int:
    resolved = _resolve(args, "codegen")
    _setup_logging(resolved)
    name = str(resolved["code"])
    try:
        code = load_code(name)
    except ValueError as e:
        raise UsageError(str(e)) from None
    text = to_alist(code)
    if resolved["out"]:
        path = Path(resolved["out"])
        if path.is_dir():
            path = path / f"{name}.alist"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softrec",
        description="Softened reverse reconciliation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, code=False, schemes=False, configs=False, single_config=False):
        p.add_argument("--config-file", help="YAML config file (flags win)")
        p.add_argument("--constellation", help="pamM, default pam4")
        p.add_argument("--snr", help="grid start:stop:step, comma list, or single dB value")
        p.add_argument("--out", help="output directory (default $SOFTREC_OUTDIR or .)")
        p.add_argument("--seed", type=int, help="master seed, default 0")
        p.add_argument("--log-level", dest="log_level", help="debug/info/warning")
        if schemes:
            p.add_argument("--schemes", help="comma list from direct,hard,rrs")
        if configs:
            p.add_argument("--configs", help="comma list of base/alternating/sign strings, or 'all'")
        if single_config:
            p.add_argument("--config", help="one config: base/alternating/sign string")
        if code:
            p.add_argument("--code", help="code preset or alist path")

    p = sub.add_parser("mi-sweep", help="mutual information curves and SNR-at-MI table")
    common(p, schemes=True, configs=True)
    p.add_argument("--mi-targets", dest="mi_targets", help="comma list of MI levels")
    p.set_defaults(func=_cmd_mi_sweep)

    p = sub.add_parser("ber-sweep", help="Monte Carlo coded-BER runs")
    common(p, code=True, schemes=True, configs=True)
    p.add_argument("--alpha", type=float, help="LAPPR scaling for rrs, default 1.0")
    p.add_argument("--frames", type=int, help="max frames per point")
    p.add_argument("--workers", type=int, help="process count")
    p.add_argument("--max-iters", dest="max_iters", type=int, help="BP sweep cap")
    p.set_defaults(func=_cmd_ber_sweep)

    p = sub.add_parser("audit", help="disclosure audit: leakage + uniformity checks")
    common(p, configs=True)
    p.add_argument(
        "--samples-per-decision",
        dest="samples_per_decision",
        type=int,
        help="Monte Carlo sample quota per decision, default 100000",
    )
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("reconcile", help="single-frame protocol demo")
    common(p, code=True, single_config=True)
    p.add_argument("--alpha", type=float, help="LAPPR scaling, default 1.0")
    p.add_argument("--max-iters", dest="max_iters", type=int, help="BP sweep cap")
    p.set_defaults(func=_cmd_reconcile)

    p = sub.add_parser("codegen", help="emit a built-in parity-check matrix as alist")
    p.add_argument("--config-file", help="YAML config file (flags win)")
    p.add_argument("--code", help="preset name, default dvbs2-r12-64800")
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--log-level", dest="log_level", help="debug/info/warning")
    p.set_defaults(func=_cmd_codegen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "codegen" and getattr(args, "code", None) is None:
        args.code = "dvbs2-r12-64800"
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
