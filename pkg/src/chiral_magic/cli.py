"""Command line front end: ``chiral-magic <subcommand> ...``.

Exit codes: 0 success, 1 internal inconsistency, 2 invalid input, 3 certificate
verdict false.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .exactnum import PiPoly, rat_to_str
from .model import InconsistentPotentialError, Potential, canonical_potential

log = logging.getLogger("chiral_magic")

CACHE_ENV = "CHIRAL_MAGIC_CACHE"
EXIT_OK, EXIT_INTERNAL, EXIT_INVALID, EXIT_VERDICT = 0, 1, 2, 3


class UsageError(Exception):
    """Invalid user input; reported on stderr with exit code 2."""


# --------------------------------------------------------------------------
# Cache
# --------------------------------------------------------------------------


class TraceCache:
    """One JSON file per (potential digest, ell) holding a result envelope."""

    def __init__(self, root: Optional[Path]):
        self.root = Path(root) if root else None

    def _path(self, digest: str, ell: int) -> Path:
        return self.root / "traces" / digest / f"{ell}.json"

    def lookup(self, digest: str, ell: int):
        if self.root is None:
            return None
        path = self._path(digest, ell)
        if not path.exists():
            return None
        try:
            env = json.loads(path.read_text())
            if env["potential_digest"] != digest or int(env["payload"]["ell"]) != ell:
                raise ValueError("key mismatch")
            return PiPoly.from_json(env["payload"]["sigma"]), env["payload"]["engine"]
        except (OSError, ValueError, KeyError, TypeError, ZeroDivisionError) as exc:
            log.warning("ignoring corrupted cache entry %s (%s)", path, exc)
            return None

    def store(self, digest: str, ell: int, value: PiPoly, engine: str) -> None:
        if self.root is None:
            return
        path = self._path(digest, ell)
        env = {
            "tool": "chiral-magic",
            "version": __version__,
            "potential_digest": digest,
            "payload": {"ell": ell, "sigma": value.to_json(), "engine": engine},
        }
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(env, sort_keys=True))
            os.replace(tmp, path)
        except OSError as exc:
            log.warning("cache disabled after write failure (%s)", exc)
            self.root = None


def cache_lookup(cache_dir, digest: str, ell: int) -> Optional[PiPoly]:
    hit = TraceCache(cache_dir).lookup(digest, ell)
    return hit[0] if hit else None


def cache_store(cache_dir, digest: str, ell: int, value: PiPoly, engine: str = "residue") -> None:
    TraceCache(cache_dir).store(digest, ell, value, engine)


# --------------------------------------------------------------------------
# Helpers
# --------------------------------------------------------------------------


def _load_potential(path: Optional[str]) -> Potential:
    if path is None:
        return canonical_potential()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read potential file {path}: {exc}") from exc
    try:
        pot = Potential.from_json(data)
    except InconsistentPotentialError as exc:
        raise UsageError(str(exc)) from exc
    except (ValueError, KeyError, TypeError, ZeroDivisionError) as exc:
        raise UsageError(f"malformed potential file {path}: {exc}") from exc
    if len(pot) == 0:
        raise UsageError("potential has no nonzero modes")
    return pot


def _cache_dir(args) -> Optional[Path]:
    if args.no_cache:
        return None
    if args.cache:
        return Path(args.cache)
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "chiral-magic"


def _envelope(args, pot: Potential, payload, started: float, exact: bool, numeric: Optional[dict] = None) -> dict:
    env = {
        "tool": "chiral-magic",
        "version": __version__,
        "potential_digest": pot.digest(),
        "potential": pot.to_json(),
        "command": [args.command] + list(args.argv_echo),
        "timing": {"seconds": round(time.perf_counter() - started, 3)} if args.timing else None,
        "exact": exact,
        "payload": payload,
    }
    if numeric is not None:
        env["truncation"] = numeric
    return env


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _q_string(v: PiPoly) -> str:
    c = v.coeff(1)
    return rat_to_str(c) if not hasattr(c, "to_json") else json.dumps(c.to_json())


def _trace_table(pot: Potential, ells, args):
    from .traces import bundled_table, compute_table

    table = None
    if getattr(args, "bundled", True):
        base = bundled_table(pot)
        if base is not None:
            from .traces import TraceTable

            table = TraceTable(base.potential_hash)
            for ell in ells:
                if ell in base.entries:
                    table.add(ell, base.entries[ell], "bundled")
    return compute_table(
        pot, ells, jobs=args.jobs, backend=getattr(args, "backend", "auto"),
        cache=TraceCache(_cache_dir(args)), table=table,
    )


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_traces(args) -> int:
    from .traces import trace_oracle_walks

    if args.ell_min < 2 or args.ell_max < args.ell_min:
        raise UsageError("need 2 <= ell-min <= ell-max")
    started = time.perf_counter()
    pot = _load_potential(args.potential)
    ells = range(args.ell_min, args.ell_max + 1)
    args.bundled = False
    table = _trace_table(pot, ells, args)
    rows = []
    for ell in ells:
        v = table.sigma(ell)
        src = sorted(table.provenance[ell])
        row = {"ell": ell, "q": _q_string(v), "tau": str(v), "engine": src[0]}
        if args.oracle_check and ell <= 4:
            if trace_oracle_walks(pot, ell) != v:
                log.error("oracle disagrees with the residue engine at ell=%d", ell)
                return EXIT_INTERNAL
            row["oracle"] = "agree"
        rows.append(row)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        _emit(buf.getvalue(), args.out)
    else:
        _emit(json.dumps(_envelope(args, pot, rows, started, True), indent=2), args.out)
    return EXIT_OK


def cmd_certify(args) -> int:
    from .fredholm import Certificate, certify_first_magic, hs_norm_certified, recheck_certificate

    started = time.perf_counter()
    if args.recheck:
        try:
            data = json.loads(Path(args.recheck).read_text())
            cert = Certificate.from_json(data.get("payload", data))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read certificate {args.recheck}: {exc}") from exc
        ok, problems = recheck_certificate(cert)
        for p in problems:
            log.error("recheck: %s", p)
        sys.stdout.write(json.dumps({"recheck": args.recheck, "verdict": ok, "problems": problems}, indent=2) + "\n")
        return EXIT_OK if ok else EXIT_VERDICT
    pot = _load_potential(args.potential)
    if pot.digest() != canonical_potential().digest():
        raise UsageError("the certificate constants are specific to the canonical potential")
    if args.tail_N > min(args.taylor_n, args.g_order) + 1:
        raise UsageError("--tail-N must not exceed min(--taylor-n, --g-order) + 1")
    top = max(args.taylor_n, args.g_order)
    table = _trace_table(pot, range(2, top + 1), args)
    hs = hs_norm_certified(args.window_M, args.hs_mode)
    cert = certify_first_magic(table, hs, taylor_n=args.taylor_n, tail_N=args.tail_N, g_order=args.g_order)
    payload = cert.to_json()
    payload["hs_report"] = hs.to_json()
    text = json.dumps(_envelope(args, pot, payload, started, True), indent=2)
    if args.report:
        Path(args.report).write_text(text)
    summary = {
        "verdict": cert.verdict,
        "interval": [rat_to_str(cert.interval[0]), rat_to_str(cert.interval[1])],
        "failures": cert.failures,
        "inequalities": payload["inequalities"],
    }
    sys.stdout.write(json.dumps(summary if args.report else json.loads(text), indent=2) + "\n")
    for name in cert.failures:
        log.warning("inequality %s fails", name)
    return EXIT_OK if cert.verdict else EXIT_VERDICT


def cmd_magic(args) -> int:
    from .spectra import magic_angles

    started = time.perf_counter()
    pot = _load_potential(args.potential)
    if args.trace_order < 2 * args.count:
        raise UsageError("--trace-order must be at least 2 * --count")
    exact_top = min(args.trace_order, args.exact_order)
    table = _trace_table(pot, range(2, exact_top + 1), args)
    ms = magic_angles(
        table, args.count, args.trace_order, potential=pot, M=args.truncation, filtered=not args.unfiltered
    )
    alphas = list(zip(ms.alphas, ms.multiplicities, ms.error_estimates))
    if not args.complex:
        alphas = [t for t in alphas if abs(t[0].imag) < 1e-9]
    alphas = alphas[: args.count] if args.count else alphas
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re_alpha", "im_alpha", "multiplicity"])
        for a, m, _ in alphas:
            w.writerow([repr(a.real), repr(a.imag), m])
        _emit(buf.getvalue(), args.out)
    else:
        payload = {
            "trace_order": ms.trace_order,
            "exact_orders": exact_top,
            "alphas": [{"re": a.real, "im": a.imag, "multiplicity": m, "error_estimate": e} for a, m, e in alphas],
        }
        numeric = {"M": args.truncation} if args.trace_order > exact_top else None
        _emit(json.dumps(_envelope(args, pot, payload, started, False, numeric), indent=2), args.out)
    return EXIT_OK


def _default_alpha(args, pot) -> float:
    if args.alpha is not None:
        return args.alpha
    from .spectra import refine_first_magic

    return refine_first_magic(_trace_table(pot, range(2, 21), args), 20)


def cmd_flatband(args) -> int:
    from .spectra import flat_band_check

    started = time.perf_counter()
    pot = _load_potential(args.potential)
    alpha = _default_alpha(args, pot)
    res = flat_band_check(alpha, args.grid, args.truncation, pot)
    payload = {
        "alpha": alpha,
        "max_min_singular": res["max_min_singular"],
        "per_k": [{"k1": a, "k2": b, "s1": s} for a, b, s in res["per_k"]],
    }
    _emit(json.dumps(_envelope(args, pot, payload, started, False, {"M": args.truncation, "grid": args.grid}), indent=2), args.out)
    return EXIT_OK


def cmd_bands(args) -> int:
    from .spectra import band_profile

    started = time.perf_counter()
    pot = _load_potential(args.potential)
    alpha = _default_alpha(args, pot)
    prof = band_profile(alpha, args.grid, args.num, args.truncation, pot)
    if args.format == "json":
        payload = {"alpha": alpha, "bands": [{"k1": a, "k2": b, "s": s} for a, b, s in prof]}
        _emit(json.dumps(_envelope(args, pot, payload, started, False, {"M": args.truncation, "grid": args.grid}), indent=2), args.out)
        return EXIT_OK
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k1", "k2"] + [f"s{j + 1}" for j in range(args.num)])
    for a, b, s in prof:
        w.writerow([repr(a), repr(b)] + [repr(v) for v in s])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _positive(x: str) -> int:
    v = int(x)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--potential", metavar="FILE", help="potential JSON file (default: canonical)")
    common.add_argument("--cache", metavar="DIR", help=f"trace cache directory (env {CACHE_ENV})")
    common.add_argument("--no-cache", action="store_true", help="disable the trace cache")
    common.add_argument("--jobs", type=_positive, default=1, help="worker processes for exact traces")
    common.add_argument("--out", metavar="FILE", help="write output to FILE instead of stdout")
    common.add_argument("--timing", action="store_true", help="record wall time in the envelope")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="chiral-magic", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("traces", parents=[common], help="exact traces q_l with sigma_l = q_l pi/sqrt(3)")
    p.add_argument("--ell-min", type=int, default=2)
    p.add_argument("--ell-max", type=int, default=8)
    p.add_argument("--oracle-check", action="store_true", help="compare with per-walk residues for l <= 4")
    p.add_argument("--backend", choices=["auto", "rational", "modular"], default="auto")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_traces)

    p = sub.add_parser("certify", parents=[common], help="certificate for the first real magic angle")
    p.add_argument("--window-M", type=_positive, default=760)
    p.add_argument("--taylor-n", type=int, default=20)
    p.add_argument("--tail-N", type=int, default=21)
    p.add_argument("--g-order", type=int, default=20)
    p.add_argument("--hs-mode", choices=["dyadic", "exact"], default="dyadic")
    p.add_argument("--report", metavar="FILE", help="write the full certificate to FILE")
    p.add_argument("--recheck", metavar="FILE", help="re-verify a stored certificate with rational arithmetic")
    p.add_argument("--no-bundled", dest="bundled", action="store_false", help="recompute shipped traces")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("magic", parents=[common], help="magic angles from the det_2 Taylor polynomial")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--trace-order", type=int, default=16)
    p.add_argument("--exact-order", type=int, default=24, help="highest order taken from exact traces")
    p.add_argument("--truncation", type=_positive, default=80, help="window radius for numeric traces")
    p.add_argument("--complex", action="store_true", help="include non-real alphas")
    p.add_argument("--unfiltered", action="store_true", help="keep roots outside the reliable disc")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--no-bundled", dest="bundled", action="store_false")
    p.set_defaults(func=cmd_magic)

    p = sub.add_parser("flatband", parents=[common], help="flat-band test via smallest singular values")
    p.add_argument("--alpha", type=float, default=None, help="default: refined first magic alpha")
    p.add_argument("--grid", type=int, default=5)
    p.add_argument("--truncation", type=int, default=30)
    p.add_argument("--no-bundled", dest="bundled", action="store_false")
    p.set_defaults(func=cmd_flatband)

    p = sub.add_parser("bands", parents=[common], help="lowest singular values on a momentum grid")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--grid", type=int, default=5)
    p.add_argument("--num", type=_positive, default=5)
    p.add_argument("--truncation", type=int, default=30)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--no-bundled", dest="bundled", action="store_false")
    p.set_defaults(func=cmd_bands)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    args.argv_echo = argv[1:] if argv else []
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="chiral-magic: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command in ("flatband", "bands") and (args.grid < 2 or args.truncation < 8):
        sys.stderr.write("chiral-magic: error: need --grid >= 2 and --truncation >= 8\n")
        return EXIT_INVALID
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"chiral-magic: error: {exc}\n")
        return EXIT_INVALID
    except Exception as exc:  # never show a traceback to the user
        log.debug("unhandled error", exc_info=True)
        sys.stderr.write(f"chiral-magic: internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())
