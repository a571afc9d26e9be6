"""Regenerate src/chiral_magic/data/canonical_traces.json.

Usage: python3 scripts/build_trace_table.py [ELL_MAX] [--verify-rational ELL]

Orders up to ELL_MAX are computed with the multimodular residue engine; orders
up to --verify-rational are recomputed in exact cyclotomic arithmetic and must
agree.
"""

import argparse
import json
import time
from pathlib import Path

from chiral_magic.model import canonical_potential
from chiral_magic.traces import TraceTable, trace_exact

OUT = Path(__file__).resolve().parents[1] / "src" / "chiral_magic" / "data" / "canonical_traces.json"


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("ell_max", type=int, nargs="?", default=24)
    ap.add_argument("--verify-rational", type=int, default=10)
    args = ap.parse_args()
    p = canonical_potential()
    table = TraceTable(p.digest())
    for ell in range(2, args.ell_max + 1):
        t0 = time.perf_counter()
        table.add(ell, trace_exact(p, ell, backend="modular"), "residue-modular")
        if ell <= args.verify_rational:
            table.add(ell, trace_exact(p, ell, backend="rational"), "residue")
        print(f"l={ell:2d}  q={float(table.q(ell)):.6e}  {time.perf_counter() - t0:.1f}s", flush=True)
    OUT.write_text(json.dumps(table.to_json(), indent=1) + "\n")


if __name__ == "__main__":
    main()
