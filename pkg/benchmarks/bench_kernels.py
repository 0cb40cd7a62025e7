"""Compare the numba and numpy backends on the hot kernels and a full audit.

    python benchmarks/bench_kernels.py --samples 1000000 --repeat 3
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import timeit

import numpy as np

from dfaudit import _kernels
from dfaudit.bias import ControlGroupSpec, audit
from dfaudit.ingest import load_annotations, write_annotations
from dfaudit.model import AuditDataset
from dfaudit.stats import pearson_correlations
from dfaudit.synth import AttributeSpec, SynthConfig, generate_population


def _cases(samples: int) -> dict:
    table, preds, _ = generate_population(SynthConfig(n_samples=samples, seed=1, default=AttributeSpec(0.4, 0.3)))
    ds = AuditDataset(table, preds)
    codes = ds.outcome_codes()
    idx = np.random.default_rng(0).choice(samples, samples // 2, replace=False)
    buf = io.BytesIO()
    write_annotations(table, buf)
    csv_bytes = buf.getvalue()
    spec = ControlGroupSpec(seed=0)
    return {
        "parse_labels": lambda: load_annotations(io.BytesIO(csv_bytes), table.registry),
        "group_counts": lambda: _kernels.group_counts(table.labels, codes),
        "subset_counts": lambda: _kernels.subset_counts(codes, idx),
        "cooccurrence": lambda: _kernels.cooccurrence(table.labels),
        "pearson": lambda: pearson_correlations(table),
        "audit": lambda: audit(ds, spec=spec),
    }


def run(samples: int, repeat: int) -> list[dict]:
    cases = _cases(samples)
    rows = []
    for backend in _kernels.available_backends():
        prev = _kernels.set_backend(backend)
        try:
            for name, fn in cases.items():
                fn()  # warm-up; triggers JIT compilation on the numba backend
                best = min(timeit.repeat(fn, number=1, repeat=repeat))
                rows.append({"backend": backend, "case": name, "seconds": best})
        finally:
            _kernels.set_backend(prev)
    return rows


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true", help="emit raw timings as JSON")
    args = ap.parse_args(argv)

    rows = run(args.samples, args.repeat)
    if args.json:
        json.dump({"samples": args.samples, "timings": rows}, sys.stdout, indent=2)
        print()
        return 0
    by = {(r["backend"], r["case"]): r["seconds"] for r in rows}
    backends = _kernels.available_backends()
    print(f"{args.samples:,} samples x 47 attributes, best of {args.repeat}")
    print(f"{'case':<15}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for case in dict.fromkeys(r["case"] for r in rows):
        line = f"{case:<15}" + "".join(f"{by[b, case] * 1e3:>10.1f}ms" for b in backends)
        if "numba" in backends and "numpy" in backends:
            line += f"{by['numpy', case] / by['numba', case]:>11.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
