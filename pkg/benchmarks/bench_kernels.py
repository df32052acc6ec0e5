"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both backends are loaded side by side through ``kernels.available_backends()``;
each case is checked for agreement before it is timed.
"""
import argparse
import json
import timeit

import numpy as np

from confdiff import kernels


def cases(rng):
    for n in (256, 4096, 65536):
        m = rng.normal(scale=3.0, size=n)
        yield f"logistic_margin n={n}", lambda impl, m=m: kernels.logistic_margin(m, impl=impl)
    for trials, n in ((2000, 200), (2000, 500)):
        s, sp = rng.normal(size=(trials, n)), rng.normal(size=(trials, n))
        c = rng.uniform(-1, 1, size=(trials, n))
        yield (f"confdiff_terms_rows {trials}x{n}",
               lambda impl, s=s, sp=sp, c=c: kernels.confdiff_terms_rows(s, sp, c, 0.5, impl=impl))
    for n in (256, 4096):
        s, sp = rng.normal(size=n), rng.normal(size=n)
        c = rng.uniform(-1, 1, size=n)
        yield (f"confdiff_score_grad n={n}",
               lambda impl, s=s, sp=sp, c=c: kernels.confdiff_score_grad(s, sp, c, 0.3, (1, -1, 1, 0), impl=impl))


def best_time(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    names = sorted(backends)
    print(f"backends: {', '.join(names)} (default: {kernels.BACKEND})")
    rows = []
    for label, fn in cases(np.random.default_rng(0)):
        outs = [fn(backends[b]) for b in names]
        for o in outs[1:]:
            for a, b in zip(np.atleast_1d(outs[0]) if not isinstance(outs[0], tuple) else outs[0],
                            np.atleast_1d(o) if not isinstance(o, tuple) else o):
                np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
        times = {b: best_time(lambda b=b: fn(backends[b]), args.repeat) for b in names}
        row = {"case": label, **{f"{b}_seconds": t for b, t in times.items()}}
        if "cython" in times:
            row["speedup"] = times["python"] / times["cython"]
        rows.append(row)
        extra = f"  speedup x{row['speedup']:.2f}" if "speedup" in row else ""
        print(f"{label:34s} " + "  ".join(f"{b}={t * 1e6:10.1f}us" for b, t in times.items()) + extra)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
