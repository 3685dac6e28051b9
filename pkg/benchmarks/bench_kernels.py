"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--quick] [--repeat N]

The first numba call per signature compiles (or loads the on-disk cache);
that warm-up is excluded from the timings.
"""

import argparse
import timeit

import numpy as np

from relqg.kernels import numba_backend, numpy_backend


def cases(quick: bool):
    rng = np.random.default_rng(0)
    T, B, D, H = (10, 2, 16, 16) if quick else (30, 8, 300, 64)
    x = rng.normal(size=(T, B, D))
    wx, wh = rng.normal(size=(D, 4 * H)) * 0.1, rng.normal(size=(H, 4 * H)) * 0.1
    b, h0, c0 = rng.normal(size=4 * H), rng.normal(size=(B, H)), rng.normal(size=(B, H))
    fwd = numpy_backend.lstm_forward(x, wx, wh, b, h0, c0)
    dhs = rng.normal(size=fwd[0].shape)
    n_src = 20 if quick else 40
    src = rng.random((T, n_src))
    index = rng.integers(0, 5000, size=n_src)
    seq_a = rng.integers(0, 50, size=20 if quick else 200)
    seq_b = rng.integers(0, 50, size=20 if quick else 200)
    # one decoder step over a beam of 3
    xs, hs0, cs0 = x[:1, :1].repeat(3, axis=1), h0[:1].repeat(3, 0), c0[:1].repeat(3, 0)
    return {
        f"lstm_forward T=1 B=3 D={D} H={H} (decode step)":
            lambda k: k.lstm_forward(xs, wx, wh, b, hs0, cs0),
        f"lstm_forward T={T} B={B} D={D} H={H}":
            lambda k: k.lstm_forward(x, wx, wh, b, h0, c0),
        f"lstm_backward T={T} B={B} D={D} H={H}":
            lambda k: k.lstm_backward(x, wx, wh, h0, c0, *fwd, dhs),
        f"scatter_add rows={T} src={n_src} size=5000":
            lambda k: k.scatter_add_columns(src, index, 5000),
        f"lcs_length {len(seq_a)}x{len(seq_b)}":
            lambda k: k.lcs_length(seq_a, seq_b),
    }


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true", help="tiny shapes, for smoke tests")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = {"numpy": numpy_backend}
    if numba_backend is not None:
        backends["numba"] = numba_backend
    print(f"{'kernel':<50}" + "".join(f"{name + ' (ms)':>14}" for name in backends) + f"{'speedup':>10}")
    for label, fn in cases(args.quick).items():
        times = {}
        for name, backend in backends.items():
            fn(backend)  # warm-up / compile
            number = 3 if args.quick else 20
            best = min(timeit.repeat(lambda: fn(backend), number=number, repeat=args.repeat))
            times[name] = 1000 * best / number
        speedup = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{label:<50}" + "".join(f"{t:14.3f}" for t in times.values()) + f"{speedup:9.1f}x")


if __name__ == "__main__":
    main()
