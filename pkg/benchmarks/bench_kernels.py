"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --repeat 20
"""

import argparse
import timeit

import numpy as np

from sarcube.kernels import available_backends


def cases(rng, n, c, size):
    x = rng.standard_normal((n, c, size + 2, size + 2)).astype(np.float32)
    cols = rng.standard_normal((n, c * 9, size * size)).astype(np.float32)
    act = rng.standard_normal((n, c, size, size)).astype(np.float32)
    up = rng.standard_normal((n, c, size, size)).astype(np.float32)
    edges = rng.uniform(0, size, (64, 4))
    row_y = np.arange(size) + 0.5
    return {
        "im2col": lambda k: k.im2col(x, 3, 3, 1),
        "col2im": lambda k: k.col2im(cols, x.shape, 3, 3, 1),
        "maxpool2_forward": lambda k: k.maxpool2_forward(act),
        "upsample2_backward": lambda k: k.upsample2_backward(up),
        "scanline_parity": lambda k: k.scanline_parity(edges, row_y, 0.5, 1.0, size),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--repeat", type=int, default=10)
    args = p.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the numpy timings are shown")
    work = cases(np.random.default_rng(0), args.batch, args.channels, args.size)
    print(f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in work.items():
        times = {}
        for bname, mod in backends.items():
            fn(mod)
            times[bname] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        row = f"{name:<20}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times.values())
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
