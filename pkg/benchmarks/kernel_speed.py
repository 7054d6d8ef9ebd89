"""Compare the compiled hash kernel against the pure-Python fallback.

Times the two batch primitives that dominate tree construction and proof
verification (leaf hashing and level reduction) plus a full tree build, at a
few sizes. Run after `pip install -e .`:

    python benchmarks/kernel_speed.py [--sizes 4096 65536 1048576] [--csv out.csv]
"""

from __future__ import annotations

import argparse
import struct
import time

from vanetrust import _kernel_py

try:
    from vanetrust import _kernel
except ImportError:
    _kernel = None

LEAF_TAG = 0x00
NODE_TAG = 0x01


def _time(fn, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _tree_build(mod, leaves: bytes) -> bytes:
    level = leaves
    while len(level) > 32:
        level = mod.parent_level(level, NODE_TAG)
    return level


def run(sizes, csv_path=None) -> None:
    backends = [("python", _kernel_py)]
    if _kernel is not None:
        backends.append(("compiled", _kernel))
    else:
        print("compiled kernel not available; timing the fallback only")

    rows = []
    for n in sizes:
        payloads = [struct.pack(">Q", i) for i in range(n)]
        for name, mod in backends:
            t_leaves = _time(lambda: mod.hash_leaves(payloads, LEAF_TAG))
            leaves = mod.hash_leaves(payloads, LEAF_TAG)
            t_tree = _time(lambda: _tree_build(mod, leaves))
            rows.append((n, name, t_leaves, t_tree))
            print(f"n={n:>9}  backend={name:<8}  hash_leaves={t_leaves * 1000:9.2f} ms"
                  f"  tree_build={t_tree * 1000:9.2f} ms")
        if _kernel is not None:
            py = [r for r in rows if r[0] == n and r[1] == "python"][0]
            cc = [r for r in rows if r[0] == n and r[1] == "compiled"][0]
            print(f"n={n:>9}  speedup: hash_leaves x{py[2] / cc[2]:.2f},"
                  f" tree_build x{py[3] / cc[3]:.2f}")

    if csv_path:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("n,backend,hash_leaves_s,tree_build_s\n")
            for n, name, t_leaves, t_tree in rows:
                fh.write(f"{n},{name},{t_leaves!r},{t_tree!r}\n")
        print(f"wrote {csv_path}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[4096, 65536, 1048576])
    parser.add_argument("--csv", default=None)
    args = parser.parse_args()
    run(args.sizes, args.csv)


if __name__ == "__main__":
    main()
