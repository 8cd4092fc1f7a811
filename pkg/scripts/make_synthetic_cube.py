#!/usr/bin/env python3
"""Write a seeded synthetic test cube (piecewise-constant regions with
smooth spectra) to an .hsic file."""

import argparse

from hsdip import hsio, synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="output .hsic path")
    ap.add_argument("--height", type=int, default=32)
    ap.add_argument("--width", type=int, default=32)
    ap.add_argument("--bands", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--regions", type=int, default=8)
    args = ap.parse_args()

    cube = synthetic.piecewise_constant_cube(
        (args.height, args.width, args.bands), seed=args.seed, regions=args.regions)
    hsio.write_cube(cube, args.out)
    print(f"wrote {args.out}: {cube.shape[0]}x{cube.shape[1]}x{cube.shape[2]}, "
          f"range [{cube.min():.3f}, {cube.max():.3f}]")


if __name__ == "__main__":
    main()
