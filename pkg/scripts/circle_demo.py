#!/usr/bin/env python3
"""Integrate the unit-circle family and compare against the closed form.

Builds the kernel family of f(x, y) = x^2 + y^2 around (0, 1), integrates the
graph ODE out to |x| <= 0.9, and prints sampled points of the reconstructed
curve next to sqrt(1 - x^2), plus the patch diagnostics.
"""

import argparse

import numpy as np

from oblique import integrate, kernel_family, moore_penrose, tangency_check
from oblique.builtins import builtin_map
from oblique.frobenius import explicit_patch


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--extent", type=float, default=0.9)
    parser.add_argument("--step", type=float, default=1e-3)
    args = parser.parse_args()

    f, x0 = builtin_map("sphere_2d")
    family = kernel_family(f, x0)
    patch = integrate(family, args.extent, args.step)
    tangency_check(patch, family)

    ambient = patch.reconstruct()
    xs, ys = ambient[..., 0], ambient[..., 1]
    print(f"{'x':>8} {'y (patch)':>12} {'sqrt(1-x^2)':>12} {'error':>10}")
    for target in np.linspace(-args.extent, args.extent, 7):
        i = int(np.argmin(np.abs(xs - target)))
        truth = np.sqrt(1 - xs[i] ** 2)
        print(f"{xs[i]:8.3f} {ys[i]:12.8f} {truth:12.8f} {abs(ys[i] - truth):10.2e}")

    gi0 = moore_penrose(f.jacobian(x0))
    gap = float(np.nanmax(np.abs(explicit_patch(f, gi0, patch, x0=x0) - patch.psi)))
    print(f"\nmax closed-form error : {np.max(np.abs(ys - np.sqrt(1 - xs**2))):.3e}")
    print(f"explicit-map agreement: {gap:.3e}")
    for key, value in patch.diagnostics.to_dict().items():
        print(f"{key:>22}: {value}")


if __name__ == "__main__":
    main()
