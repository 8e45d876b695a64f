"""One-time scan that freezes the at-threshold lower-bound constant.

Prints min over d in 1..50, eps in {0.1, 0.5, 1} of
at_threshold_prob(d, eps) * sqrt(d + 1/eps^2) together with its argmin.
The result is recorded in constants.AT_THRESHOLD_LOWER_C.
"""

import math

from .oracles import at_threshold_prob


def main() -> None:
    best = None
    for eps in (0.1, 0.5, 1.0):
        for d in range(1, 51):
            ratio = at_threshold_prob(d, eps) * math.sqrt(d + 1.0 / eps ** 2)
            if best is None or ratio < best[0]:
                best = (ratio, d, eps)
    print(f"min ratio {best[0]:.8f} at d={best[1]}, eps={best[2]}")


if __name__ == "__main__":
    main()
