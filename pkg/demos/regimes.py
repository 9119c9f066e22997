"""Simulate and label the four lambda = 1.5 reference points of the Koper model.

Run with ``python3 demos/regimes.py``; each point takes a few seconds.
"""

import time

from mmoscope.harness import simulate_and_classify
from mmoscope.model import KoperParams


def main():
    for k in (-2.2, -3.6, -4.4, -5.4):
        t0 = time.perf_counter()
        c = simulate_and_classify(KoperParams(k, 1.5, 0.01, 0.01))
        words = c.farey.split()
        farey = " ".join(words[:6]) + (" ..." if len(words) > 6 else "")
        print(f"k = {k:5.1f}  {c.regime.value:<20} {farey or '-':<32} "
              f"{time.perf_counter() - t0:5.1f}s")


if __name__ == "__main__":
    main()
