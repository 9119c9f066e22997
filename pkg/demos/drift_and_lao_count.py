"""Return drift, MMO/relaxation boundary and predicted LAO counts at k = -4.5.

Run with ``python3 demos/drift_and_lao_count.py``.
"""

import numpy as np

from mmoscope.drift import RELAXATION, lambda_r, lao_count, mu_r_minus, return_drift
from mmoscope.model import KoperParams, koper_to_normal_form


def main():
    k = -4.5
    lr = lambda_r(KoperParams(k, 0.0, 0.01))
    print(f"lambda_r(k={k}) = {lr:.6f}")
    for lam in (0.0, 0.5, lr, 1.5, 2.0):
        p = koper_to_normal_form(KoperParams(k, lam, 0.01, 0.01))
        print(f"  lambda = {lam:.4f}: mu = {p.mu:+.4f}, mu_r = {mu_r_minus(p):+.4f}, "
              f"return drift = {return_drift(p):+.5f}")
    print("predicted LAO run length for an SAO epoch from z = 0 to z = 0.003:")
    for delta in (0.01, 0.003, 0.001):
        p = koper_to_normal_form(KoperParams(k, 1.5, 0.01, delta))
        L = lao_count(p, 0.0, 0.003)
        print(f"  delta = {delta:<6} L = {'relaxation' if L is RELAXATION else L}")
    print("z-step per excursion, delta * |S|:",
          np.round([d * abs(return_drift(koper_to_normal_form(KoperParams(k, 1.5, 0.01, d))))
                    for d in (0.01, 0.001)], 6))


if __name__ == "__main__":
    main()
