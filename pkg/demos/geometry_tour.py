"""Walk through the slow-manifold geometry of the Koper model for three values of k.

Run with ``python3 demos/geometry_tour.py``.
"""

from mmoscope.geometry import geometry_report
from mmoscope.local import hopf_criticality, lambda_sh, landmarks
from mmoscope.drift import lambda_r
from mmoscope.model import KoperParams, koper_to_normal_form


def main():
    for k in (-3.6, -4.0, -4.5):
        kp = KoperParams(k, 0.0, 0.01, 0.01)
        p = koper_to_normal_form(kp)
        rep = geometry_report(p).as_dict()
        lm = landmarks(p, "minus", "numeric")
        print(f"k = {k}")
        print(f"  folded singularities:  {rep['relative_config']['kind']}")
        print(f"  M2 fold points:        {rep['m2_fold_points']['count']}")
        print(f"  Hopf on lower branch:  x_DH = {lm.x_DH:.6f}, z_DH = {lm.z_DH:.6f} "
              f"({hopf_criticality(p).value})")
        print(f"  canard plane:          z_CN = {lm.z_CN:.6f}")
        print(f"  oscillations for |lambda| < {lambda_sh(kp):.4f}")
        if k < -4:
            print(f"  MMO beyond |lambda| = {lambda_r(kp):.4f}, relaxation inside")


if __name__ == "__main__":
    main()
