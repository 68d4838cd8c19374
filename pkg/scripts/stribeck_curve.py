"""Tabulate both Stribeck friction curves and their dip (velocity, torque).

    python3 scripts/stribeck_curve.py > stribeck.csv
"""
import sys

import numpy as np

from sbw_dob.dynamics import HwParams, stribeck_torque

p = HwParams()
w = np.linspace(0.0, 5.0, 501)
sw, m = stribeck_torque(p.stribeck_sw, w), stribeck_torque(p.stribeck_m, w)
out = sys.stdout
out.write("omega_rad_s,T_sw_Nm,T_m_Nm\n")
for row in zip(w, sw, m):
    out.write(",".join(f"{v:.6g}" for v in row) + "\n")
for name, f in (("steering wheel", sw), ("motor", m)):
    i = int(np.argmin(f[5:])) + 5
    sys.stderr.write(f"{name}: dip at {w[i]:.2f} rad/s, {f[i]:.4f} Nm\n")
