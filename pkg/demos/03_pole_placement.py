"""
Placing all closed-loop poles at one point
==========================================

Choosing the gains so the characteristic cubic becomes ``(s - p)^3`` leaves
a single tuning knob. We scan it and read off the string-stability margin.
"""

# %%
import numpy as np

from mpfcacc import ChannelParams, denominator_coeffs, parameterized_sigma_norm, pole_placement_gains
from mpfcacc.errors import NonPositiveGain

tau, h, m = 0.2, 1.0, 3
alpha, b, c = pole_placement_gains(-2.0, h, m, tau)
print(f"p = -2: alpha={alpha:.4f} b={b:.4f} c={c:.4f}")
print("denominator:", denominator_coeffs(ChannelParams.homogeneous(alpha, b, c, tau, h, m)))

# %%
# Admissible poles lie in (-3/h, -1/(3 tau)). Outside that band a gain
# turns non-positive.
for pole in (-0.5, -1.0, -3.5):
    try:
        pole_placement_gains(pole, h, m, tau)
        print(pole, "ok")
    except NonPositiveGain as exc:
        print(pole, "rejected:", exc)

# %%
# Sum of channel norms across the admissible band, with and without delay.
# Slower poles shrink the sum; in this band it stays just above one.
for pole in np.linspace(-2.9, -1.8, 6):
    s0 = parameterized_sigma_norm(pole, h, m, tau, dc=0.0, D=0.7)
    s1 = parameterized_sigma_norm(pole, h, m, tau, dc=0.1, D=0.7)
    print(f"p={pole:5.2f}   sum||G|| dc=0: {s0:.4f}   dc=0.1: {s1:.4f}")
