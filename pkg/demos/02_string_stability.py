"""
How many predecessors are worth listening to?
=============================================

We look at the speed transfer functions of a single follower, their peak
gains and the headway needed for string stability as the communication
delay grows.
"""

# %%
import numpy as np

from mpfcacc import Axis, ChannelParams, hinf_norm, minimal_stable, region_sweep, string_stable_norm

p = ChannelParams.homogeneous(alpha=5.0, b=10.0, c=2.0, tau=0.1, h=0.5, m=3, dc=0.05, D=0.7)
verdict = string_stable_norm(p)
for n, norm in verdict.hinf_per_channel:
    print(f"||G_{n}||_inf = {norm:.4f}")
print(f"sum = {verdict.sigma_norm:.4f}, string stable: {verdict.norm_ok}")

# %%
# The same vehicle following only its direct predecessor.
single = ChannelParams.homogeneous(5.0, 10.0, 2.0, 0.1, 0.5, 1, 0.05, 0.7)
print(f"m=1: ||G_1||_inf = {hinf_norm(single, 1):.4f}")

# %%
# Minimal headway versus communication delay, for one to three predecessors.
# A coarse grid keeps this quick.
h_axis, dc_axis = Axis("h", 0.1, 2.0, 40), Axis("dc", 0.0, 0.3, 7)
template = ChannelParams.homogeneous(5.0, 10.0, 2.0, 0.1, 1.0, 1, 0.0, 0.7)
grids = region_sweep(h_axis, dc_axis, template, [1, 2, 3])

print("dc     " + "  ".join(f"m={m}  " for m in grids))
for k, dc in enumerate(dc_axis.values):
    row = [minimal_stable(h_axis.values, grids[m][:, k]) for m in grids]
    print(f"{dc:.2f}   " + "  ".join(f"{h:5.2f}" for h in row))
