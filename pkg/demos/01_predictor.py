"""
Compensating actuation delay with a predictor
=============================================

A follower whose engine reacts ``D`` seconds late can still run the
delay-free law, provided it feeds it the state ``D`` seconds ahead. This
script builds the predictor for one vehicle and checks how far ahead it
really sees.
"""

# %%
# One follower listening to two predecessors.
import numpy as np

from mpfcacc import SignalHistory, VehicleParams, build_realization, predictor_state

ego = VehicleParams(2, tau=0.3, h=0.8, dc=0.0, m=2, alpha=5.0, b=10.0, c=2.0)
preds = [VehicleParams(1, 0.25, 0.6), VehicleParams(0, 0.2, 0.5)]
D, Ts = 0.5, 0.001
real = build_realization(ego, preds, D, Ts)
print("state dimension:", real.dim)
print("gain vector K:", np.round(real.gain, 3))

# %%
# Drive the open-loop stacked model with smooth inputs and integrate it
# finely. Every input reaches the plant ``D`` seconds late.
inputs = [(0.8, 1.3, 0.4), (0.5, 0.9, 1.1), (0.3, 1.7, 2.0)]


def u(j, t):
    a, w, phi = inputs[j]
    return a * np.sin(w * t + phi)


B = np.column_stack(real.b_vectors)
T = 2.5
n = int(round((T + D) / Ts))
x = np.empty((n + 1, real.dim))
x[0] = [1.0, -0.5, 14.0, 13.5, 13.0, 0.2, -0.1, 0.3]
sub = 20
h = Ts / sub
for k in range(n):
    xk = x[k].copy()
    for r in range(sub):
        t = k * Ts + r * h
        f = lambda tt, xx: real.gamma @ xx + B @ np.array([u(j, tt - D) for j in range(3)])
        k1 = f(t, xk)
        k2 = f(t + h / 2, xk + h / 2 * k1)
        k3 = f(t + h / 2, xk + h / 2 * k2)
        k4 = f(t + h, xk + h * k3)
        xk = xk + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    x[k + 1] = xk

# %%
# Now predict. The predictor only uses the current state and the inputs
# already sent, which sit in ring buffers.
hists = [SignalHistory(Ts, n + 2) for _ in range(3)]
errors = []
for k in range(int(round(T / Ts)) + 1):
    t = k * Ts
    for j, hist in enumerate(hists):
        hist.append(u(j, t))
    if t > D:
        q = predictor_state(real, x[k], hists[0], hists[1:], t)
        errors.append(np.abs(q - x[k + int(round(D / Ts))]).max())

print(f"worst prediction error over (D, {T}] s: {max(errors):.2e}")
