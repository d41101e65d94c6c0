"""Shift orbits, the DC component and max-margin separators.

Run with ``python3 demos/01_orbits_and_margins.py``.
"""

# %%
import math

import numpy as np

from shiftlab.datagen import dots
from shiftlab.margin import LabeledSet, oracle_max_margin, orbit_margin
from shiftlab.signals import circular_shift, dc_component, shift_orbit

# %% A signal and its circular shifts
x = np.array([3.0, 1.0, 0.0, -1.0])
print("x          ", x)
print("shift by 1 ", circular_shift(x, 1))
print("orbit:\n", shift_orbit(x))

# every shift has the same DC component
print("DC of each shift:", dc_component(shift_orbit(x)))

# %% The dot pair: a single +1 versus a single -1
for d in (4, 16, 64):
    data = dots(d)
    plain = oracle_max_margin(data.class_pos, data.class_neg, max_dim=d, check_unique=False)
    orbit = orbit_margin(data)
    print(f"d={d:3d}  margin without orbits {plain.margin:.4f}   with orbits {orbit.margin:.4f}"
          f"   2/sqrt(d) = {2 / math.sqrt(d):.4f}")

# %% Brute force agrees with the DC gap on a random instance
rng = np.random.default_rng(0)
P = rng.standard_normal((2, 5)) + 0.6
N = rng.standard_normal((1, 5))
data = LabeledSet(P, N)
orb = data.orbits()
brute = oracle_max_margin(orb.class_pos, orb.class_neg)
print("orbit margin (closed form):", orbit_margin(data).margin)
print("orbit margin (brute force):", brute.margin)
print("brute-force normal:", np.round(brute.normal, 6))
