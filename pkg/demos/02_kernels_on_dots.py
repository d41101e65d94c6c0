"""Tangent-kernel interpolants on the antipodal dot pair.

The FC kernel interpolant is a scaled inner product with the training
point, so the boundary sits at distance 1. The pooled convolutional kernel
only sees the signal sum, and the boundary moves to distance 1/sqrt(d).
"""

# %%
import math

import numpy as np

from shiftlab.attacks import minimal_distance_linear
from shiftlab.datagen import dots
from shiftlab.kernels import (
    FC_NTK,
    KernelKind,
    antipodal_cntk_classifier,
    antipodal_ntk_classifier,
    gram,
    ntk_fc,
    ridge_fit,
)

# %% Kernel values
z, x = np.array([1.0, 2.0, 0.5]), np.array([0.3, -1.0, 2.0])
print("k(z, x) =", ntk_fc(z, x), " k(z, -x) =", ntk_fc(z, -x), " difference =", ntk_fc(z, x) - ntk_fc(z, -x),
      " 2<z, x> =", 2 * z @ x)

# %% Closed forms versus a generic ridge solve
d = 16
e1 = dots(d).class_pos[0]
X = np.stack([e1, -e1])
y = np.array([1.0, -1.0])
probe = np.random.default_rng(1).standard_normal(d)
for kind, closed in ((FC_NTK, antipodal_ntk_classifier(e1)), (KernelKind.cntk(), antipodal_cntk_classifier(e1))):
    model = ridge_fit(kind, X, y)
    print(f"{kind!s:>14}: ridge {model.predict(probe):+.6f}   closed form {closed(probe):+.6f}")

print("Gram of {e1, -e1} under CNTK:\n", gram(KernelKind.cntk(), X).entries)

# %% Distance to the boundary as d grows
print(" d     NTK    CNTK    1/sqrt(d)")
for d in (16, 64, 256, 1024):
    e1 = dots(d).class_pos[0]
    a = minimal_distance_linear(antipodal_ntk_classifier(e1), e1)
    b = minimal_distance_linear(antipodal_cntk_classifier(e1), e1)
    print(f"{d:5d}  {a:.4f}  {b:.4f}  {1 / math.sqrt(d):.4f}")
