"""PGD, exact linear distances and the bisection search."""

# %%
import numpy as np

from shiftlab.attacks import AttackConfig, minimal_distance_linear, minimal_distance_search, pgd, robust_accuracy
from shiftlab.classifier import Classifier
from shiftlab.datagen import dots
from shiftlab.kernels import antipodal_cntk_classifier
from shiftlab.margin import linear_classifier

# %% PGD on a single-coordinate classifier
c = Classifier(lambda z: z[..., 0], dim=2, grad=lambda z: np.array([1.0, 0.0]))
for eps in (0.5, 2.0):
    res = pgd(c, np.array([1.0, 0.0]), 1, AttackConfig("L2", eps))
    print(f"eps={eps}: success={res.success}, point={np.round(res.adversarial_point, 6)}")

# %% Search agrees with the exact formula on an affine classifier
lin = linear_classifier(np.array([1.0, -2.0, 0.5]), 0.3)
x = np.array([1.0, -1.0, 2.0])
print("exact :", minimal_distance_linear(lin, x))
print("search:", minimal_distance_search(lin, x, int(lin.label(x)), tol=1e-10).perturbation_norm)

# %% Robust accuracy of the CNTK rule on the dot pair
d = 64
data = dots(d)
cntk = antipodal_cntk_classifier(data.class_pos[0])
for eps in (0.5 / np.sqrt(d), 2 / np.sqrt(d)):
    print(f"eps={eps:.4f}: robust accuracy {robust_accuracy(cntk, data, AttackConfig('L2', eps)):.2f}")
