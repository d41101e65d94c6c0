"""Finite two-layer networks trained by full-batch gradient descent.

A wide convolutional network with global average pooling behaves like its
tangent kernel: on the dot pair it learns (nearly) the same sign rule.
"""

# %%
import numpy as np

from shiftlab.classifier import label_of
from shiftlab.datagen import dots, orth_vectors
from shiftlab.experiments import NetSettings, shift_consistency, train_classifier
from shiftlab.kernels import antipodal_cntk_classifier
from shiftlab.nets import forward, init_normal
from shiftlab.signals import shift_orbit

# %% Exact shift invariance of the pooled conv net
net = init_normal("conv", 12, 64, seed=0, q=5)
x = np.random.default_rng(0).standard_normal(12)
print("outputs on every shift:", np.round(forward(net, shift_orbit(x)), 12))

# %% Symmetric initialisation starts from the zero function
net = init_normal("fc", 12, 64, seed=0, symmetric=True)
print("max |f0| with mirrored units:", np.abs(forward(net, np.eye(12))).max())

# %% Train a wide conv net on the dot pair and compare with the kernel
data = dots(16)
settings = NetSettings(width=4096, steps=2000, lr_fraction=0.5, target_loss=1e-4)
clf, losses, acc = train_classifier("conv", data, settings, seed=0)
print(f"steps {len(losses) - 1}, final loss {losses[-1]:.2e}, train accuracy {acc}")
probes = np.random.default_rng(2).standard_normal((200, 16))
ref = antipodal_cntk_classifier(data.class_pos[0])
print("sign agreement with the kernel rule:", np.mean(label_of(clf(probes)) == label_of(ref(probes))))

# %% Shift consistency: conv versus FC on orthogonal vectors
data = orth_vectors(4, 32, seed=0)
for arch in ("fc", "conv"):
    clf, _, _ = train_classifier(arch, data, NetSettings(width=128, steps=300), seed=0)
    print(arch, "consistency", shift_consistency(clf, data, trials=32, seed=0).percent)
