"""Adversarial distance of trained nets on structured synthetic data.

A small version of the synthetic and common-component experiments; the
CLI (``shiftlab synthetic``, ``shiftlab common``) runs the full settings.
"""

# %%
from shiftlab.experiments import NetSettings, run_common_component, run_synthetic

# %% Orthogonal vectors versus orthogonal frequencies
rep = run_synthetic(["orth_vectors", "orth_frequencies"], [4], 64, ["fc_net", "conv_net"], range(3),
                    nets=NetSettings(width=128, lr_fraction=1.0, steps=200))
for kind in ("orth_vectors", "orth_frequencies"):
    for model in ("fc_net", "conv_net"):
        print(f"{kind:17s} {model:9s} median distance {rep.median('distance', kind=kind, model=model):.3f}")

# %% A shared class component widens the margin and the robustness
rep = run_common_component([8], 64, [0.0, 0.3, 0.6], range(3), nets=NetSettings(width=256))
for p in (0.0, 0.3, 0.6):
    print(f"p={p}: margin {rep.median('margin', p=p):.3f}, median distance {rep.median('distance', p=p):.3f}")
