# %% [markdown]
# # Where do the distillation weights put their mass?
#
# The fine-tuning losses rescale the plain epsilon error by a function of the
# signal-to-noise ratio. Here we tabulate those coefficients on the default
# linear schedule.

# %%
import numpy as np

from sdft.schedule import WeightingScheme, make_schedule, weight_curve

s = make_schedule()
print(s.T, s.beta[0], s.beta[-1])

# %% [markdown]
# SNR falls by eight orders of magnitude over the chain.

# %%
for t in (1, 10, 100, 250, 500, 750, 1000):
    print(f"t={t:4d}  alpha_bar={s.alpha_bar[t - 1]:.4f}  snr={s.snr[t - 1]:.3e}")

# %% [markdown]
# ## Weighting curves
#
# `sdft` with gamma 3 is the low-gamma preset; gamma 50 silences everything
# except the nearly pure noise end.

# %%
schemes = {
    "simple": WeightingScheme("simple"),
    "p2 g=1": WeightingScheme("p2", 1.0, 1.0),
    "sdft g=3": WeightingScheme("sdft", 1.0, 3.0),
    "sdft g=50": WeightingScheme("sdft", 1.0, 50.0),
    "min-snr 5": WeightingScheme("min_snr", gamma=5.0),
}
curves = {name: weight_curve(sch, s) for name, sch in schemes.items()}
ts = [1, 100, 250, 400, 500, 750, 1000]
print("t     " + "".join(f"{n:>12}" for n in curves))
for t in ts:
    print(f"{t:<6d}" + "".join(f"{c[t - 1]:12.3e}" for c in curves.values()))

# %% [markdown]
# The first timestep at which each sdft curve reaches 1% of its maximum:

# %%
for name in ("sdft g=3", "sdft g=50"):
    c = curves[name]
    print(name, int(np.argmax(c >= 0.01 * c.max())) + 1)
