# The four amputation mechanisms side by side: how they hit their target
# rate and what statistical signature each leaves behind.

import numpy as np

from gapbench import (
    AmputationConfig,
    achieved_rate,
    ampute_data,
    generate_synthetic,
    mar_mask,
    mnar_mask,
)

frame, obs_mask = generate_synthetic(100, 120, seed=3)
print("observed cells:", obs_mask.sum())

# All mechanisms calibrate to the requested fraction of observed cells.
for mechanism in ("mcar", "mar", "mnar", "bo"):
    _, amp = ampute_data(frame, obs_mask, AmputationConfig(mechanism, 0.3, seed=5))
    print(f"{mechanism:5s} target 0.30 -> achieved {achieved_rate(amp, obs_mask):.4f}")

# mcar is value-blind: the mask indicator does not correlate with the data.
_, amp = ampute_data(frame, obs_mask, AmputationConfig("mcar", 0.3, seed=5))
r = np.corrcoef(amp[obs_mask].astype(float), frame.values[obs_mask])[0, 1]
print("mcar corr(mask, value) = %+.4f" % r)

# mar keeps a seeded subset of features fully observed and masks the rest
# through logistic models of those observed features. The per-feature rate
# is rescaled (here to 0.6) so the overall rate still lands on 0.3.
amp, models = mar_mask(frame, obs_mask, 0.3, seed=5, return_models=True)
inputs = sorted(set(range(6)) - {m.target_feature for m in models})
print("mar observed features:", [frame.feature_names[f] for f in inputs],
      "-> artificial missingness there:", amp[:, :, inputs].sum())

# The masking probability is a sigmoid in the model's linear predictor, so
# bucketing cells by predictor quartile shows a monotone removal rate.
model = models[0]
rows = frame.values.reshape(-1, 6)
rows_obs = obs_mask.reshape(-1, 6)
target_cells = rows_obs[:, model.target_feature]
t = model.predictor(rows, rows_obs)[target_cells]
masked = amp.reshape(-1, 6)[target_cells, model.target_feature]
buckets = np.digitize(t, np.quantile(t, [0.25, 0.5, 0.75]))
print("mar removal rate by predictor quartile:",
      ["%.3f" % masked[buckets == q].mean() for q in range(4)])

# mnar first masks half the features through the logistic model, then masks
# the model's own inputs at random: the remaining missingness depends on
# values that are no longer observable.
amp, models = mnar_mask(frame, obs_mask, 0.3, seed=5, return_models=True)
outputs = sorted(m.target_feature for m in models)
inputs = sorted(set(range(6)) - set(outputs))
print("mnar inputs", [frame.feature_names[f] for f in inputs],
      "carry", int(amp[:, :, inputs].sum()), "removed cells of their own")

# bo (blackout) removes whole timestep rows at once.
_, amp = ampute_data(frame, obs_mask, AmputationConfig("bo", 0.3, seed=5))
rows_amp = amp.reshape(-1, 6)
touched = rows_amp.any(axis=1)
fully = (rows_amp[touched] == rows_obs[touched]).all()
print("bo: every touched row fully removed:", bool(fully))
