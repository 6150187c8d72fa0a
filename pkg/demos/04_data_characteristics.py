# Data-characteristics analyses over missingness patterns: which features
# go missing together, and whether missingness tracks the outcome label.

import numpy as np

from gapbench import (
    AmputationConfig,
    ampute_data,
    generate_synthetic,
    informative_missingness,
    missingness_correlation,
)

frame, obs_mask = generate_synthetic(120, 48, seed=13, native_missing_rates=[0.15] * 6)

# Independent native gaps: the correlation matrix stays near the identity.
corr = missingness_correlation(frame, obs_mask)
off = corr.matrix[~np.eye(6, dtype=bool)]
print("native missingness correlation, max |off-diagonal|: %.3f" % np.abs(off).max())

# Blackout amputation removes whole rows, which couples the indicators.
amputed, amp = ampute_data(frame, obs_mask, AmputationConfig("bo", 0.3, seed=2))
corr_bo = missingness_correlation(amputed, obs_mask & ~amp)
print("after blackout, min off-diagonal: %.3f" % corr_bo.matrix[~np.eye(6, dtype=bool)].min())

# Informative missingness: compare per-feature missing rates between
# survivors and non-survivors. Here we plant the effect by dropping extra
# heart-rate readings for survivors only.
values = frame.values.copy()
survivors = frame.outcome == 0
extra = np.zeros_like(obs_mask)
extra[survivors, :, 0] = np.random.default_rng(4).random((survivors.sum(), 48)) < 0.3
values[extra] = np.nan
planted = frame.with_values(values)

report = informative_missingness(planted, planted.observation_mask(), top_k=3)
print("top features by |rate difference|:", report.top)
for name, rate_surv, rate_died, diff in report.rows:
    print(f"  {name:6s} survivors {rate_surv:.3f}  non-survivors {rate_died:.3f}  |diff| {diff:.3f}")
