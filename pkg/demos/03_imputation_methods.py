# Fit every built-in imputation method on one amputed cohort and score the
# reconstructions on the removed cells.

import numpy as np

from gapbench import (
    AmputationConfig,
    ImputerSpec,
    ampute_data,
    available_methods,
    evaluate,
    fit,
    fit_normalizer,
    generate_synthetic,
    impute,
    split_stays,
)

frame, obs_mask = generate_synthetic(60, 48, seed=1)
split = split_stays(frame, (0.7, 0.15, 0.15), seed=1)

# The pipeline mirrors the benchmark runner: normalize with train-split
# stats, ampute the normalized frame once, fit each method on the train
# split's visible cells, and evaluate on the test split's removed cells.
stats = fit_normalizer(frame, obs_mask, split.train)
norm_truth = stats.apply(frame)
amputed, amp_mask = ampute_data(norm_truth, obs_mask, AmputationConfig("mnar", 0.3, seed=9))
visible = obs_mask & ~amp_mask

train = amputed.subframe(split.train)
test = amputed.subframe(split.test)
truth_test = norm_truth.subframe(split.test)

print(f"{'method':14s} {'mae':>7s} {'rmse':>7s} {'jsd':>7s}")
for name in available_methods():
    params = {"epochs": 40} if name == "mlp" else {}
    fitted = fit(ImputerSpec(name, params, seed=0), train, visible[split.train], stats)
    completed = impute(fitted, test, visible[split.test])
    report = evaluate(truth_test, completed, amp_mask[split.test], stats)
    print(f"{name:14s} {report.mae_norm:7.4f} {report.rmse_norm:7.4f} {report.jsd:7.4f}")

# Visible cells always pass through untouched, and the output is complete.
fitted = fit(ImputerSpec("mice"), train, visible[split.train], stats)
completed = impute(fitted, test, visible[split.test])
print("pass-through exact:",
      np.array_equal(completed.values[visible[split.test]], test.values[visible[split.test]]))
print("output complete:", bool(np.isfinite(completed.values).all()))
