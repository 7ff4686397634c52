"""Linear-regression ensemble over several trained models' predictions.

Per-segment predictions from every model are pooled over the validation
videos and regressed on the true importance.  Models whose coefficient is
small relative to the largest are dropped by ``select_models``.
"""

import tempfile
from pathlib import Path

from hrec.config import TrainConfig
from hrec.dataset import SplitSpec, SyntheticConfig, generate_synthetic, split_by_video
from hrec.evaluator import (
    ensemble_predict,
    fit_linear_regression,
    pool_predictions,
    read_predictions,
    score_predictions,
    select_models,
    write_predictions,
)
from hrec.model import predict_dataset
from hrec.trainer import train_supervised

ds = generate_synthetic(SyntheticConfig(num_videos=60, seed=11))
train, val = split_by_video(ds, SplitSpec())

models = {}
for name, config in {
    "dim16": TrainConfig(sfd=16, vd=16, d_h=16, epochs=5),
    "dim32": TrainConfig(sfd=32, vd=32, d_h=32, epochs=5, seed=1),
    "portions": TrainConfig(sfd=16, vd=16, d_h=16, epochs=5, portions=2, seed=2),
}.items():
    ckpt, _ = train_supervised(config, train, val)
    models[name] = predict_dataset(ckpt.params, val, config, ckpt.divisor)
    print(f"{name:9s} summary score {score_predictions(models[name], val).mean:.4f}")

# predictions travel between steps as CSV files
with tempfile.TemporaryDirectory() as tmp:
    for name, preds in models.items():
        write_predictions(Path(tmp) / f"{name}.csv", preds)
    loaded = [read_predictions(Path(tmp) / f"{name}.csv") for name in models]

X, y = pool_predictions(loaded, val)
weights = fit_linear_regression(X, y)
print("coefficients", {name: round(float(c), 3) for name, c in zip(models, weights.coefficients)}, "intercept", round(weights.intercept, 4))
print("kept models:", [list(models)[i] for i in select_models(weights)])

combined = {vid: ensemble_predict([m[vid] for m in loaded], weights) for vid in val.ids}
print(f"ensemble  summary score {score_predictions(combined, val).mean:.4f}")
