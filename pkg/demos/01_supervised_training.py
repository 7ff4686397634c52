"""Train the importance model on a synthetic dataset and score it.

The synthetic generator plants importance as a sigmoid of pooled frame
features, the segment's own features and the video-mean features, so a
model that uses the video context should beat random selection clearly.

    python demos/01_supervised_training.py
"""

from hrec.config import TrainConfig
from hrec.dataset import SplitSpec, SyntheticConfig, generate_synthetic, split_by_video
from hrec.evaluator import random_baseline, score_predictions
from hrec.model import predict_dataset
from hrec.trainer import train_supervised

ds = generate_synthetic(SyntheticConfig(num_videos=80, seed=42))
train, val = split_by_video(ds, SplitSpec(train_fraction=5 / 6, seed=0))
print(f"{len(train)} training videos, {len(val)} validation videos, dims {ds.dims}")

# small widths keep this under a minute on a laptop
config = TrainConfig(sfd=32, vd=32, d_h=32, epochs=10)
ckpt, history = train_supervised(config, train, val)
for rec in history.records:
    print(f"epoch {rec['epoch']:2d}  train {rec['train_loss']:.4f}  val {rec['val_loss']:.4f}  score {rec['val_summary_score']:.4f}")

preds = predict_dataset(ckpt.params, val, config, ckpt.divisor)
model = score_predictions(preds, val, n_s=6).mean
chance = random_baseline(val, n_s=6, mode="exact")["mean"]
print(f"\nsummary score {model:.4f} vs random {chance:.4f} ({100 * (model - chance):+.1f} points)")
