"""Portion averaging: encode feature-coordinate subsets separately and average.

With P portions the segment coordinates are split into P random disjoint
groups; each group is encoded with the others zeroed and the P context
vectors are averaged.  P=1 is exactly the plain encoder.
"""

import numpy as np

from hrec.autodiff import ParamSet, Tensor
from hrec.config import TrainConfig
from hrec.dataset import SplitSpec, SyntheticConfig, generate_synthetic, split_by_video
from hrec.trainer import train_supervised
from hrec.videonet import augment_portions, encode_video, init_videonet, portion_groups

rng = np.random.default_rng(0)
params = ParamSet(init_videonet(rng, sfd=8, d_h=6, vd=4))
segments = Tensor(rng.standard_normal((5, 8)))

print("groups for P=3:", [g.tolist() for g in portion_groups(8, 3, seed=1)])
plain = encode_video(segments, params).vector.data
print("P=1 equals plain encoding:", np.array_equal(augment_portions(segments, 1, params, seed=1).data, plain))
print("P=3 context:", np.round(augment_portions(segments, 3, params, seed=1).data, 4))

ds = generate_synthetic(SyntheticConfig(num_videos=60, seed=3))
train, val = split_by_video(ds, SplitSpec())
for portions in (1, 4):
    config = TrainConfig(sfd=16, vd=16, d_h=16, epochs=6, portions=portions)
    _, history = train_supervised(config, train, val)
    print(f"P={portions}: final val summary score {history.records[-1]['val_summary_score']:.4f}")
