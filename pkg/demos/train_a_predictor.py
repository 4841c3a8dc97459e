"""Train the point-cloud predictor on a few hundred pushes and test it on unseen shapes.

Cylinders of different sizes are split so the test set only holds
cylinders the network never saw. A plain MLP on the same inputs serves as
the baseline. It takes under a minute on one CPU core. With only 450 pushes
the point-cloud model pulls clearly ahead on position, while rotation
stays poor for both until the data grows to the thousands of pushes used
by the acceptance runs.

Run: python3 demos/train_a_predictor.py [epochs]
"""

import sys
import tempfile

from slidenet import datagen, trainer

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 30
shapes = datagen.make_shapes("box:1,cylinder:6", seed=0)
manifest = datagen.generate(shapes, [150] + [50] * 6, datagen.GenConfig(n_points=128), seed=0)
print(f"generated {len(manifest.records)} simulations")

cfg = trainer.desk_config(epochs=epochs, batch_size=32)
with tempfile.TemporaryDirectory() as tmp:
    for variant in ("full", "plain_mlp"):
        _, m = trainer.run_protocol("obj_gen", manifest, cfg, f"{tmp}/{variant}", variant=variant)
        print(f"{variant:<10} position error {m['mean_rel_pos']:6.1%}   binned rotation error {m['mean_rel_rot']:6.1%}"
              f"   ({m['n_examples']} held-out pushes)")
