"""Generate a small labelled dataset from every procedural shape family and look at it.

Each record is one random push on a randomly rescaled shape. The summary
shows how far things slide and how much they turn per family, which is the
quickest way to see whether the impulse settings produce sensible motion.

Run: python3 demos/build_a_dataset.py [output_dir]
"""

import sys

import numpy as np

from slidenet import datagen, geometry

shapes = datagen.make_shapes(",".join(f"{fam}:2" for fam in geometry.FAMILIES), seed=1)
manifest = datagen.generate(shapes, 15, datagen.GenConfig(n_points=256), seed=1)
manifest = datagen.filter_outliers(manifest)

print(f"{'family':<14}{'records':>8}{'mass kg':>16}{'travel m':>16}{'rotation deg':>18}")
for fam in geometry.FAMILIES:
    recs = [r for r in manifest.records if r.family == fam]
    mass = np.array([r.mass for r in recs])
    travel = np.array([np.hypot(*r.final_pos) for r in recs])
    rot = np.array([r.total_rotation_deg for r in recs])
    print(f"{fam:<14}{len(recs):>8}{mass.min():>8.2f}-{mass.max():<7.2f}{travel.min():>8.2f}-{travel.max():<7.2f}"
          f"{rot.min():>9.1f}-{rot.max():<8.1f}")

if len(sys.argv) > 1:
    datagen.save(manifest, sys.argv[1])
    print(f"saved to {sys.argv[1]}")
