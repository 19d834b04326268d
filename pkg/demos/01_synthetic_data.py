"""Generate an imbalanced synthetic text corpus and inspect its shape.

Walks through the data path used everywhere else: Zipf-distributed class
sizes, token generation, hashed bag-of-words features, the per-class cap
sample, and a stratified split. Run with `python3 demos/01_synthetic_data.py`.
"""

import numpy as np

from swagppm import data

spec = data.SyntheticSpec(num_classes=20, zipf_exponent=1.2,
                          total_records=4000, vocab_size=2000,
                          tokens_per_record=(6, 16),
                          class_signal_strength=0.6, seed=20250824,
                          feature_dim=2048)
dataset = data.generate(spec)
counts = dataset.class_counts()
print("classes: %d, records: %d" % (dataset.num_classes, len(dataset)))
print("largest class %d, smallest %d, gini %.4f"
      % (counts.max(), counts.min(), data.gini(counts)))

# a single record: sparse signed hashed features, unit L2 norm
rec = dataset.records[0]
print("record %d: %d active features, norm %.3f, label %d"
      % (rec.id, len(rec.indices), float(np.linalg.norm(rec.values)),
         rec.label))

# the cap sample trims head classes to at most `cap` records each, which
# leaves the tail untouched and pulls the distribution toward uniform
capped = data.stratified_cap_sample(dataset, cap=200, seed=1)
print("after cap 200: %d records, gini %.4f"
      % (len(capped), data.gini(capped.class_counts())))

train, test = data.stratified_split(capped, train_fraction=0.5, seed=2)
print("split: %d train / %d test" % (len(train), len(test)))
print("train manifest:", train.manifest()["content_hash"][:16], "...")
