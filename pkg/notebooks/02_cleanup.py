# %% [markdown]
# # Cleanup
#
# Overwrites and deletes leave stale records behind. Cleanup drops them and
# pads with placebo records to keep the size a multiple of the batch size.

# %%
import numpy as np

from batchlsm import Lsm
from batchlsm.bench import random_schedule

rng = np.random.default_rng(2)
b = 16
lsm = Lsm(b)
batches = random_schedule(rng, b, 11, alphabet=64, delete_prob=0.4)
for batch in batches:
    lsm.update_batch(batch)
print("before:", lsm, "records:", len(lsm))

# %%
probe = int(batches[0].keys.min()) + np.arange(-2, 66)
before = lsm.lookup(probe).as_list()
lsm.cleanup()
print("after: ", lsm, "records:", len(lsm))
assert lsm.lookup(probe).as_list() == before

# %%
# survivors sit in ascending order across the levels, any placebos at the very end
from batchlsm.records import PLACEBO_KEY

keys = np.concatenate([lvl.original_keys for lvl in lsm.full_levels()])
print(keys[:8], "...", keys[-4:])
print("placebos:", int(np.sum(keys == PLACEBO_KEY)))
