# %% [markdown]
# # Batched updates and queries
#
# Build a small dictionary with batches of four, then look at how the
# levels track the binary digits of the batch count.

# %%
import numpy as np

from batchlsm import Delete, Insert, Lsm, dumps

lsm = Lsm(4)
lsm.update_batch([Insert(3, 30), Insert(7, 70), Insert(12, 120), Insert(20, 200)])
lsm.update_batch([Insert(3, 31), Delete(7), Insert(9, 90), Insert(21, 210)])
lsm.update_batch([Insert(5, 50), Insert(6, 60), Insert(8, 80), Insert(40, 400)])
print(lsm)
print(dumps(lsm))

# %% [markdown]
# Three batches resident: 3 is `0b11`, so levels 0 and 1 are full.
# Lookups scan from the smallest level, the first hit decides.

# %%
print(lsm.lookup([3, 7, 9, 100]).as_list())

# %%
# count and range take vectors of inclusive windows
k1, k2 = np.array([0, 6]), np.array([10, 8])
print(lsm.count(k1, k2))
res = lsm.range(k1, k2)
for q in range(len(k1)):
    print(q, res.pairs(q))

# %%
# merge work so far: the third batch settled in level 0 without merging
print(lsm.stats())
