"""
Weights of a linear random field and their moment functionals
=============================================================

A partial sum of a linear field over a region is itself a weighted sum of
the innovations.  This script builds those weights for a finite-support
field and for a long-range field, then prints the quantities that decide
which deviation regime applies.
"""

# %%
import numpy as np

from lrfdev import FiniteSupport, IndexRegion, LongRangeIsotropic, aggregates, build_weights
from lrfdev.deviations import validity_ranges
from lrfdev.field import rho_bounds

# %% [markdown]
# The delta field reproduces the region indicator, so every weight is 1.

# %%
w = build_weights(FiniteSupport(), IndexRegion.square(10))
agg = aggregates(w, [3, 4])
print("window", w.window, "sigma^2", w.sigma2, "rho^2", agg.rho2, "U_4", agg.U[4.0])
vr = validity_ranges(agg, p=4, t=3)
print(f"moderate range x <= {vr.x_moderate_max:.3f}, large range x >= {vr.x_large_min:.2f}, gap {vr.gap:.2f}")

# %% [markdown]
# A long-range field with index beta: sigma_n^2 grows like n^(6 - 2 beta).

# %%
field = LongRangeIsotropic(1.7)
ns = [16, 32, 64, 128]
rows = []
for n in ns:
    w = build_weights(field, IndexRegion.square(n), 1e-3)
    a = aggregates(w, [3, 4])
    best = min(b for _, b in rho_bounds(field, IndexRegion.square(n), w.sigma))
    rows.append((n, w.n_cells, w.sigma2, w.truncation_epsilon, a.rho, best, a.U[3.0]))
    print(f"n={n:4d} cells={w.n_cells:8d} sigma2={w.sigma2:.4e} eps={w.truncation_epsilon:.1e} "
          f"rho={a.rho:.4f} (bound {best:.3f}) U_3={a.U[3.0]:.4e}")
s = np.polyfit(np.log(ns), np.log([r[2] for r in rows]), 1)[0]
print(f"fitted sigma^2 exponent {s:.3f}; asymptotic value {6 - 2 * 1.7:.2f}")
