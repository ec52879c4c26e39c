"""
Kernel smoothing under long-range dependent errors
==================================================

The stochastic part of a kernel smoother is a weighted sum of the field,
hence of the innovations.  Its weights give iterated-logarithm envelopes;
a short replication shows how often the envelope is crossed.
"""

# %%
from lrfdev import Gaussian, IndexRegion, LongRangeIsotropic, aggregates
from lrfdev.montecarlo import lil_replication
from lrfdev.regression import RegressionDesign, lil_envelope, smoother_weight_table

field = LongRangeIsotropic(1.7)
tables = []
for n in (16, 32, 64):
    design = RegressionDesign(IndexRegion.square(n), "epanechnikov", 0.25, (0.5, 0.5))
    w = smoother_weight_table(design, field, 1e-2)
    agg = aggregates(w, [4])
    env = lil_envelope(agg, 4)
    ll = lil_envelope(agg, 4, mode="loglog", n=n)
    tables.append(w)
    print(f"n={n:3d} sigma={w.sigma:.4f} U_4={agg.U[4.0]:.3e} envelope={env.x_sigma:.3f} sigma, "
          f"loglog={ll.x_sigma:.3f} sigma (rho condition {'holds' if ll.condition_ok else 'fails'})")

# %%
for r in lil_replication(tables, Gaussian(), 4, 20_000, seed=3):
    print(f"{r.n_label}: P(|S| >= envelope) = {r.frequency:.2e} +- {r.stderr:.1e}")
