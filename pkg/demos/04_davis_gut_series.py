"""
Davis-Gut series: classification and a small-n simulation
=========================================================

The series sum_n P(|S_n| > (1+eps) sigma_n sqrt(2 ln Psi(n))) / (n h(n))
converges or diverges according to eps (and, at eps = 0, an extra
logarithmic exponent b).  Large-n behaviour is studied through the
asymptotic probability proxy; small n through Monte Carlo.
"""

# %%
from lrfdev import FiniteSupport, Gaussian
from lrfdev.davis_gut import DavisGutSpec, davis_gut_classify, growth_slope, mc_flatness, psi_first_exceed

for weight, kw in (("one", {}), ("logpow", {"r": 0.3}), ("log", {})):
    for eps in (-0.5, 0.0, 0.5):
        for b in ((0.0, 0.6) if weight == "one" else (0.0,)):
            spec = DavisGutSpec(weight, epsilon=eps, b=b, **kw)
            c = davis_gut_classify(spec)
            print(f"h={weight:7s} eps={eps:+.1f} b={b:.1f} m={psi_first_exceed(spec):3d} "
                  f"{'converges' if c.converges else 'diverges ':9s} growth slope {growth_slope(spec):+.3f}")

# %% [markdown]
# The ratio of simulated probabilities to the proxy should not drift with n.

# %%
field = FiniteSupport.from_mapping({(0, 0): 1.0, (1, 0): 0.5, (0, 1): 0.5})
res = mc_flatness(DavisGutSpec("one"), field, (16, 32, 64), Gaussian(), 1_000_000, seed=4)
for n, p, q in zip(res.ns, res.mc_prob, res.proxy):
    print(f"n={n}: MC {p:.4f}  proxy {q:.4f}  ratio {p / q:.4f}")
print(f"log-log slope of the ratio: {res.slope:+.3f}")
