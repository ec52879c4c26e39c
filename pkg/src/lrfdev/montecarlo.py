"""
Monte Carlo and exact-enumeration tail estimates for weighted innovation sums.

Replicates are split into fixed-size blocks.  Block ``i`` draws from its own
stream ``(seed, i)`` and produces integer exceedance counts; counts are merged
by integer addition, so the result does not depend on how blocks are
distributed over worker threads.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidRegime, TooManyAtoms
from .field import WeightTable, aggregates
from .innovations import DiscreteCentered, Rademacher

__all__ = [
    "TailEstimate",
    "LILResult",
    "simulate_tail",
    "simulate_sums",
    "enumerate_tail",
    "lil_replication",
    "default_workers",
    "write_estimates_csv",
    "BLOCK_SIZE",
    "MAX_ENUM_ATOMS",
]

BLOCK_SIZE = 1 << 15
MAX_ENUM_ATOMS = 24
_DENSE_CELLS = 1 << 21
_TIE_RTOL = 1e-9


def default_workers():
    """Worker count from ``LRFDEV_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("LRFDEV_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class TailEstimate:
    """Estimate of ``P(S >= x)`` (or ``P(|S| >= x)`` when two-sided).

    ``p_hat_inflated`` counts exceedances of ``x_abs - shift`` where ``shift``
    is ``remainder_z`` standard deviations of the neglected remainder, an
    upper companion that absorbs truncation error.
    """

    n_label: str
    x_sigma: float
    x_abs: float
    count: int
    n_samples: int
    seed: int
    two_sided: bool
    p_hat_inflated: float
    remainder_sd: float

    @property
    def p_hat(self):
        return self.count / self.n_samples

    @property
    def stderr(self):
        p = self.p_hat
        return math.sqrt(p * (1.0 - p) / self.n_samples)

    def to_dict(self):
        d = asdict(self)
        d["p_hat"] = self.p_hat
        d["stderr"] = self.stderr
        return d


def _as_table(w):
    if isinstance(w, WeightTable):
        return w
    return WeightTable.from_weights(w)


def _plan(b, model, truncate_at, method):
    """Decide between grouped exact-sum sampling and dense sampling."""
    if method not in ("auto", "dense", "grouped"):
        raise ValueError(f"unknown sampling method {method!r}")
    probe = model.sum_sampler(np.random.default_rng(0), 1, 1)
    groupable = probe is not None and truncate_at is None
    if method == "grouped" and not groupable:
        raise ValueError("grouped sampling needs a convolution-closed law and no truncation")
    if groupable and method != "dense":
        vals, counts = np.unique(b, return_counts=True)
        if method == "grouped" or 12 * vals.size < b.size:
            return "grouped", (vals, counts)
    return "dense", None


def _block_sums(b, model, gen, size, plan, groups, truncate_at):
    if plan == "grouped":
        vals, counts = groups
        s = np.zeros(size)
        for v, m in zip(vals, counts):
            s += v * model.sum_sampler(gen, int(m), size)
        return s
    rows = max(1, _DENSE_CELLS // b.size)
    out = np.empty(size)
    affine = getattr(model, "raw_affine", None)
    if affine is not None and truncate_at is None:
        # sum b (scale V + shift) = scale (V @ b) + shift sum b, one uniform per cell
        scale, shift = affine
        bsum = float(np.sum(b))
        buf = np.empty((min(rows, size), b.size))
        for start in range(0, size, rows):
            k = min(rows, size - start)
            gen.random(out=buf[:k])
            out[start:start + k] = scale * (buf[:k] @ b) + shift * bsum
        return out
    for start in range(0, size, rows):
        k = min(rows, size - start)
        xi = model.draw(gen, (k, b.size))
        if truncate_at is None:
            out[start:start + k] = xi @ b
        else:
            terms = xi * b
            terms[terms > truncate_at] = 0.0
            out[start:start + k] = terms.sum(axis=1)
    return out


def _run_blocks(b, model, n_samples, seed, key_prefix, workers, block_size, truncate_at, method, consume):
    plan, groups = _plan(b, model, truncate_at, method)
    n_blocks = -(-n_samples // block_size)

    def job(i):
        size = min(block_size, n_samples - i * block_size)
        ss = np.random.SeedSequence(int(seed), spawn_key=tuple(key_prefix) + (i,))
        gen = np.random.Generator(np.random.PCG64(ss))
        return consume(_block_sums(b, model, gen, size, plan, groups, truncate_at))

    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or n_blocks == 1:
        return [job(i) for i in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(n_blocks)))


def simulate_sums(w, model, n_samples, seed, block_size=BLOCK_SIZE, truncate_at=None, method="auto"):
    """Raw replicate values of ``S`` (for diagnostics and small runs)."""
    t = _as_table(w)
    b = t.nonzero_weights()
    parts = _run_blocks(b, model, int(n_samples), seed, (), 1, block_size, truncate_at, method, lambda s: s)
    return np.concatenate(parts)


def simulate_tail(w, model, thresholds, n_samples, seed, two_sided=False, workers=None,
                  truncate_at=None, remainder_z=6.0, block_size=BLOCK_SIZE, method="auto",
                  key_prefix=()):
    """Monte Carlo estimates of ``P(S >= x sigma)`` for every threshold.

    Parameters
    ----------
    w : WeightTable or sequence of float
        Weights ``b``; ``S = sum b xi`` over the stored window.
    model : InnovationModel
    thresholds : sequence of float
        Ascending thresholds in units of ``sigma = w.sigma``.
    n_samples : int
    seed : int
    two_sided : bool
        Tally ``|S| >= x sigma`` instead.
    workers : int, optional
        Thread count; defaults to ``LRFDEV_WORKERS``.  Never changes results.
    truncate_at : float, optional
        Replace each term ``b xi`` by ``b xi * 1{b xi <= y}`` (absolute units).
    remainder_z : float
        Shift, in remainder standard deviations, used for ``p_hat_inflated``.
    method : {"auto", "dense", "grouped"}
        ``grouped`` draws exact sums over equal weights (Gaussian, Rademacher).

    Returns
    -------
    list of TailEstimate
    """
    t = _as_table(w)
    xs = np.asarray(thresholds, dtype=float)
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if xs.ndim != 1 or np.any(np.diff(xs) < 0):
        raise ValueError("thresholds must be a sorted 1-d sequence")
    b = t.nonzero_weights()
    sigma = t.sigma
    rem_sd = math.sqrt(max(t.tail_hi, 0.0))
    tol = _TIE_RTOL * float(np.abs(b).sum())
    x_abs = xs * sigma
    cuts = np.concatenate([x_abs, x_abs - remainder_z * rem_sd]) - tol

    def consume(s):
        v = np.sort(np.abs(s) if two_sided else s)
        return s.size - np.searchsorted(v, cuts, side="left")

    tallies = _run_blocks(b, model, int(n_samples), seed, key_prefix, workers, block_size,
                          truncate_at, method, consume)
    total = np.sum(np.array(tallies, dtype=np.int64), axis=0)
    k = xs.size
    return [TailEstimate(t.n_label, float(xs[i]), float(x_abs[i]), int(total[i]), int(n_samples),
                         int(seed), bool(two_sided), float(total[k + i]) / n_samples, rem_sd)
            for i in range(k)]


def _atoms(model):
    if isinstance(model, (Rademacher, DiscreteCentered)):
        return model.atoms
    raise TypeError("exact enumeration needs a Rademacher or finite discrete law")


def enumerate_tail(w, model, threshold, two_sided=False, truncate_at=None):
    """Exact ``P(S >= threshold)`` (absolute units) by listing every outcome.

    Raises
    ------
    TooManyAtoms
        If more than 24 weights are nonzero, or the outcome count exceeds
        ``2**24``.
    """
    t = _as_table(w)
    b = t.nonzero_weights()
    v, p = _atoms(model)
    if b.size > MAX_ENUM_ATOMS or v.size ** b.size > 2 ** MAX_ENUM_ATOMS:
        raise TooManyAtoms(f"{b.size} weights with {v.size} atoms each exceeds the enumeration cap")
    tol = _TIE_RTOL * float(np.abs(b).sum())
    sums = np.zeros(1)
    probs = np.ones(1)
    for bi in b:
        terms = bi * v
        if truncate_at is not None:
            terms = np.where(terms <= truncate_at, terms, 0.0)
        sums = (sums[:, None] + terms[None, :]).ravel()
        probs = (probs[:, None] * p[None, :]).ravel()
    stat = np.abs(sums) if two_sided else sums
    return float(math.fsum(probs[stat >= threshold - tol]))


@dataclass(frozen=True)
class LILResult:
    """Exceedance frequency of the envelope ``sigma sqrt(2 ln(1/U_np))``."""

    n_label: str
    U_np: float
    x_sigma: float
    envelope: float
    frequency: float
    stderr: float
    n_reps: int


def lil_replication(w_sequence, model, p, n_reps, seed, workers=None):
    """Two-sided exceedance frequencies ``|S_n| >= sigma_n sqrt(2 ln U_np^-1)``.

    Raises
    ------
    InvalidRegime
        If ``U_np >= 1`` for any table (empty envelope).
    """
    if not p > 2:
        raise ValueError("p must exceed 2")
    tables = [_as_table(w) for w in w_sequence]
    Us = []
    for t in tables:
        U = aggregates(t, [p]).U[float(p)]
        if not U < 1.0:
            raise InvalidRegime(f"U_np = {U!r} is not below 1 for {t.n_label!r}")
        Us.append(U)
    out = []
    for i, (t, U) in enumerate(zip(tables, Us)):
        x = math.sqrt(2.0 * math.log(1.0 / U))
        est = simulate_tail(t, model, [x], n_reps, seed, two_sided=True, workers=workers,
                            key_prefix=(i,))[0]
        out.append(LILResult(t.n_label, U, x, x * t.sigma, est.p_hat, est.stderr, int(n_reps)))
    return out


ESTIMATE_COLUMNS = ["n_label", "x_sigma_units", "x_abs", "p_hat", "stderr", "n_samples", "seed",
                    "two_sided", "p_hat_inflated"]


def write_estimates_csv(path_or_file, estimates):
    """CSV with one row per estimate; floats use ``repr`` for exact round-trip."""
    def rows(out):
        out.writerow(ESTIMATE_COLUMNS)
        for e in estimates:
            out.writerow([e.n_label, repr(e.x_sigma), repr(e.x_abs), repr(e.p_hat), repr(e.stderr),
                          e.n_samples, e.seed, int(e.two_sided), repr(e.p_hat_inflated)])
    if hasattr(path_or_file, "write"):
        rows(csv.writer(path_or_file, lineterminator="\n"))
    else:
        with open(path_or_file, "w", newline="") as fh:
            rows(csv.writer(fh, lineterminator="\n"))
