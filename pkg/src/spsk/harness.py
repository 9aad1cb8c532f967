"""Monte-Carlo and exact-enumeration checks of the sketch guarantees.

``run_experiment`` executes one tagged experiment and returns a ``Report``
whose rows carry the empirical value, the bound it was checked against and
a PASS/FAIL verdict (INFO rows are measurements with no verdict). Every
theoretical column comes from the planner and bound functions in ``bcs``,
``rcs`` and ``ann``; nothing is re-derived here.

Report columns, in order::

    experiment, check, params, empirical, bound, relation, slack, verdict

plus ``wall_s`` when timings are requested. Without timings a report is
byte-for-byte reproducible from its config.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import ann, baselines, bcs, kernels, rcs
from .bcs import SparseBinaryVector
from .errors import ParameterError
from .mapping import (
    TAG_CORPUS,
    BucketMap,
    SignVector,
    bits_for,
    generator,
    new_bucket_map,
    new_sign_vector,
    randomness_bits,
    trial_assignments,
    trial_signs,
)
from .rcs import SparseRealVector

TAGS = (
    "thm1",
    "thm2",
    "thm3",
    "lemma3",
    "rcs_ip",
    "rcs_l2",
    "kway",
    "randomness",
    "ann_recall",
    "baselines",
    "streaming",
)

COLUMNS = ("experiment", "check", "params", "empirical", "bound", "relation", "slack", "verdict")

# The far-pair half of thm1 runs at its own sparsity over this many corpora.
THM1_FAR_PSI = 20
THM1_FAR_RUNS = 20

# Additive slack on failure-rate checks at >= 1e4 trials (3 sigma of a
# Bernoulli(0.1) is ~0.009).
RATE_SLACK = 0.01

DEFAULTS = {
    "thm1": dict(n=100, d=10_000, psi=50, r=20, eps=1.0, trials=10_000, runs=10),
    "thm2": dict(n=100, d=10_000, psi=20, eps=1.0, runs=20),
    "thm3": dict(trials=100_000),
    "lemma3": dict(psi=2, N=64, eps=1.0, r=3, trials=100_000),
    "rcs_ip": dict(d=1000, eps=0.5, cap_psi=4.0, trials=10_000),
    "rcs_l2": dict(d=1000, eps=0.5, cap_psi=4.0, trials=10_000),
    "kway": dict(d=64, k=4, eps=0.5, cap_psi=1.0, N=160, trials=10_000),
    "randomness": dict(trials=100),
    "ann_recall": dict(n=100, d=10_000, psi=20, r=5, c=2.0, runs=100),
    "baselines": dict(n=20, eps=0.5, trials=10_000, runs=1000),
    "streaming": dict(trials=1000),
}


@dataclass(frozen=True)
class ExperimentConfig:
    tag: str
    seed: int = 0
    n: int | None = None
    d: int | None = None
    psi: int | None = None
    r: int | None = None
    eps: float | None = None
    k: int | None = None
    c: float | None = None
    cap_psi: float | None = None
    N: int | None = None
    trials: int | None = None
    runs: int | None = None
    corpus: tuple | None = None  # binary vectors read from a file, if any

    def resolved(self) -> ExperimentConfig:
        if self.tag not in DEFAULTS:
            raise ParameterError(f"unknown experiment tag {self.tag!r}; choose from {', '.join(TAGS)}")
        filled = {k: v for k, v in DEFAULTS[self.tag].items() if getattr(self, k) is None}
        cfg = replace(self, **filled)
        for name in ("n", "d", "psi", "r", "k", "N", "trials", "runs"):
            val = getattr(cfg, name)
            if val is not None and val < 1:
                raise ParameterError(f"{name} must be positive, got {val}")
        for name in ("eps", "c", "cap_psi"):
            val = getattr(cfg, name)
            if val is not None and not val > 0:
                raise ParameterError(f"{name} must be positive, got {val}")
        if cfg.corpus is not None and cfg.tag not in ("thm1", "thm2"):
            raise ParameterError(f"experiment {cfg.tag} does not take a corpus file")
        return cfg


@dataclass
class Row:
    experiment: str
    check: str
    params: str
    empirical: float
    bound: float | None = None
    relation: str = ""
    slack: float = 0.0
    verdict: str = "INFO"
    wall_s: float = 0.0

    def cells(self, timing: bool):
        out = [
            self.experiment,
            self.check,
            self.params,
            _fmt(self.empirical),
            "" if self.bound is None else _fmt(self.bound),
            self.relation,
            _fmt(self.slack),
            self.verdict,
        ]
        if timing:
            out.append(f"{self.wall_s:.3f}")
        return out


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    return repr(float(x))


@dataclass
class Report:
    tag: str
    config: ExperimentConfig
    rows: list[Row] = field(default_factory=list)
    wall_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.verdict != "FAIL" for r in self.rows)

    def to_csv(self, timing: bool = False, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(list(COLUMNS) + (["wall_s"] if timing else []))
        for row in self.rows:
            w.writerow(row.cells(timing))
        return buf.getvalue()

    def to_table(self, timing: bool = False) -> str:
        cols = list(COLUMNS) + (["wall_s"] if timing else [])
        body = [cols] + [r.cells(timing) for r in self.rows]
        widths = [max(len(line[i]) for line in body) for i in range(len(cols))]
        return "\n".join(
            "  ".join(cell.ljust(wd) for cell, wd in zip(line, widths)).rstrip() for line in body
        )


def _params(**kw) -> str:
    return ";".join(f"{k}={_fmt(v) if not isinstance(v, str) else v}" for k, v in kw.items())


def _check(value, bound, relation, slack=0.0) -> str:
    if relation == "<=":
        ok = value <= bound + slack
    elif relation == "<":
        ok = value < bound + slack
    elif relation == ">=":
        ok = value >= bound - slack
    elif relation == ">":
        ok = value > bound - slack
    elif relation == "==":
        ok = value == bound
    else:
        raise ValueError(relation)
    return "PASS" if ok else "FAIL"


class _Recorder:
    def __init__(self, tag):
        self.tag = tag
        self.rows = []
        self._t0 = time.perf_counter()

    def add(self, check, params, empirical, bound=None, relation="", slack=0.0, info=False):
        verdict = "INFO" if info or bound is None else _check(empirical, bound, relation, slack)
        now = time.perf_counter()
        self.rows.append(
            Row(self.tag, check, params, empirical, bound, relation, slack, verdict, now - self._t0)
        )
        self._t0 = now


# ---------------------------------------------------------------- corpora


def _random_support(rng, d, size, exclude=None):
    """``size`` distinct coordinates of [0, d), avoiding ``exclude``."""
    if exclude is None or len(exclude) == 0:
        return np.sort(rng.choice(d, size=size, replace=False))
    if size > d - len(exclude):
        raise ParameterError("not enough free coordinates")
    if 4 * (len(exclude) + size) > d:
        pool = np.setdiff1d(np.arange(d), exclude, assume_unique=True)
        return np.sort(rng.choice(pool, size=size, replace=False))
    while True:
        cand = rng.choice(d, size=size + len(exclude), replace=False)
        cand = cand[~np.isin(cand, exclude)]
        if cand.size >= size:
            return np.sort(cand[:size])


def perturb(rng, u: SparseBinaryVector, dist: int) -> SparseBinaryVector:
    """A vector at exact Hamming distance ``dist`` from u with popcount <= |u|.

    Clears ceil(dist/2) of u's ones and sets floor(dist/2) fresh zeros.
    """
    drop = (dist + 1) // 2
    add = dist // 2
    if drop > u.popcount or add > u.d - u.popcount:
        raise ParameterError(f"cannot move distance {dist} from a vector of popcount {u.popcount}")
    removed = rng.choice(u.ones, size=drop, replace=False) if drop else np.zeros(0, dtype=np.int64)
    added = _random_support(rng, u.d, add, exclude=u.ones) if add else np.zeros(0, dtype=np.int64)
    keep = np.setdiff1d(u.ones, removed, assume_unique=True)
    return SparseBinaryVector(u.d, np.union1d(keep, added))


def gen_sparse_corpus(n: int, d: int, psi: int, seed: int = 0, planted=None, run: int = 0):
    """n synthetic vectors of popcount exactly psi.

    With ``planted=(r_near, r_far)``, vector 1 sits at distance r_near - 1
    from vector 0 and vector 2 at distance exactly r_far from vector 0.
    """
    if n < 1 or d < 1 or psi < 0:
        raise ParameterError("need n >= 1, d >= 1, psi >= 0")
    if psi > d:
        raise ParameterError(f"psi={psi} exceeds d={d}")
    rng = generator(seed, TAG_CORPUS, run)
    out = [SparseBinaryVector(d, _random_support(rng, d, psi)) for _ in range(n)]
    if planted is not None:
        r_near, r_far = planted
        if r_near < 1:
            raise ParameterError("r_near must be >= 1")
        if r_far > 2 * psi:
            raise ParameterError(f"r_far={r_far} > 2*psi={2 * psi} is infeasible")
        if n < 3:
            raise ParameterError("planting needs n >= 3")
        if (r_far // 2) > d - psi:
            raise ParameterError("dimension too small for the requested far plant")
        out[1] = perturb(rng, out[0], r_near - 1)
        out[2] = perturb(rng, out[0], r_far)
    return out


# ------------------------------------------------------------ enumeration


def brute_force_expectation(u: SparseBinaryVector, v: SparseBinaryVector, n_buckets: int,
                            max_maps: int = 4 ** 8) -> Fraction:
    """Exact mean sketch distance over every map of the active coordinates.

    Inactive coordinates never change a parity difference, so enumerating
    the N^m maps of the m active coordinates is exhaustive.
    """
    if u.d != v.d:
        raise ParameterError("dimension mismatch")
    if n_buckets < 1:
        raise ParameterError("N must be >= 1")
    active = np.union1d(u.ones, v.ones)
    m = active.size
    if n_buckets ** m > max_maps:
        raise ParameterError(f"{n_buckets}^{m} maps exceed the enumeration limit {max_maps}")
    in_u = np.isin(active, u.ones)
    in_v = np.isin(active, v.ones)
    # Row t lists the bucket of each active coordinate under map t.
    maps = np.indices((n_buckets,) * m).reshape(m, -1).T if m else np.zeros((1, 0), dtype=np.int64)
    total = 0
    for j in range(n_buckets):
        hit = maps == j
        pu = hit[:, in_u].sum(axis=1) & 1
        pv = hit[:, in_v].sum(axis=1) & 1
        total += int(np.sum(pu != pv))
    return Fraction(total, maps.shape[0])


def enumerate_real_estimates(vectors: Sequence[SparseRealVector], n_buckets: int, statistic: str):
    """Exact values of an RCS estimator over every (map, signs) pair.

    ``statistic`` is ``ip`` (two vectors), ``l2`` (two vectors) or ``kway``.
    Returns the list of estimates as Fractions, computed through
    ``rcs.compress_real`` with explicit maps; dyadic inputs keep every
    float operation exact.
    """
    d = vectors[0].d
    if n_buckets ** d * 2 ** d > 1 << 20:
        raise ParameterError("enumeration too large")
    out = []
    for assignment in itertools.product(range(n_buckets), repeat=d):
        bmap = BucketMap.from_assignment(list(assignment), n_buckets)
        for signs in itertools.product((-1, 1), repeat=d):
            sv = SignVector.from_signs(signs)
            sk = rcs.compress_real_batch(vectors, bmap, sv)
            if statistic == "ip":
                val = rcs.ip(sk[0], sk[1])
            elif statistic == "l2":
                val = rcs.sq_euclidean(sk[0], sk[1])
            elif statistic == "kway":
                val = rcs.kway_ip(sk)
            else:
                raise ParameterError(f"unknown statistic {statistic!r}")
            out.append(Fraction(val))
    return out


def _moments(values):
    n = len(values)
    mean = sum(values, Fraction(0)) / n
    var = sum(((x - mean) ** 2 for x in values), Fraction(0)) / n
    return mean, var


def _exact_ip(a: SparseRealVector, b: SparseRealVector) -> Fraction:
    da = dict(zip(a.indices.tolist(), a.values.tolist()))
    return sum((Fraction(v) * Fraction(da[i]) for i, v in zip(b.indices.tolist(), b.values.tolist())
                if i in da), Fraction(0))


# ------------------------------------------------------------ experiments


def _binary_pairs_distance(a_sk, b_sk):
    """Row-aligned raw sketch distances for two equal-length sketch lists."""
    return kernels.rowwise_popcount(bcs.stack(a_sk), bcs.stack(b_sk), 0)


def _distinct_rows(rng, rows, d, width):
    """(rows, width) int64: each row is ``width`` distinct coordinates in random order.

    Draws a few extra coordinates with replacement and keeps the first
    ``width`` distinct ones per row (a uniform random ordered subset); rows
    that come up short are redrawn.
    """
    extra = 8 + 4 * width * width // max(d, 1)
    draws = rng.integers(0, d, size=(rows, width + extra))
    order = np.argsort(draws, axis=1, kind="stable")
    srt = np.take_along_axis(draws, order, axis=1)
    dup_sorted = np.zeros_like(srt, dtype=bool)
    dup_sorted[:, 1:] = srt[:, 1:] == srt[:, :-1]
    dup = np.empty_like(dup_sorted)
    np.put_along_axis(dup, order, dup_sorted, axis=1)
    fresh = ~dup
    out = np.empty((rows, width), dtype=np.int64)
    short = fresh.sum(axis=1) < width
    for i in np.flatnonzero(~short):
        out[i] = draws[i, fresh[i]][:width]
    for i in np.flatnonzero(short):
        out[i] = rng.choice(d, size=width, replace=False)
    return out


def near_pair_batch(rng, pairs: int, d: int, psi: int, r: int):
    """CSR arrays for ``pairs`` (u, v) pairs with popcount(u) = psi and d_H(u, v) < r.

    Each pair's distance s is uniform on [0, r); v clears ceil(s/2) of u's
    ones and sets floor(s/2) fresh coordinates, exactly like ``perturb``.
    Returns (u_indptr, u_indices, v_indptr, v_indices, distances).
    """
    dist = rng.integers(0, r, size=pairs)
    drop, add = (dist + 1) // 2, dist // 2
    if drop.max(initial=0) > psi or psi + add.max(initial=0) > d:
        raise ParameterError(f"cannot plant distances below {r} at psi={psi}, d={d}")
    width = psi + int(add.max(initial=0))
    coords = _distinct_rows(rng, pairs, d, width)
    col = np.arange(width)
    u_mask = np.broadcast_to(col[None, :] < psi, (pairs, width))
    v_mask = ((col[None, :] >= drop[:, None]) & u_mask) | (
        (col[None, :] >= psi) & (col[None, :] < psi + add[:, None])
    )

    def csr(mask):
        indptr = np.zeros(pairs + 1, dtype=np.int64)
        np.cumsum(mask.sum(axis=1), out=indptr[1:])
        return indptr, coords[mask]

    return (*csr(u_mask), *csr(v_mask), dist)


def _exp_thm1(cfg: ExperimentConfig, rec: _Recorder):
    # No-false-negative clause: near pairs never drift to sketch distance >= r.
    r = cfg.r
    plan = bcs.plan_pairwise_hamming(r)
    for reps in (1, 3):
        pairs = cfg.trials
        violations = 0
        total = 0
        worst = 0.0
        for run in range(cfg.runs):
            rng = generator(cfg.seed, TAG_CORPUS, 1, run, reps)
            bmap = new_bucket_map(cfg.d, plan.n_buckets, reps, seed=(cfg.seed + run) & (2 ** 64 - 1))
            u_ptr, u_idx, v_ptr, v_idx, _ = near_pair_batch(rng, pairs, cfg.d, cfg.psi, r)
            su = kernels.parity_pack_batch(u_ptr, u_idx, bmap.assignment, plan.n_buckets)
            sv = kernels.parity_pack_batch(v_ptr, v_idx, bmap.assignment, plan.n_buckets)
            dist = kernels.rowwise_popcount(su, sv, 0) / reps
            violations += int(np.sum(dist >= r))
            total += pairs
            worst = max(worst, float(dist.max()))
        rec.add(
            "near pairs: rescaled sketch distance >= r",
            _params(d=cfg.d, psi=cfg.psi, r=r, N=plan.n_buckets, R=reps, pairs=total, runs=cfg.runs),
            violations, 0, "==",
        )
        rec.add("near pairs: largest rescaled sketch distance", _params(r=r, R=reps), worst, r, "<")

    # Far clause: pairs at distance >= (1+eps) r fall below r w.p. < 1/n.
    if cfg.corpus is not None:
        corpora = [list(cfg.corpus)]
        psi = max(v.popcount for v in cfg.corpus)
        n = len(cfg.corpus)
        d = cfg.corpus[0].d
    else:
        n, psi, d = cfg.n, THM1_FAR_PSI, cfg.d
        corpora = None
    far_r = _smallest_large_deviation_r(n, cfg.eps)
    plan = bcs.plan_binary(n, psi, far_r, cfg.eps)
    runs = 1 if corpora is not None else THM1_FAR_RUNS
    bad = far = 0
    for run in range(runs):
        vecs = corpora[0] if corpora is not None else gen_sparse_corpus(n, d, psi, cfg.seed, run=run)
        bmap = new_bucket_map(d, plan.n_buckets, plan.replication, seed=(cfg.seed + 7919 * run) & (2 ** 64 - 1))
        sk = bcs.compress_binary_batch(vecs, bmap)
        sd = kernels.pairwise_popcount(bcs.stack(sk), bcs.stack(sk), 0) / plan.replication
        dense = np.stack([v.to_dense() for v in vecs]).astype(np.int64)
        true = dense @ (1 - dense).T + (1 - dense) @ dense.T
        iu = np.triu_indices(n, 1)
        mask = true[iu] >= (1 + cfg.eps) * far_r
        far += int(mask.sum())
        bad += int(np.sum(sd[iu][mask] < far_r))
    rate = bad / far if far else 0.0
    rec.add(
        "far pairs: rescaled sketch distance < r",
        _params(n=n, psi=psi, r=far_r, eps=cfg.eps, N=plan.n_buckets, R=plan.replication,
                far_pairs=far, runs=runs, regime=plan.regime.value),
        rate, 1.0 / n, "<=", RATE_SLACK,
    )


def _smallest_large_deviation_r(n, eps):
    """Smallest integer r with eps * r > 3 log2 n."""
    return math.floor(3 * math.log2(n) / eps) + 1


def _exp_thm2(cfg: ExperimentConfig, rec: _Recorder):
    n, d, psi, eps = cfg.n, cfg.d, cfg.psi, cfg.eps
    r = cfg.r if cfg.r is not None else _smallest_large_deviation_r(n, eps)
    if r > psi and cfg.corpus is None:
        raise ParameterError(f"no pair can have IP >= r={r} with psi={psi}")
    plan = bcs.plan_binary(n, psi, r, eps)
    if plan.replication != 1:
        raise ParameterError("inner-product check needs an R = 1 plan")
    ok = total = 0
    worst = 0.0
    runs = 1 if cfg.corpus is not None else cfg.runs
    for run in range(runs):
        if cfg.corpus is not None:
            vecs = list(cfg.corpus)
            d = vecs[0].d
        else:
            rng = generator(cfg.seed, TAG_CORPUS, 2, run)
            half = n // 2
            base = gen_sparse_corpus(half, d, psi, cfg.seed, run=10_000 + run)
            partners = []
            for u in base:
                keep = rng.choice(u.ones, size=r, replace=False)
                extra = _random_support(rng, d, psi - r, exclude=u.ones)
                partners.append(SparseBinaryVector(d, np.union1d(keep, extra)))
            vecs = base + partners
            if n > 2 * half:
                vecs += gen_sparse_corpus(n - 2 * half, d, psi, cfg.seed, run=20_000 + run)
        bmap = new_bucket_map(d, plan.n_buckets, 1, seed=(cfg.seed + 104729 * run) & (2 ** 64 - 1))
        sk = bcs.compress_binary_batch(vecs, bmap)
        sip = kernels.pairwise_popcount(bcs.stack(sk), bcs.stack(sk), 1)
        dense = np.stack([v.to_dense() for v in vecs]).astype(np.int64)
        tip = dense @ dense.T
        iu = np.triu_indices(len(vecs), 1)
        mask = tip[iu] >= r
        t, s = tip[iu][mask], sip[iu][mask]
        total += int(mask.sum())
        ok += int(np.sum(((1 - eps) * t <= s) & (s <= (1 + eps) * t)))
        if t.size:
            worst = max(worst, float(np.max(np.abs(s - t) / t)))
    rate = ok / total if total else 1.0
    p = _params(n=len(vecs), psi=psi, r=r, eps=eps, N=plan.n_buckets, pairs=total, runs=runs)
    rec.add("pairs with IP >= r: sketch IP within (1 +- eps) IP", p, rate, 1 - 1.0 / n, ">=", RATE_SLACK)
    # With eps >= 1 the check above cannot fail (sketch IP <= psi <= 2 IP);
    # the worst relative error says how much room was actually used.
    rec.add("largest |sketch IP - IP| / IP", p, worst, eps, "<=", info=True)


def _exp_thm3(cfg: ExperimentConfig, rec: _Recorder):
    # Exact odd-bucket formula against exhaustive enumeration.
    mismatches = instances = 0
    for n_buckets in range(1, 5):
        for m in range(0, 9):
            for psi_u in range(0, m + 1):
                d = m
                both = m - psi_u
                u_only = (psi_u + 1) // 2
                u = SparseBinaryVector(max(d, 1), list(range(both + u_only)))
                v = SparseBinaryVector(max(d, 1), list(range(both)) + list(range(both + u_only, m)))
                assert bcs.unmatched_count(u, v) == psi_u
                got = brute_force_expectation(u, v, n_buckets)
                want = bcs.expected_compressed_hamming(psi_u, n_buckets, exact=True)
                instances += 1
                mismatches += got != want
    rec.add("enumerated mean sketch distance != N*P_odd (exact)",
            _params(N="1..4", active="0..8", instances=instances), mismatches, 0, "==")

    # Expectation clause for pairs at distance 4r with N = 8 r^2.
    for r in (2, 5, 10):
        plan = bcs.plan_pairwise_hamming(r)
        psi_u = 4 * r
        assign = trial_assignments(cfg.seed, cfg.trials, psi_u, plan.n_buckets, 3, r)
        dist = kernels.odd_counts_trials(assign, plan.n_buckets)
        mean = float(dist.mean())
        half = 3.0 * float(dist.std(ddof=1)) / math.sqrt(cfg.trials)
        p = _params(r=r, N=plan.n_buckets, psi_u=psi_u, trials=cfg.trials)
        rec.add("lower 3-sigma band of mean sketch distance > 2r", p, mean - half, 2 * r, ">")
        exact = bcs.expected_compressed_hamming(psi_u, plan.n_buckets)
        rec.add("|mean - exact expectation| within 3 sigma", p, abs(mean - exact), half, "<=")


def _exp_lemma3(cfg: ExperimentConfig, rec: _Recorder):
    psi, n_buckets, eps, r = cfg.psi, cfg.N, cfg.eps, cfg.r
    # Worst case: disjoint supports give 2 psi active coordinates.
    assign = trial_assignments(cfg.seed, cfg.trials, 2 * psi, n_buckets, 4)
    collided = kernels.collided_positions_trials(assign, n_buckets)
    rate = float(np.mean(collided > eps * r))
    bound = bcs.corruption_bound(psi, n_buckets, eps, r)
    p = _params(psi=psi, N=n_buckets, eps_r=eps * r, trials=cfg.trials)
    rec.add("P[> eps*r active positions in corrupted buckets]", p, rate, bound, "<=")
    buckets = _corrupted_buckets(assign, n_buckets)
    rec.add("P[> eps*r corrupted buckets]", p, float(np.mean(buckets > eps * r)), bound, "<=")


def _corrupted_buckets(assign, n_buckets):
    s = np.sort(assign, axis=1)
    eq = s[:, 1:] == s[:, :-1]
    # A bucket is corrupted once per run of equal neighbours.
    starts = eq & np.concatenate([np.ones((s.shape[0], 1), bool), ~eq[:, :-1]], axis=1)
    return starts.sum(axis=1)


def _fixed_real_pair(d, seed):
    """||a||^2 = ||b||^2 = 4, <a,b> = 3, ||a-b||^2 = 2; dyadic values."""
    rng = generator(seed, TAG_CORPUS, 5)
    pos = np.sort(rng.choice(d, size=20, replace=False))
    a = SparseRealVector(d, pos[:16], np.full(16, 0.5))
    b_idx = np.concatenate([pos[:12], pos[16:]])
    b = SparseRealVector(d, np.sort(b_idx), np.full(16, 0.5))
    return a, b


def _restrict(vectors, support):
    out = np.zeros((len(vectors), support.size))
    for q, v in enumerate(vectors):
        out[q, np.searchsorted(support, v.indices)] = v.values
    return out


def _real_trials(cfg, vectors, n_buckets, stream):
    support = np.unique(np.concatenate([v.indices for v in vectors]))
    vals = _restrict(vectors, support)
    assign = trial_assignments(cfg.seed, cfg.trials, support.size, n_buckets, stream)
    signs = trial_signs(cfg.seed, cfg.trials, support.size, stream)
    return kernels.product_sums_trials(assign, signs, vals, n_buckets)


def _exp_rcs_ip(cfg: ExperimentConfig, rec: _Recorder):
    _rcs_enumeration(rec, cfg.seed)
    a, b = _fixed_real_pair(cfg.d, cfg.seed)
    cap = max(a.sq_norm(), b.sq_norm())
    if cap > cfg.cap_psi:
        raise ParameterError("fixed pair exceeds Psi")
    plan = rcs.plan_real(cfg.cap_psi, cfg.eps, 2)
    truth = baselines.exact_ip(a, b)
    est = _real_trials(cfg, [a, b], plan.n_buckets, 6)
    p = _params(Psi=cfg.cap_psi, eps=cfg.eps, N=plan.n_buckets, ip=truth, trials=cfg.trials)
    rec.add("P[|ip - <a,b>| > eps]", p, float(np.mean(np.abs(est - truth) > cfg.eps)),
            0.1, "<=", RATE_SLACK)
    _mean_band(rec, "ip", p, est, truth)


def _mean_band(rec, name, p, est, truth):
    half = 3.0 * float(est.std(ddof=1)) / math.sqrt(est.size)
    rec.add(f"|mean {name} - truth| within 3 sigma", p, abs(float(est.mean()) - truth), half, "<=")


def _dyadic_pairs(seed, count):
    """Seeded random pairs with entries in {-2, -1.75, ..., 2} (exact in binary)."""
    rng = generator(seed, TAG_CORPUS, 15)
    out = []
    for _ in range(count):
        d = int(rng.integers(2, 6))
        a = rng.integers(-8, 9, size=d) / 4.0
        b = rng.integers(-8, 9, size=d) / 4.0
        if not a.any() or not b.any():
            continue
        out.append((tuple(a), tuple(b)))
    return out


def rcs_enumeration_cases(seed=0):
    """The declared input family for the exact RCS enumeration checks."""
    fixed = [
        ((1, 1, 0, 0), (0, 1, 1, 0)),
        ((1, 0.5, 0, -0.75, 2), (0.25, 1, 1, 0, -1)),
        ((0.5, -1.5, 1, 0.25), (0.5, -1.5, 1, 0.25)),
    ]
    return fixed + _dyadic_pairs(seed, 12)


def exact_ip_variance(a: SparseRealVector, b: SparseRealVector, n_buckets: int) -> Fraction:
    """Var[ip] = sum_{i<j} (a_i b_j + a_j b_i)^2 / N.

    Each unordered colliding pair contributes one product of two signs,
    and distinct pairs are uncorrelated.
    """
    da = a.to_dense().tolist()
    db = b.to_dense().tolist()
    d = len(da)
    total = Fraction(0)
    for i in range(d):
        for j in range(i + 1, d):
            total += (Fraction(da[i]) * Fraction(db[j]) + Fraction(da[j]) * Fraction(db[i])) ** 2
    return total / n_buckets


def _rcs_enumeration(rec: _Recorder, seed=0):
    bad_mean = bad_var = bad_exact = checked = 0
    worst = Fraction(0)
    for da, db in rcs_enumeration_cases(seed):
        a = SparseRealVector.from_dense(da)
        b = SparseRealVector.from_dense(db)
        truth = _exact_ip(a, b)
        bound_num = a.sq_norm_exact() * b.sq_norm_exact()
        for n_buckets in (1, 2, 3):
            mean, var = _moments(enumerate_real_estimates([a, b], n_buckets, "ip"))
            checked += 1
            bad_mean += mean != truth
            bad_var += var > bound_num / n_buckets
            bad_exact += var != exact_ip_variance(a, b, n_buckets)
            if bound_num:
                worst = max(worst, var * n_buckets / bound_num)
    p = _params(d="2..5", N="1..3", cases=checked)
    rec.add("enumerated E[ip] != <a,b> (exact)", p, bad_mean, 0, "==")
    rec.add("enumerated Var[ip] > |a|^2 |b|^2 / N (exact)", p, bad_var, 0, "==")
    rec.add("largest Var[ip] * N / (|a|^2 |b|^2)", p, worst, 1, "<=", info=True)
    rec.add("enumerated Var[ip] != sum_{i<j} (a_i b_j + a_j b_i)^2 / N", p, bad_exact, 0, "==")


def _exp_rcs_l2(cfg: ExperimentConfig, rec: _Recorder):
    a, b = _fixed_real_pair(cfg.d, cfg.seed)
    plan = rcs.plan_real(cfg.cap_psi, cfg.eps, 2)
    diff = a - b
    truth = baselines.exact_sq_euclidean(a, b)
    est = _real_trials(cfg, [diff, diff], plan.n_buckets, 7)
    p = _params(Psi=cfg.cap_psi, eps=cfg.eps, N=plan.n_buckets, l2=truth, trials=cfg.trials)
    rec.add("P[|sq_euclidean - |a-b|^2| > eps]", p, float(np.mean(np.abs(est - truth) > cfg.eps)),
            0.1, "<=", RATE_SLACK)
    _mean_band(rec, "sq_euclidean", p, est, truth)
    # Exact enumeration of the mean.
    ea = SparseRealVector.from_dense((1, 0.5, 0, -1))
    eb = SparseRealVector.from_dense((0, 0.5, 1, 0.25))
    mean, _ = _moments(enumerate_real_estimates([ea, eb], 2, "l2"))
    want = Fraction(baselines.exact_sq_euclidean(ea, eb))
    rec.add("enumerated E[sq_euclidean] - |a-b|^2 (exact)", _params(d=4, N=2), mean - want, 0, "==")


def _kway_vectors(d, k):
    """k vectors of squared norm 1 sharing three coordinates."""
    out = []
    for m in range(k):
        idx = [0, 1, 2, 3 + m]
        out.append(SparseRealVector(d, idx, [0.5, 0.5, 0.5, 0.5 if m % 2 else -0.5]))
    return out


def _exp_kway(cfg: ExperimentConfig, rec: _Recorder):
    k = cfg.k
    if k % 2:
        raise ParameterError("the k-way acceptance check runs for even k; odd k is reported separately")
    vecs = _kway_vectors(cfg.d, k)
    truth = rcs.exact_kway(vecs)
    plan_n = rcs.plan_real(cfg.cap_psi, cfg.eps, k).n_buckets
    est = _real_trials(cfg, vecs, cfg.N, 8)
    p = _params(k=k, Psi=cfg.cap_psi, eps=cfg.eps, N=cfg.N, truth=truth, trials=cfg.trials)
    rec.add("P[|kway - <a1..ak>| > eps]", p, float(np.mean(np.abs(est - truth) > cfg.eps)),
            0.1, "<=", RATE_SLACK)
    rec.add("sample variance of kway estimate", p, float(est.var(ddof=1)), info=True)
    if plan_n != cfg.N:
        est_plan = _real_trials(cfg, vecs, plan_n, 9)
        rec.add("P[|kway - <a1..ak>| > eps] at the planner's N",
                _params(k=k, N=plan_n, trials=cfg.trials),
                float(np.mean(np.abs(est_plan - truth) > cfg.eps)), 0.1, "<=", info=True)
    odd = vecs[:3]
    est3 = _real_trials(cfg, odd, cfg.N, 10)
    half = 3.0 * float(est3.std(ddof=1)) / math.sqrt(cfg.trials)
    rec.add("k=3: |sample mean| within 3 sigma of 0 (odd-k estimator is centred at 0)",
            _params(k=3, N=cfg.N, exact=rcs.exact_kway(odd), trials=cfg.trials),
            abs(float(est3.mean())), half, "<=")


def _exp_randomness(cfg: ExperimentConfig, rec: _Recorder):
    rng = generator(cfg.seed, TAG_CORPUS, 11)
    bad = 0
    for t in range(cfg.trials):
        d = int(rng.integers(1, 5001))
        n_buckets = int(rng.integers(1, 1 << 20))
        reps = int(rng.integers(1, 9))
        bmap = new_bucket_map(d, n_buckets, reps, seed=int(rng.integers(0, 2 ** 63)))
        width = 0
        while (1 << width) < n_buckets:
            width += 1
        got = randomness_bits(bmap, with_signs=bool(t % 2))
        bad += got.bucket_bits != d * reps * width
        bad += got.sign_bits != (d if t % 2 else 0)
    rec.add("receipts != d*R*ceil(log2 N) (+d)", _params(configs=cfg.trials), bad, 0, "==")
    d = 10_000
    for k in (2, 16, 96, 1024):
        jl_bits = baselines.JlMatrixSpec(d, k).randomness_bits
        bcs_bits = randomness_bits(BucketMap.from_assignment(np.zeros(d, dtype=np.int64), k)).bucket_bits
        rec.add("JL sign bits > bucket-map bits", _params(d=d, k=k, N=k, bcs_bits=bcs_bits),
                jl_bits, bcs_bits, ">")


def _exp_ann(cfg: ExperimentConfig, rec: _Recorder):
    n, d, psi, r, c = cfg.n, cfg.d, cfg.psi, cfg.r, cfg.c
    plan = bcs.plan_pairwise_hamming(r)
    params = ann.lsh_params(n + 1, r, c, plan.n_buckets)
    hits = unsound = checked_max = 0
    for run in range(cfg.runs):
        rng = generator(cfg.seed, TAG_CORPUS, 12, run)
        q = SparseBinaryVector(d, _random_support(rng, d, psi))
        near = perturb(rng, q, r - 1)
        far = []
        while len(far) < n:
            v = SparseBinaryVector(d, _random_support(rng, d, psi))
            if baselines.exact_hamming(q, v) > c * r:
                far.append(v)
        planted_id = int(rng.integers(0, n + 1))
        data = far[:planted_id] + [near] + far[planted_id:]
        bmap = new_bucket_map(d, plan.n_buckets, 1, seed=(cfg.seed + run) & (2 ** 64 - 1))
        sk = bcs.compress_binary_batch(data, bmap)
        index = ann.build_index(sk, params, seed=cfg.seed + run)
        qs = bcs.compress_binary(q, bmap)
        probes = [qs] + [sk[int(i)] for i in rng.integers(0, n + 1, size=3)]
        for t, probe in enumerate(probes):
            got, checked = ann.query_with_stats(index, probe, r, c)
            checked_max = max(checked_max, checked)
            if got is not None and bcs.hamming_rescaled(sk[got], probe) > c * r:
                unsound += 1
            if t == 0 and got == planted_id:
                hits += 1
    p = _params(n=n, d=d, psi=psi, r=r, c=c, N=plan.n_buckets, K=params.K, L=params.L,
                rho=round(params.rho, 6), runs=cfg.runs)
    rec.add("planted neighbour recall", p, hits / cfg.runs, 0.9, ">=")
    rec.add("unsound answers (sketch distance > c*r)", p, unsound, 0, "==")
    rec.add("max candidates checked per query", p, checked_max, params.candidate_cap, "<=")


def _exp_baselines(cfg: ExperimentConfig, rec: _Recorder):
    d = 100_000
    rng = generator(cfg.seed, TAG_CORPUS, 13)
    sup = _random_support(rng, d, 40)
    u = SparseBinaryVector(d, np.sort(sup[:30]))
    v = SparseBinaryVector(d, np.sort(sup[10:]))
    j = baselines.jaccard(u, v)
    t = cfg.trials
    frac = baselines.minhash_match_fraction(
        baselines.minhash_signature(u, t, cfg.seed), baselines.minhash_signature(v, t, cfg.seed)
    )
    rec.add("|minhash match fraction - Jaccard|", _params(jaccard=j, t=t), abs(frac - j), 0.015, "<=")

    k = baselines.jl_dimension(cfg.n, cfg.eps)
    jl_d = 1000
    good = 0
    for run in range(cfg.runs):
        i, i2 = rng.choice(jl_d, size=2, replace=False)
        a = SparseRealVector(jl_d, [i], [1.0])
        b = SparseRealVector(jl_d, [i2], [1.0])
        spec = baselines.JlMatrixSpec(jl_d, k, seed=(cfg.seed + run) & (2 ** 64 - 1))
        diff = baselines.jl_project(a, spec) - baselines.jl_project(b, spec)
        est = float(diff @ diff)
        good += (1 - cfg.eps) * 2 <= est <= (1 + cfg.eps) * 2
    rec.add("JL: fraction of pairs within (1 +- eps) of |a-b|^2 = 2",
            _params(n=cfg.n, eps=cfg.eps, k=k, seeds=cfg.runs), good / cfg.runs, 0.9, ">=")


def _exp_streaming(cfg: ExperimentConfig, rec: _Recorder):
    rng = generator(cfg.seed, TAG_CORPUS, 14)
    bin_bad = real_bad = 0
    worst = 0.0
    for t in range(cfg.trials):
        d = int(rng.integers(1, 65))
        n_buckets = int(rng.integers(1, 65))
        reps = int(rng.integers(1, 5))
        seed = int(rng.integers(0, 2 ** 63))
        bmap = new_bucket_map(d, n_buckets, reps, seed)
        u = SparseBinaryVector(d, [])
        sk = bcs.compress_binary(u, bmap)
        for i in rng.integers(0, d, size=int(rng.integers(1, 80))):
            sk = bcs.update_binary(sk, bmap, int(i))
            u = u.toggled(int(i))
        bin_bad += sk != bcs.compress_binary(u, bmap)

        rmap = new_bucket_map(d, n_buckets, 1, seed)
        signs = new_sign_vector(d, seed)
        dense = np.zeros(d)
        rs = rcs.compress_real(SparseRealVector(d, [], []), rmap, signs)
        for i in rng.integers(0, d, size=int(rng.integers(1, 80))):
            delta = float(rng.normal())
            rs = rcs.update_real(rs, rmap, signs, int(i), delta)
            dense[i] += delta
        batch = rcs.compress_real(SparseRealVector.from_dense(dense), rmap, signs)
        scale = max(1.0, float(np.abs(batch.values).max(initial=0.0)))
        err = float(np.abs(rs.values - batch.values).max(initial=0.0)) / scale
        worst = max(worst, err)
        real_bad += err > 1e-9
    rec.add("binary streams != batch sketch (bit-exact)", _params(streams=cfg.trials), bin_bad, 0, "==")
    rec.add("real streams off batch sketch by > 1e-9 relative", _params(streams=cfg.trials), real_bad, 0, "==")
    rec.add("worst relative deviation of real streams", _params(streams=cfg.trials), worst, 1e-9, "<=")


_DISPATCH = {
    "thm1": _exp_thm1,
    "thm2": _exp_thm2,
    "thm3": _exp_thm3,
    "lemma3": _exp_lemma3,
    "rcs_ip": _exp_rcs_ip,
    "rcs_l2": _exp_rcs_l2,
    "kway": _exp_kway,
    "randomness": _exp_randomness,
    "ann_recall": _exp_ann,
    "baselines": _exp_baselines,
    "streaming": _exp_streaming,
}


def run_experiment(cfg: ExperimentConfig) -> Report:
    cfg = cfg.resolved()
    rec = _Recorder(cfg.tag)
    t0 = time.perf_counter()
    _DISPATCH[cfg.tag](cfg, rec)
    return Report(cfg.tag, cfg, rec.rows, time.perf_counter() - t0)
