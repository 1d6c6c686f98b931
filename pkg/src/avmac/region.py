"""Rate regions: per-prior pentagons, robust (min over priors) bounds, inner
approximations of the capacity region, the deterministic-coding dichotomy,
the no-conferencing verdicts and the full-cooperation thresholds.

All rates are in bits per channel use.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .channel import ChannelSpec, check_prior
from .errors import BudgetExceeded, HypothesisViolation, InputError
from .infotheory import InputPolicy, MiEvaluator, joint_distribution, mi_terms
from .simplex import pgd_minimize, project_simplex, simplex_grid
from .symmetrizability import DEFAULT_TOL, SymmetrizerCertificate, check_symmetrizable

log = logging.getLogger(__name__)

ACTIVE_EPS = 1e-4
HULL_EPS = 1e-12
# hull vertices closer than this (or turning by less) are merged
MERGE_EPS = 1e-9


# ---------------------------------------------------------------- pentagons

def pentagon_vertices(b1, b2, b3) -> np.ndarray:
    """Vertices of {R >= 0 : R1 <= b1, R2 <= b2, R1 + R2 <= b3}, counter-clockwise."""
    b1, b2, b3 = max(b1, 0.0), max(b2, 0.0), max(b3, 0.0)
    r1 = min(b1, b3)
    r2 = min(b2, b3)
    pts = [(0.0, 0.0), (r1, 0.0), (r1, min(b2, b3 - r1)), (min(b1, b3 - r2), r2), (0.0, r2)]
    out = []
    for p in pts:
        if not out or abs(p[0] - out[-1][0]) > HULL_EPS or abs(p[1] - out[-1][1]) > HULL_EPS:
            out.append(p)
    if len(out) > 1 and abs(out[-1][0]) <= HULL_EPS and abs(out[-1][1]) <= HULL_EPS:
        out.pop()
    return np.array(out)


@dataclass(frozen=True)
class RatePolytope:
    """Half-planes a1*R1 + a2*R2 <= b plus R1, R2 >= 0."""

    constraints: tuple

    @classmethod
    def from_bounds(cls, b1, b2, b3):
        return cls(((1, 0, float(b1)), (0, 1, float(b2)), (1, 1, float(b3))))

    @property
    def bounds(self):
        d = {(a1, a2): b for a1, a2, b in self.constraints}
        return d[(1, 0)], d[(0, 1)], d[(1, 1)]

    def vertices(self) -> np.ndarray:
        return pentagon_vertices(*self.bounds)

    def contains(self, point, tol=1e-12) -> bool:
        r1, r2 = point
        if r1 < -tol or r2 < -tol:
            return False
        return all(a1 * r1 + a2 * r2 <= b + tol for a1, a2, b in self.constraints)

    def support(self, w) -> float:
        return float(np.max(self.vertices() @ np.asarray(w)))


def rate_region(p: InputPolicy, ch: ChannelSpec, q, c1: float, c2: float) -> RatePolytope:
    if c1 < 0 or c2 < 0:
        raise InputError("conferencing capacities must be nonnegative")
    t = mi_terms(joint_distribution(p, ch, q))
    return RatePolytope.from_bounds(t.i_x_given_yu + c1, t.i_y_given_xu + c2,
                                    min(t.i_xy_given_u + c1 + c2, t.i_xy))


# ---------------------------------------------------------------- min over q

@dataclass(frozen=True)
class QOptions:
    grid: int = 128
    pgd_iters: int = 64
    pgd_restarts: int = 8
    grid_max_states: int = 3
    sample_points: int = 256
    seed: int = 0


@lru_cache(maxsize=32)
def _q_candidates(ns, grid, grid_max_states, sample_points, seed):
    if ns <= grid_max_states:
        return simplex_grid(ns, grid)
    rng = np.random.default_rng([seed, ns, 7])
    pts = np.vstack([np.eye(ns), np.full((1, ns), 1 / ns), rng.dirichlet(np.ones(ns), size=sample_points)])
    pts.setflags(write=False)
    return pts


def q_candidates(ns: int, qopts: QOptions) -> np.ndarray:
    """Cross-check prior set: the lattice grid for few states, else a seeded sample."""
    return _q_candidates(ns, qopts.grid, qopts.grid_max_states, qopts.sample_points, qopts.seed)


def _pgd_starts(ns, qopts):
    rng = np.random.default_rng([qopts.seed, ns, 11])
    rows = [np.full(ns, 1 / ns)] + list(np.eye(ns))
    rows = rows[:qopts.pgd_restarts]
    while len(rows) < qopts.pgd_restarts:
        rows.append(rng.dirichlet(np.ones(ns)))
    return np.array(rows)


def minimize_terms(ev: MiEvaluator, qopts: QOptions, terms=(0, 1, 2, 3), use_pgd=True):
    """Minimum over priors of each requested MI term, with the minimizers.

    Projected gradient from several starts, cross-checked on the candidate
    set; each term keeps whichever is smaller.
    """
    ns = ev.ns
    terms = list(terms)
    if ns == 1:
        v = ev.values(np.ones((1, 1)))[0]
        return v[terms], np.ones((len(terms), 1))
    cand = q_candidates(ns, qopts)
    gv = ev.values(cand)[:, terms]
    gi = np.argmin(gv, axis=0)
    mins = gv[gi, np.arange(len(terms))]
    argmins = cand[gi].copy()
    if not use_pgd or qopts.pgd_iters <= 0:
        return mins, argmins
    starts = _pgd_starts(ns, qopts)
    K = len(starts)
    rows_term = np.repeat(terms, K)
    idx = np.arange(rows_term.size)

    def fun(Q):
        vals, grads = ev.values_and_grad(Q)
        return vals[idx, rows_term], grads[idx, rows_term]

    q, val = pgd_minimize(fun, np.tile(starts, (len(terms), 1)), qopts.pgd_iters)
    for k in range(len(terms)):
        seg = slice(k * K, (k + 1) * K)
        j = int(np.argmin(val[seg]))
        if val[seg][j] < mins[k]:
            mins[k] = val[seg][j]
            argmins[k] = q[seg][j]
    return mins, argmins


@dataclass(frozen=True, eq=False)
class RobustBounds:
    """Minima over priors of the four MI terms, shifted by the conferencing capacities.

    ``exact`` is False when only the cross-check prior set was searched; such
    values are upper estimates of the true minima.
    """

    mins: np.ndarray
    argmins: np.ndarray
    c1: float
    c2: float
    exact: bool = True

    @property
    def b1(self):
        return float(self.mins[0] + self.c1)

    @property
    def b2(self):
        return float(self.mins[1] + self.c2)

    @property
    def b3a(self):
        return float(self.mins[2] + self.c1 + self.c2)

    @property
    def b3b(self):
        return float(self.mins[3])

    @property
    def sum_bound(self):
        return min(self.b3a, self.b3b)

    def as_tuple(self):
        return self.b1, self.b2, self.b3a, self.b3b

    def polytope(self) -> RatePolytope:
        return RatePolytope.from_bounds(self.b1, self.b2, self.sum_bound)

    def vertices(self):
        return pentagon_vertices(self.b1, self.b2, self.sum_bound)

    def shifted(self, c1, c2):
        return replace(self, c1=c1, c2=c2)


def robust_bounds(p: InputPolicy, ch: ChannelSpec, c1: float, c2: float, qopts: QOptions | None = None) -> RobustBounds:
    if c1 < 0 or c2 < 0:
        raise InputError("conferencing capacities must be nonnegative")
    qopts = qopts or QOptions()
    mins, argmins = minimize_terms(MiEvaluator.for_policy(p, ch), qopts)
    return RobustBounds(mins, argmins, c1, c2, True)


# ---------------------------------------------------------------- polygon geometry

def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """Counter-clockwise hull (monotone chain), starting at the lowest-left point.

    Collinear points are dropped. For point sets in the positive quadrant that
    contain the origin the result starts at (0, 0).
    """
    pts = sorted(set(map(tuple, np.asarray(points, dtype=np.float64).reshape(-1, 2))))
    merged = []
    for p in pts:
        if not any(max(abs(p[0] - m[0]), abs(p[1] - m[1])) <= MERGE_EPS for m in merged[-8:]):
            merged.append(p)
    pts = merged
    if len(pts) <= 1:
        return np.array(pts).reshape(-1, 2)
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= MERGE_EPS:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= MERGE_EPS:
            upper.pop()
        upper.append(p)
    out = lower[:-1] + upper[:-1]
    return np.array(out)


def is_convex_polygon(vertices, tol=1e-12) -> bool:
    v = np.asarray(vertices)
    k = len(v)
    if k < 3:
        return True
    for i in range(k):
        if _cross(v[i], v[(i + 1) % k], v[(i + 2) % k]) < -tol:
            return False
    return True


def polygon_contains(vertices, point, tol=1e-9) -> bool:
    v = np.asarray(vertices, dtype=np.float64).reshape(-1, 2)
    pt = np.asarray(point, dtype=np.float64)
    if len(v) == 1:
        return bool(np.linalg.norm(pt - v[0]) <= tol)
    if len(v) == 2:
        a, b = v
        d = b - a
        t = np.clip(np.dot(pt - a, d) / np.dot(d, d), 0.0, 1.0)
        return bool(np.linalg.norm(a + t * d - pt) <= tol)
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        edge = np.linalg.norm(b - a)
        if edge > 0 and _cross(a, b, pt) / edge < -tol:
            return False
    return True


def region_contains(outer, inner, tol=1e-9) -> bool:
    return all(polygon_contains(outer, p, tol) for p in np.asarray(inner).reshape(-1, 2))


# ---------------------------------------------------------------- region search

@dataclass(frozen=True)
class RegionOptions:
    nu: int | None = None
    p_restarts: int = 256
    fan: int = 33
    sweeps: int = 6
    q: QOptions = field(default_factory=QOptions)
    seed: int = 0
    max_evals: int | None = None
    refine: bool = True
    anchor_zero: bool = True


def default_nu(ch: ChannelSpec) -> int:
    """Cardinality bound for the auxiliary variable U."""
    return min(ch.nx * ch.ny + 2, ch.nz + 3)


@dataclass(frozen=True, eq=False)
class BoundRecord:
    index: int
    origin: str
    bounds: RobustBounds


@dataclass(eq=False)
class RegionApproximation:
    inner_vertices: np.ndarray
    bound_records: list
    resolution: dict
    conferencing: tuple
    policies: list
    budget_exhausted: bool = False
    evaluations: int = 0

    def max_sum_rate(self) -> float:
        return float(np.max(self.inner_vertices.sum(axis=1)))

    def max_rate(self, user: int) -> float:
        return float(np.max(self.inner_vertices[:, user]))

    def support(self, w) -> float:
        return float(np.max(self.inner_vertices @ np.asarray(w, dtype=np.float64)))

    def contains(self, point, tol=1e-9) -> bool:
        return polygon_contains(self.inner_vertices, point, tol)

    def axis_point(self) -> float:
        """Largest R with (R, 0) in the region."""
        return float(max((v[0] for v in self.inner_vertices if abs(v[1]) <= HULL_EPS), default=0.0))


def _support(b, w):
    return float(np.max(pentagon_vertices(*b) @ w))


def _bounds_from_mins(m, c1, c2):
    return m[0] + c1, m[1] + c2, min(m[2] + c1 + c2, m[3])


class _Search:
    def __init__(self, ch, opts: RegionOptions):
        self.ch = ch
        self.opts = opts
        self.evals = 0
        self.exhausted = False

    def fast_mins(self, p: InputPolicy):
        self.evals += 1
        if self.opts.max_evals is not None and self.evals > self.opts.max_evals:
            self.exhausted = True
        ev = MiEvaluator.for_policy(p, self.ch)
        mins, _ = minimize_terms(ev, self.opts.q, use_pgd=False)
        return mins

    def ascend(self, p, mins, score):
        """Coordinate ascent over the blocks p0, p1(.|u), p2(.|u) by vertex mixing."""
        best = score(mins)
        params = [p.p0.copy(), p.p1.copy(), p.p2.copy()]
        blocks = [(0, None)] + [(1, u) for u in range(p.nu)] + [(2, u) for u in range(p.nu)]
        eta = 0.5
        for _ in range(self.opts.sweeps):
            improved = False
            for which, u in blocks:
                vec = params[which] if u is None else params[which][u]
                for i in range(vec.size):
                    if self.exhausted:
                        return p, mins, best
                    cand = (1 - eta) * vec
                    cand[i] += eta
                    if np.max(np.abs(cand - vec)) < 1e-12:
                        continue
                    trial = [a.copy() for a in params]
                    if u is None:
                        trial[which] = cand
                    else:
                        trial[which][u] = cand
                    tp = InputPolicy(*trial)
                    tm = self.fast_mins(tp)
                    ts = score(tm)
                    if ts > best + 1e-12:
                        best, p, mins, params, improved = ts, tp, tm, trial, True
                        vec = params[which] if u is None else params[which][u]
            if not improved:
                eta /= 2
                if eta < 1 / 64:
                    break
        return p, mins, best


def _sample_policies(ch, nu, count, seed):
    out = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        conc = 1.0 if i % 2 == 0 else 0.25
        out.append(InputPolicy.random(nu, ch.nx, ch.ny, rng, conc))
    return out


def _fan(k):
    th = np.linspace(0.0, np.pi / 2, k) if k > 1 else np.array([np.pi / 4])
    return np.stack([np.cos(th), np.sin(th)], axis=1)


def _hull_from(policies, mins_list, exact, c1, c2, ch, qopts, count_evals=None):
    """Hull of all pentagons, computing full robust bounds lazily for the
    policies that end up supporting hull vertices."""
    mins_list = list(mins_list)
    argmins = [None] * len(policies)
    while True:
        pts, owner = [np.zeros((1, 2))], [-1]
        for i, m in enumerate(mins_list):
            v = pentagon_vertices(*_bounds_from_mins(m, c1, c2))
            pts.append(v)
            owner.extend([i] * len(v))
        allpts = np.vstack(pts)
        owner = np.array(owner)
        hull = convex_hull(allpts)
        todo = set()
        for hv in hull:
            hit = np.flatnonzero(np.max(np.abs(allpts - hv), axis=1) <= MERGE_EPS)
            todo.update(int(owner[h]) for h in hit if owner[h] >= 0 and not exact[owner[h]])
        if not todo:
            return hull, mins_list, argmins
        for i in sorted(todo):
            ev = MiEvaluator.for_policy(policies[i], ch)
            m, a = minimize_terms(ev, qopts)
            mins_list[i] = m
            argmins[i] = a
            exact[i] = True
            if count_evals is not None:
                count_evals()


def region_from_policies(ch: ChannelSpec, policies, c1: float, c2: float,
                         qopts: QOptions | None = None, origins=None) -> RegionApproximation:
    """Inner approximation from a fixed list of input policies (no search)."""
    if c1 < 0 or c2 < 0:
        raise InputError("conferencing capacities must be nonnegative")
    qopts = qopts or QOptions()
    mins = [minimize_terms(MiEvaluator.for_policy(p, ch), qopts, use_pgd=False)[0] for p in policies]
    exact = [ch.ns == 1] * len(policies)
    hull, mins, argmins = _hull_from(policies, mins, exact, c1, c2, ch, qopts)
    origins = origins or ["given"] * len(policies)
    records = [BoundRecord(i, origins[i], RobustBounds(mins[i], argmins[i], c1, c2, exact[i]))
               for i in range(len(policies))]
    res = {"q_grid": qopts.grid, "pgd_iters": qopts.pgd_iters, "pgd_restarts": qopts.pgd_restarts,
           "policies": len(policies)}
    return RegionApproximation(hull, records, res, (c1, c2), list(policies))


def capacity_region(ch: ChannelSpec, c1: float, c2: float, opts: RegionOptions | None = None,
                    extra_policies=()) -> RegionApproximation:
    """Inner approximation of the capacity region for conferencing capacities (c1, c2).

    Random input policies are sampled, then for each direction of a weight
    fan the best sample is refined by coordinate ascent on the weighted sum
    rate. The result is the convex hull of all candidate pentagons. When the
    evaluation budget runs out the best-so-far region is returned with
    ``budget_exhausted`` set.
    """
    if c1 < 0 or c2 < 0:
        raise InputError("conferencing capacities must be nonnegative")
    opts = opts or RegionOptions()
    nu = opts.nu or default_nu(ch)
    if nu > default_nu(ch):
        raise InputError(f"nu={nu} exceeds the cardinality bound {default_nu(ch)}")
    search = _Search(ch, opts)
    policies = _sample_policies(ch, nu, opts.p_restarts, opts.seed) + list(extra_policies)
    origins = ["sample"] * opts.p_restarts + ["given"] * len(extra_policies)
    mins = [search.fast_mins(p) for p in policies]

    if opts.refine and policies:
        confs = [(c1, c2)]
        if opts.anchor_zero and (c1 > 0 or c2 > 0):
            confs.append((0.0, 0.0))
        fan = _fan(opts.fan)
        base = len(policies)
        for cc in confs:
            tag = "refined" if cc == (c1, c2) else "refined@0"
            # each pass starts from the samples plus its own results, so passes
            # do not depend on each other
            pool = list(range(base))
            for w in fan:
                if search.exhausted:
                    break
                score = lambda m, w=w, cc=cc: _support(_bounds_from_mins(m, *cc), w)
                start = pool[int(np.argmax([score(mins[i]) for i in pool]))]
                p, m, _ = search.ascend(policies[start], mins[start], score)
                if p is not policies[start]:
                    pool.append(len(policies))
                    policies.append(p)
                    mins.append(m)
                    origins.append(tag)

    exact = [ch.ns == 1] * len(policies)
    hull, mins, argmins = _hull_from(policies, mins, exact, c1, c2, ch, opts.q)
    records = [BoundRecord(i, origins[i], RobustBounds(mins[i], argmins[i], c1, c2, exact[i]))
               for i in range(len(policies))]
    res = {"nu": nu, "p_restarts": opts.p_restarts, "fan": opts.fan, "sweeps": opts.sweeps,
           "q_grid": opts.q.grid, "pgd_iters": opts.q.pgd_iters, "pgd_restarts": opts.q.pgd_restarts,
           "seed": opts.seed, "anchor_zero": opts.anchor_zero}
    if search.exhausted:
        log.warning("region search stopped after %d evaluations (budget)", search.evals)
    return RegionApproximation(hull, records, res, (c1, c2), policies, search.exhausted, search.evals)


def best_policy(region: RegionApproximation, w) -> RobustBounds | None:
    """Bound record whose pentagon maximizes the weighted rate ``w``."""
    w = np.asarray(w, dtype=np.float64)
    best, val = None, -np.inf
    for rec in region.bound_records:
        if not rec.bounds.exact:
            continue
        s = float(np.max(rec.bounds.vertices() @ w))
        if s > val + 1e-12:
            best, val = rec, s
    return best


# ---------------------------------------------------------------- dichotomy

@dataclass(eq=False)
class DichotomyResult:
    zero: bool
    region: RegionApproximation | None
    certificate: SymmetrizerCertificate


def deterministic_capacity(ch: ChannelSpec, c1: float, c2: float, opts: RegionOptions | None = None,
                           tol: float = DEFAULT_TOL) -> DichotomyResult:
    """Deterministic-code capacity region when at least one conferencing capacity is positive."""
    if c1 < 0 or c2 < 0:
        raise InputError("conferencing capacities must be nonnegative")
    if not (c1 > 0 or c2 > 0):
        raise HypothesisViolation("needs C1 > 0 or C2 > 0; use nonconferencing_verdict for C1 = C2 = 0")
    cert = check_symmetrizable(ch, "XY", tol)
    if cert.feasible:
        return DichotomyResult(True, None, cert)
    return DichotomyResult(False, capacity_region(ch, c1, c2, opts), cert)


# ---------------------------------------------------------------- single-user max-min

def _su_evaluator(r, fam):
    # single-user family fam[s, a, b] seen as a MAC with trivial Y and U
    return MiEvaluator(r[None, :, None], fam[:, :, None, :])


def _inner_min(r, fam, qopts):
    m, a = minimize_terms(_su_evaluator(r, fam), qopts, terms=(3,))
    return float(m[0]), a[0]


def maxmin_single_user(fam: np.ndarray, qopts: QOptions | None = None, restarts: int = 4,
                       iters: int = 60, seed: int = 0):
    """max over input laws r of min over priors q of I(r, sum_s q_s fam[s]).

    Projected supergradient ascent on r (the inner minimum is concave in r),
    evaluating the inner minimum at every trial point. Returns
    ``(value, r, q)``.
    """
    qopts = qopts or QOptions()
    fam = np.asarray(fam, dtype=np.float64)
    ns, na, nb = fam.shape
    rng = np.random.default_rng([seed, 23])
    starts = [np.full(na, 1 / na)] + [rng.dirichlet(np.ones(na)) for _ in range(max(restarts - 1, 0))]
    best = (-np.inf, None, None)
    for r in starts:
        f, q = _inner_min(r, fam, qopts)
        step = 0.5
        for _ in range(iters):
            v = np.tensordot(q, fam, axes=(0, 0))
            pb = r @ v
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(v > 0, v / np.where(pb > 0, pb, 1.0)[None, :], 1.0)
                g = np.sum(np.where(v > 0, v * np.log2(ratio), 0.0), axis=1)
            trial = project_simplex(r + step * g)[0]
            ft, qt = _inner_min(trial, fam, qopts)
            if ft > f + 1e-13:
                r, f, q = trial, ft, qt
                step *= 1.5
            else:
                step /= 2
                if step < 1e-7:
                    break
        if f > best[0]:
            best = (f, r, q)
    return best


# ---------------------------------------------------------------- no conferencing

@dataclass(eq=False)
class NonConfVerdict:
    case: str
    statement: str
    zero_region: bool
    upper_bound_only: bool
    axis: str | None
    axis_bound: float | None
    certificates: dict

    def summary(self) -> str:
        extra = ""
        if self.axis is not None:
            extra = f"; {self.axis} <= {self.axis_bound:.6f} (upper bound only)"
        return f"{self.case}: {self.statement}{extra}"


def nonconferencing_verdict(ch: ChannelSpec, tol: float = DEFAULT_TOL, qopts: QOptions | None = None,
                            compute_bounds: bool = True) -> NonConfVerdict:
    """Which statement about the no-conferencing deterministic region applies."""
    certs = {k: check_symmetrizable(ch, k, tol) for k in ("XY", "X", "Y")}
    xy, sx, sy = (certs[k].feasible for k in ("XY", "X", "Y"))
    if xy:
        return NonConfVerdict("case4", "(X,Y)-symmetrizable: C_d(S,0,0) = {(0,0)}",
                              True, False, None, None, certs)
    if sx and sy:
        return NonConfVerdict("x-and-y", "X- and Y-symmetrizable, not (X,Y): C_d(S,0,0) = {(0,0)}",
                              True, False, None, None, certs)
    if not sx and not sy:
        return NonConfVerdict("case1", "no symmetrizability: C_d(S,0,0) = C*(S,0,0), nonempty interior",
                              False, False, None, None, certs)
    qopts = qopts or QOptions()
    if sy:
        # sender 2 silenced: R2 = 0, R1 bounded by the best single-user slice
        bound = None
        if compute_bounds:
            bound = max(maxmin_single_user(ch.w[:, :, y, :], qopts)[0] for y in range(ch.ny))
        return NonConfVerdict("case2", "Y-symmetrizable only: C_d(S,0,0) within [0, b] x {0}",
                              False, True, "R1", bound, certs)
    bound = None
    if compute_bounds:
        bound = max(maxmin_single_user(ch.w[:, x, :, :], qopts)[0] for x in range(ch.nx))
    return NonConfVerdict("case3", "X-symmetrizable only: C_d(S,0,0) within {0} x [0, b]",
                          False, True, "R2", bound, certs)


# ---------------------------------------------------------------- cooperation thresholds

@dataclass(frozen=True, eq=False)
class CooperationThresholds:
    c_infinity: float
    sum_threshold: float
    c1_threshold: float
    c2_threshold: float
    joint_input: np.ndarray
    candidates: int


def _active_set_stats(ev, mins4, qopts):
    ns = ev.ns
    cand = q_candidates(ns, qopts) if ns > 1 else np.ones((1, 1))
    vals = ev.values(cand)
    active = vals[:, 3] <= mins4 + ACTIVE_EPS
    if not np.any(active):
        active = vals[:, 3] <= vals[:, 3].min() + ACTIVE_EPS
    a = vals[active]
    return a[:, 2].max(), a[:, 0].min(), a[:, 1].min()


def cooperation_thresholds(ch: ChannelSpec, opts: RegionOptions | None = None) -> CooperationThresholds:
    """Full-cooperation sum rate and the conferencing capacities that reach it.

    The optimal sum rate is a max-min over joint input laws on X x Y (every
    such law is realized by some policy). The thresholds are evaluated over
    near-optimal policies found by search, with the active prior set taken
    within 1e-4 of the minimum.
    """
    opts = opts or RegionOptions()
    qopts = opts.q
    fam = ch.w.reshape(ch.ns, ch.nx * ch.ny, ch.nz)
    c_inf, r_star, _ = maxmin_single_user(fam, qopts, seed=opts.seed)
    r_star = r_star.reshape(ch.nx, ch.ny)

    nu = opts.nu or default_nu(ch)
    cands = [InputPolicy.from_joint(r_star),
             InputPolicy(np.ones(1), r_star.sum(1)[None], r_star.sum(0)[None])]
    search = _Search(ch, replace(opts, max_evals=None))
    samples = _sample_policies(ch, nu, opts.p_restarts, opts.seed)
    smins = [search.fast_mins(p) for p in samples]
    order = np.argsort([-m[3] for m in smins], kind="stable")[:4]
    for i in order:
        p, _, _ = search.ascend(samples[i], smins[i], lambda m: m[3])
        cands.append(p)

    sums, c1s, c2s = [], [], []
    for p in cands:
        ev = MiEvaluator.for_policy(p, ch)
        m, _ = minimize_terms(ev, qopts, terms=(3,))
        c_inf = max(c_inf, float(m[0]))
        if m[0] < c_inf - ACTIVE_EPS:
            continue
        s3, s1, s2 = _active_set_stats(ev, float(m[0]), qopts)
        sums.append(s3)
        c1s.append(s1)
        c2s.append(s2)
    if not sums:
        raise BudgetExceeded("no near-optimal policy found for the threshold search")
    return CooperationThresholds(
        c_infinity=c_inf,
        sum_threshold=max(0.0, c_inf - min(sums)),
        c1_threshold=max(0.0, c_inf - max(c1s)),
        c2_threshold=max(0.0, c_inf - max(c2s)),
        joint_input=r_star,
        candidates=len(sums),
    )
