"""Whitney decomposition, the rooted projection tree, and cube scans.

Dyadic cubes are anchored to the global lattice (side 2^-k, integer
offsets). The selection rule takes a cube when its center sits at least
29 side lengths from the boundary and its parent does not, which makes all
four structural conditions plus diam(Q) < dist(Q, boundary)/20 hold
constructively (see the module tests).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CoefficientField, GraphEpigraph, admissible
from .frequency import _Picture
from .solver import DiscreteSolution

__all__ = [
    "WhitneyCube",
    "WhitneyTree",
    "whitney_decompose",
    "build_tree",
    "vertical_translate",
    "key_lemma_scan",
    "modified_frequency_scan",
    "tree_to_json",
]

SELECT_FACTOR = 29.0     # center distance threshold in side lengths
DEFAULT_W = 120          # smallest even W certified by the selection rule


@dataclass(frozen=True)
class WhitneyCube:
    """Dyadic cube [i, i+1] x [j, j+1] scaled by 2^-k."""

    i: int
    j: int
    k: int

    @property
    def side(self):
        return 2.0 ** (-self.k)

    @property
    def center(self):
        s = self.side
        return np.array([(self.i + 0.5) * s, (self.j + 0.5) * s])

    @property
    def rect(self):
        s = self.side
        return (self.i * s, (self.i + 1) * s, self.j * s, (self.j + 1) * s)

    @property
    def proj(self):
        """Projection interval on H_0."""
        s = self.side
        return (self.i * s, (self.i + 1) * s)

    @property
    def ident(self):
        return f"k{self.k}_i{self.i}_j{self.j}"

    def children(self):
        return [WhitneyCube(2 * self.i + a, 2 * self.j + b, self.k + 1)
                for a in (0, 1) for b in (0, 1)]


def _boundary_distance(domain: GraphEpigraph, pts):
    """Distance to the domain boundary.

    The Whitney structure lives on the full epigraph (the chart box is a
    working window, not part of the boundary), so this is the graph
    distance alone.
    """
    pts = np.atleast_2d(pts)
    return domain.graph.distance(pts)


def _phi_range(graph, a, b):
    """Exact min/max of the piecewise-linear graph over [a, b]."""
    xs = [a, b] + [x for x, _ in graph.breakpoints if a < x < b]
    vals = graph.phi(np.asarray(xs, dtype=float))
    return float(vals.min()), float(vals.max())


def _cube_intersects_domain(domain, cube):
    x0, x1, y0, y1 = domain.box
    cx0, cx1, cy0, cy1 = cube.rect
    if cx1 <= x0 or cx0 >= x1 or cy1 <= y0 or cy0 >= y1:
        return False
    lo, _ = _phi_range(domain.graph, max(cx0, x0), min(cx1, x1))
    return cy1 > lo


def verify_cube_conditions(domain, cube, W):
    """Constructive check of the four structural conditions.

    Returns a dict of booleans plus the measured dist(Q, boundary)/side
    ratio; exactness comes from the piecewise-linear graph.
    """
    s = cube.side
    c = cube.center
    x0, x1, y0, y1 = domain.box
    # dist(Q, boundary): distance from the cube (corner sampling is exact
    # for a polyline only via segment distances, so use corners + center
    # lower bound: dist(Q) >= dist(center) - diam/2; also exact corner min)
    d_center = _boundary_distance(domain, c[None, :])[0]
    diam = s * math.sqrt(2)
    # dist(Q, boundary) >= dist(center) - diam/2, the bound used by the
    # selection rule (factor 29 makes 29s - 0.708s > 20*diam = 28.284s)
    dist_cube_lower = d_center - 0.5 * diam
    # (2) 10Q inside the epigraph
    half = 5.0 * s
    lo, hi_phi = _phi_range(domain.graph, c[0] - half, c[0] + half)
    ten_inside = c[1] - half > hi_phi
    # (3) WQ meets the graph
    halfW = 0.5 * W * s
    glo, ghi = _phi_range(domain.graph, c[0] - halfW, c[0] + halfW)
    meets_graph = glo <= c[1] + halfW and ghi >= c[1] - halfW
    return {
        "ten_inside": bool(ten_inside),
        "W_meets_boundary": bool(meets_graph),
        "diam_over_dist": float(diam / dist_cube_lower)
        if dist_cube_lower > 0 else math.inf,
        "diam_condition": bool(dist_cube_lower > 0
                               and diam < dist_cube_lower / 20.0),
        "dist_ratio": float(dist_cube_lower / s),
    }


def _candidate_indices(domain, k):
    """(i, j) candidate pairs at scale k within distance ~59 sides of the
    boundary (cubes farther out always have a selectable ancestor)."""
    s = 2.0 ** (-k)
    x0, x1, y0, y1 = domain.box
    i_all = np.arange(math.floor(x0 / s), math.ceil(x1 / s) + 1)
    cx = (i_all + 0.5) * s
    keep = (cx > x0) & (cx < x1)
    i_all, cx = i_all[keep], cx[keep]
    reach = 60.0 * s
    if len(i_all) == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    phi = domain.graph.phi(cx)
    j_lo = np.floor((phi + 0.5 * s) / s - 0.5).astype(np.int64)
    j_hi = np.ceil((np.minimum(phi + reach, y1) ) / s - 0.5).astype(np.int64)
    width = int(max((j_hi - j_lo).max(), 0)) + 1
    offs = np.arange(width)
    I = np.repeat(i_all, width)
    J = (j_lo[:, None] + offs[None, :]).ravel()
    return I, J


def whitney_decompose(domain: GraphEpigraph, l_min, W=DEFAULT_W):
    """Maximal dyadic cubes with center at least 29 sides from the boundary.

    Scale-by-scale vectorized selection: a cube is taken when its center
    distance to the boundary (graph plus chart walls) is >= 29 sides, it
    lies inside Omega, and no ancestor was taken. Covers
    {x in Omega : dist(x, boundary) >= 30*l_min}.
    """
    if not isinstance(domain, GraphEpigraph):
        raise TypeError("whitney_decompose needs a GraphEpigraph domain")
    if not domain.graph.slope_tau < 1.0:
        raise ValueError("graph slope must be < 1")
    x0, x1, y0, y1 = domain.box
    span = max(x1 - x0, y1 - y0)
    k0 = -math.ceil(math.log2(span))
    k_max = round(-math.log2(l_min))
    selected = set()
    out = []
    for k in range(k0, k_max + 1):
        s = 2.0 ** (-k)
        if s < l_min:
            break
        I, J = _candidate_indices(domain, k)
        cx = (I + 0.5) * s
        cy = (J + 0.5) * s
        centers = np.stack([cx, cy], axis=1)
        above = cy > domain.graph.phi(cx)
        in_window = (
            (I * s >= x0) & ((I + 1) * s <= x1)
            & (J * s >= y0) & ((J + 1) * s <= y1)
        )
        d = _boundary_distance(domain, centers)
        cond = above & in_window & (d >= SELECT_FACTOR * s)
        idx = np.flatnonzero(cond)
        for t in idx:
            i, j = int(I[t]), int(J[t])
            ii, jj, kk = i, j, k
            covered = False
            while kk > k0:
                ii >>= 1
                jj >>= 1
                kk -= 1
                if (kk, ii, jj) in selected:
                    covered = True
                    break
            if not covered:
                selected.add((k, i, j))
                out.append(WhitneyCube(i, j, k))
    out.sort(key=lambda q: (q.k, q.i, q.j))
    return out


def measure_overlap_bound(cubes, sample_cap=1500):
    """Measured D_0: max count of cubes whose 10-fold dilations touch.

    Exact for small families; for large ones the outer loop runs over a
    deterministic stride sample (the configuration repeats along the
    boundary, so the sampled maximum is the observed bound).
    """
    if not cubes:
        return 0
    centers = np.array([q.center for q in cubes])
    sides = np.array([q.side for q in cubes])
    n = len(cubes)
    stride = max(1, n // sample_cap)
    d0 = 0
    for a in range(0, n, stride):
        gap = 5.0 * (sides[a] + sides)
        near = np.all(np.abs(centers - centers[a]) <= gap[:, None], axis=1)
        d0 = max(d0, int(near.sum()))
    return d0


@dataclass
class WhitneyTree:
    root: WhitneyCube
    generations: list          # generations[k] = list of cubes
    selection: dict            # proj interval -> cube
    parent: dict               # cube ident -> parent cube
    W: int
    D0: int
    domain: GraphEpigraph

    def descendants(self, cube, j):
        """Cubes j generations below with projection inside Pi(cube)."""
        gen = None
        for g, cubes in enumerate(self.generations):
            if cube in cubes:
                gen = g
                break
        if gen is None:
            raise ValueError("cube not in the tree")
        lo, hi = cube.proj
        return [q for q in self.generations[gen + j]
                if q.proj[0] >= lo - 1e-15 and q.proj[1] <= hi + 1e-15]


def build_tree(cubes, root: WhitneyCube, depth, domain, W=DEFAULT_W):
    """Rooted generations via projections onto H_0.

    Generation k selects, for every dyadic subinterval of Pi(root) of
    length 2^-k * side(root), the lowest-center cube among those below the
    root with that exact projection (ties broken lexicographically).
    """
    if root not in cubes:
        raise ValueError("root must be one of the decomposition cubes")
    by_proj = {}
    rc = root.center
    rlo, rhi = root.proj
    for q in cubes:
        lo, hi = q.proj
        if lo < rlo - 1e-15 or hi > rhi + 1e-15:
            continue
        if q.center[1] >= rc[1] and q != root:
            continue  # not below the root
        by_proj.setdefault((q.k, q.i), []).append(q)
    generations = [[root]]
    parent = {}
    selection = {root.proj: root}
    for k in range(1, depth + 1):
        scale_k = root.k + k
        gen = []
        n_intervals = 2 ** k
        base_i = root.i * (2 ** k)
        for m in range(n_intervals):
            key = (scale_k, base_i + m)
            cands = by_proj.get(key, [])
            if not cands:
                raise ValueError(
                    f"chart too small: no cube below the root with "
                    f"projection index {key}")
            best = min(cands, key=lambda q: (q.center[1], q.i, q.j))
            gen.append(best)
            selection[best.proj] = best
        for q in gen:
            lo, hi = q.proj
            for p in generations[k - 1]:
                plo, phi_ = p.proj
                if lo >= plo - 1e-15 and hi <= phi_ + 1e-15:
                    parent[q.ident] = p
                    break
        generations.append(gen)
    d0 = measure_overlap_bound(cubes)
    return WhitneyTree(root, generations, selection, parent, W, d0, domain)


def vertical_translate(cube: WhitneyCube, domain):
    """Translate of the cube along e_2 so its center lies on Sigma.

    Returns the axis rectangle (x0, x1, y0, y1); idempotent by definition
    since the abscissa is preserved.
    """
    cx = cube.center[0]
    x0, x1, _, _ = domain.box
    if not x0 < cx < x1:
        raise ValueError("center projection leaves the chart")
    cy = float(domain.graph.phi(np.array([cx]))[0])
    s = cube.side
    return (cx - s / 2, cx + s / 2, cy - s / 2, cy + s / 2)


def scan_center(cube, domain, at="sigma"):
    """Frequency center for scans: the cube center, or the center of the
    vertical translate t(Q) on Sigma (the desk-scale regime where the
    halving mechanism is visible; Lemma-3.11-type perturbation ties the
    two up to constants)."""
    if at == "center":
        return np.asarray(cube.center, dtype=float)
    cx = cube.center[0]
    return np.array([cx, float(domain.graph.phi(np.array([cx]))[0])])


def _cube_frequency(u, fld, cube, S, domain, at="sigma"):
    x = scan_center(cube, domain, at)
    pic = _Picture(u, fld, x)
    r = S * cube.side
    H = pic.H(r)
    if H < 1e-300:
        return math.nan
    return r * pic.I(r) / H


def key_lemma_scan(u: DiscreteSolution, fld, tree: WhitneyTree, S, K, N0,
                   C_admissible=1.0, at="sigma"):
    """Empirical halving fraction and growth ratio across K generations.

    For every cube R with K generations below it, computes N(x, S l(R)),
    the fraction of Pi-measure of descendants whose frequency halves, and
    the maximum descendant/parent frequency ratio. With at="sigma"
    (default) the centers are the vertical translates on Sigma, where the
    boundary frequencies are scale-resolved at desk scale; at="center"
    uses the literal cube centers. Cubes where the ball escapes the chart
    or fails admissibility are skipped and reported.
    """
    if S * tree.generations[-1][0].side < 8 * u.mesh.h:
        raise ValueError("smallest scanned ball under-resolved (< 8 cells)")
    records = []
    skipped = []
    freq = {}

    def N_of(cube):
        if cube.ident not in freq:
            freq[cube.ident] = _cube_frequency(u, fld, cube, S,
                                               tree.domain, at)
        return freq[cube.ident]

    for g in range(len(tree.generations) - K):
        for R in tree.generations[g]:
            r = S * R.side
            x = scan_center(R, tree.domain, at)
            try:
                ok = admissible(x, r, tree.domain, fld, C=C_admissible)
            except Exception as exc:
                skipped.append({"cube": R.ident, "reason": str(exc)})
                continue
            if not ok:
                skipped.append({"cube": R.ident, "reason": "inadmissible"})
                continue
            NR = N_of(R)
            desc = tree.descendants(R, K)
            ratios = []
            halved_measure = 0.0
            total_measure = 0.0
            for Q in desc:
                xq = scan_center(Q, tree.domain, at)
                try:
                    adm_q = admissible(xq, S * Q.side, tree.domain,
                                       fld, C=C_admissible)
                except Exception as exc:
                    skipped.append({"cube": Q.ident, "reason": str(exc)})
                    continue
                if not adm_q:
                    skipped.append({"cube": Q.ident, "reason": "inadmissible"})
                    continue
                NQ = N_of(Q)
                m = Q.proj[1] - Q.proj[0]
                total_measure += m
                if NQ <= 0.5 * NR:
                    halved_measure += m
                ratios.append(NQ / NR if NR > 0 else math.inf)
            records.append({
                "cube": R.ident,
                "generation": g,
                "N": NR,
                "above_N0": bool(NR >= N0),
                "halved_fraction": halved_measure / total_measure
                if total_measure > 0 else math.nan,
                "max_ratio": max(ratios) if ratios else math.nan,
                "n_descendants": len(ratios),
            })
    return {"records": records, "skipped": skipped, "S": S, "K": K, "N0": N0,
            "at": at}


def modified_frequency_scan(u, fld, tree, S1, S2, K, N0, eps, delta0,
                            sign_oracle, at="sigma"):
    """The tree recursion for N' following rules (a), (b1), (b2).

    (a) parent translate has no zeros: the ceil(delta0 * card) children
    with leftmost projections halve, the rest grow by (1 + eps);
    (b) parent translate has zeros: a child halves when its own translate
    is zero free, otherwise N'(child) = max(N(child), N0/2).

    Returns cube records and per-generation ratio summaries; deterministic
    for fixed inputs.
    """
    if len(tree.generations) - 1 < K:
        raise ValueError("tree too shallow for the recursion step K")
    leaf = tree.generations[-1][0].side
    if leaf < 8 * u.mesh.h:
        raise ValueError("leaf cubes under-resolved for the sign oracle "
                         "(need side >= 8h)")
    root = tree.root

    def signed(cube):
        rect = vertical_translate(cube, tree.domain)
        try:
            return bool(sign_oracle(rect))
        except Exception as exc:
            raise RuntimeError(
                f"sign oracle failed on cube {cube.ident}: {exc}") from exc

    def N_of(cube):
        return _cube_frequency(u, fld, cube, S1, tree.domain, at)

    nprime = {root.ident: max(N_of(root), N0 / 2.0)}
    nvalue = {root.ident: N_of(root)}
    state = {root.ident: "zeros" if signed(root) else "no_zeros"}
    gen_summary = []
    levels = list(range(0, len(tree.generations), K))
    for gi in range(1, len(levels)):
        parents = tree.generations[levels[gi - 1]]
        ratios = []
        halved_fracs = []
        for P in parents:
            children = tree.descendants(P, K)
            children = sorted(children, key=lambda q: (q.proj[0], q.i, q.j))
            has_zeros = signed(P)
            state[P.ident] = "zeros" if has_zeros else "no_zeros"
            Np = nprime[P.ident]
            if not has_zeros:
                n_halve = math.ceil(delta0 * len(children))
                for idx, Q in enumerate(children):
                    val = Np / 2.0 if idx < n_halve else (1 + eps) * Np
                    nprime[Q.ident] = val
                    nvalue[Q.ident] = math.nan
                    ratios.append(val / Np)
                halved_fracs.append(n_halve / len(children))
            else:
                n_halved = 0
                for Q in children:
                    if not signed(Q):
                        nprime[Q.ident] = Np / 2.0
                        nvalue[Q.ident] = math.nan
                        n_halved += 1
                    else:
                        NQ = N_of(Q)
                        nprime[Q.ident] = max(NQ, N0 / 2.0)
                        nvalue[Q.ident] = NQ
                    ratios.append(nprime[Q.ident] / Np)
                halved_fracs.append(n_halved / len(children))
        gen_summary.append({
            "level": levels[gi],
            "ratios": ratios,
            "halved_fraction_min": min(halved_fracs),
            "halved_fraction_mean": float(np.mean(halved_fracs)),
        })
    return {
        "nprime": nprime,
        "nvalue": nvalue,
        "sign_state": state,
        "generations": gen_summary,
        "params": {"S1": S1, "S2": S2, "K": K, "N0": N0,
                   "eps": eps, "delta0": delta0},
    }


def scan_summary_csv(scan, path, metadata=()):
    """Per-generation summary of the N' recursion ratios."""
    with open(path, "w", newline="\n") as f:
        for line in metadata:
            f.write(f"# {line}\n")
        f.write("level,n_ratios,halved_fraction_min,halved_fraction_mean,"
                "ratio_min,ratio_max\n")
        for g in scan["generations"]:
            ratios = np.asarray(g["ratios"])
            f.write(
                f"{g['level']},{len(ratios)},"
                f"{g['halved_fraction_min']:.17g},"
                f"{g['halved_fraction_mean']:.17g},"
                f"{ratios.min():.17g},{ratios.max():.17g}\n")


def tree_to_json(tree: WhitneyTree, scan=None):
    """Serializable node list {id, parent, center, side, generation, ...}."""
    nodes = []
    for g, cubes in enumerate(tree.generations):
        for q in cubes:
            rec = {
                "id": q.ident,
                "parent": tree.parent.get(q.ident).ident
                if q.ident in tree.parent else None,
                "center": [float(q.center[0]), float(q.center[1])],
                "side": q.side,
                "generation": g,
            }
            if scan is not None:
                rec["N"] = scan["nvalue"].get(q.ident)
                rec["Nprime"] = scan["nprime"].get(q.ident)
                rec["sign_state"] = scan["sign_state"].get(q.ident)
            nodes.append(rec)
    return nodes
