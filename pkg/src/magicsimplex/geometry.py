"""Coefficient-space geometry of the qutrit magic simplex.

Points of the simplex are 9-vectors ``c`` indexed row-major by Bell labels.
Exact work uses :class:`fractions.Fraction` (single points) or integer
numerators over a common denominator (grids); everything else is float.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .bell_basis import COEFF_TOL, D

N_POINTS = D * D
THIRD = Fraction(1, D)


def point_index(k: int, l: int) -> int:
    return D * (k % D) + (l % D)


def index_point(i: int) -> tuple[int, int]:
    return divmod(i, D)


def line_count(d: int) -> int:
    """N(d) = d (d + 1 + sum of proper divisors b, 1 < b < d)."""
    return d * (d + 1 + sum(b for b in range(2, d) if d % b == 0))


@dataclass(frozen=True, order=True)
class Line:
    points: tuple[int, int, int]  # sorted flat Bell indices

    @classmethod
    def through(cls, p: tuple[int, int], step: tuple[int, int]) -> "Line":
        pts = {point_index(p[0] + n * step[0], p[1] + n * step[1]) for n in range(D)}
        if len(pts) != D:
            raise ValueError(f"step {step} does not generate a line")
        return cls(tuple(sorted(pts)))

    def __contains__(self, i: int) -> bool:
        return i in self.points


_DIRECTIONS = ((0, 1), (1, 0), (1, 1), (1, 2))


@lru_cache(maxsize=None)
def _lines() -> tuple[Line, ...]:
    found = {
        Line.through((p, q), s) for p in range(D) for q in range(D) for s in _DIRECTIONS
    }
    return tuple(sorted(found))


def enumerate_lines() -> list[Line]:
    return list(_lines())


@lru_cache(maxsize=None)
def parallel_classes() -> tuple[tuple[Line, Line, Line], ...]:
    """The four classes of mutually disjoint lines, one per direction."""
    return tuple(
        tuple(sorted({Line.through((p, q), s) for p in range(D) for q in range(D)}))
        for s in _DIRECTIONS
    )


def parallel_class_planes() -> np.ndarray:
    """(4, 2, 9) orthonormal bases of the line-sum contrast plane of each class.

    The four planes are mutually orthogonal and span the sum-zero subspace.
    Translations permute the lines of a class cyclically, which rotates its
    plane by a third of a turn.
    """
    out = np.zeros((4, 2, N_POINTS))
    for a, cls in enumerate(parallel_classes()):
        ind = np.zeros((D, N_POINTS))
        for b, line in enumerate(cls):
            ind[b, list(line.points)] = 1.0
        out[a, 0] = (2 * ind[2] - ind[0] - ind[1]) / np.sqrt(18)
        out[a, 1] = (ind[0] - ind[1]) / np.sqrt(6)
    return out


def line_state(line: Line) -> tuple[Fraction, ...]:
    return tuple(THIRD if i in line else Fraction(0) for i in range(N_POINTS))


def line_matrix() -> np.ndarray:
    """Integer incidence matrix (12, 9); line states are its rows divided by 3."""
    m = np.zeros((len(_lines()), N_POINTS), dtype=np.int64)
    for a, line in enumerate(_lines()):
        m[a, list(line.points)] = 1
    return m


def _is_exact(c) -> bool:
    return all(isinstance(x, (Fraction, int)) for x in c)


def as_fractions(c) -> tuple[Fraction, ...]:
    return tuple(Fraction(x) for x in c)


def in_enclosure(c, tol: float = COEFF_TOL) -> bool:
    """All coefficients inside [0, 1/3]."""
    if _is_exact(c):
        return all(0 <= Fraction(x) <= THIRD for x in c)
    c = np.asarray(c, float)
    return bool(np.all(c >= -tol) and np.all(c <= 1 / D + tol))


def in_enclosure_batch(c: np.ndarray, tol: float = COEFF_TOL) -> np.ndarray:
    return np.all((c >= -tol) & (c <= 1 / D + tol), axis=-1)


# --- exact rational linear algebra -------------------------------------------


def _nullspace(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    m = [list(r) for r in rows]
    ncols = len(m[0])
    pivots = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][col]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col] != 0:
                f = m[i][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(col)
        r += 1
        if r == len(m):
            break
    free = [j for j in range(ncols) if j not in pivots]
    basis = []
    for fcol in free:
        v = [Fraction(0)] * ncols
        v[fcol] = Fraction(1)
        for i, pcol in enumerate(pivots):
            v[pcol] = -m[i][fcol]
        basis.append(v)
    return basis


@lru_cache(maxsize=None)
def kernel_facets() -> tuple[np.ndarray, np.ndarray]:
    """Facet inequalities of the kernel polytope: ``H @ (3c) >= h0``.

    Found exactly by testing every 8-subset of the 12 line states for a
    supporting hyperplane (normal constrained to sum to zero).
    """
    verts = line_matrix()
    n = len(verts)
    facets = set()
    for subset in itertools.combinations(range(n), N_POINTS - 1):
        rows = [[Fraction(int(x)) for x in verts[i]] + [Fraction(-1)] for i in subset]
        rows.append([Fraction(1)] * N_POINTS + [Fraction(0)])
        ns = _nullspace(rows)
        if len(ns) != 1:
            continue
        h = ns[0]
        scale = np.lcm.reduce([x.denominator for x in h])
        h = [int(x * scale) for x in h]
        g = np.gcd.reduce([abs(x) for x in h if x != 0])
        h = [x // g for x in h]
        vals = [sum(h[j] * int(verts[i][j]) for j in range(N_POINTS)) - h[-1] for i in range(n)]
        if all(v >= 0 for v in vals):
            facets.add(tuple(h))
        elif all(v <= 0 for v in vals):
            facets.add(tuple(-x for x in h))
    arr = np.array(sorted(facets), dtype=np.int64)
    hm, h0 = arr[:, :N_POINTS], arr[:, N_POINTS]
    hm.setflags(write=False)
    h0.setflags(write=False)
    return hm, h0


def kernel_contains(c: np.ndarray, denominator: int | None = None, tol: float = 1e-12) -> np.ndarray:
    """Vectorized kernel test via the facet description.

    With ``denominator`` the input must be integer numerators and the test is
    exact integer arithmetic; otherwise ``c`` is float with tolerance ``tol``.
    """
    hm, h0 = kernel_facets()
    c = np.asarray(c)
    if denominator is not None:
        lhs = D * (c.astype(np.int64) @ hm.T)
        return np.all(lhs >= h0 * denominator, axis=-1)
    return np.all(D * (c @ hm.T) >= h0 - tol, axis=-1)


@dataclass(frozen=True)
class KernelWeights:
    weights: tuple[Fraction, ...]  # one per line, in enumerate_lines() order

    def reconstruct(self) -> tuple[Fraction, ...]:
        out = [Fraction(0)] * N_POINTS
        for w, line in zip(self.weights, _lines()):
            for i in line.points:
                out[i] += w * THIRD
        return tuple(out)


def _phase_one(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction] | None:
    """Feasible x >= 0 with a x = b (b >= 0), by Phase-I simplex with Bland's rule."""
    m, n = len(a), len(a[0])
    # tableau columns: n originals, m artificials, rhs
    t = [list(a[i]) + [Fraction(int(i == j)) for j in range(m)] + [b[i]] for i in range(m)]
    basis = [n + i for i in range(m)]
    cost = [Fraction(0)] * n + [Fraction(1)] * m + [Fraction(0)]
    # reduced cost row: cost - sum of basic rows
    z = [cost[j] - sum(t[i][j] for i in range(m)) for j in range(n + m + 1)]
    while True:
        enter = next((j for j in range(n + m) if z[j] < 0), None)
        if enter is None:
            break
        ratios = [
            (t[i][-1] / t[i][enter], basis[i], i) for i in range(m) if t[i][enter] > 0
        ]
        _, _, row = min(ratios)
        piv = t[row][enter]
        t[row] = [x / piv for x in t[row]]
        for i in range(m):
            if i != row and t[i][enter] != 0:
                f = t[i][enter]
                t[i] = [x - f * y for x, y in zip(t[i], t[row])]
        f = z[enter]
        z = [x - f * y for x, y in zip(z, t[row])]
        basis[row] = enter
    if z[-1] != 0:
        return None
    x = [Fraction(0)] * n
    for i, j in enumerate(basis):
        if j < n:
            x[j] = t[i][-1]
    return x


def kernel_membership(c) -> KernelWeights | None:
    """Exact convex decomposition of ``c`` into line states, or None.

    Float input is converted to exact binary fractions first.
    """
    c = as_fractions(c)
    if len(c) != N_POINTS:
        raise ValueError("expected 9 coefficients")
    if any(x < 0 for x in c):
        return None
    a = [[Fraction(int(v), D) for v in row] for row in line_matrix().T]
    lam = _phase_one(a, list(c))
    if lam is None:
        return None
    return KernelWeights(tuple(lam))


@lru_cache(maxsize=None)
def line_perms(kind: str = "full") -> np.ndarray:
    """(|G|, 12): line j of a canonical image corresponds to line [g, j] of the source."""
    index = {line.points: i for i, line in enumerate(_lines())}
    perms = group_perms(kind)
    out = np.array(
        [[index[tuple(sorted(int(p[j]) for j in line.points))] for line in _lines()] for p in perms],
        dtype=np.intp,
    )
    out.setflags(write=False)
    return out


def kernel_membership_grid(numerators: np.ndarray, denominator: int) -> list[KernelWeights | None]:
    """Exact decompositions for many grid points, one LP per symmetry orbit.

    The group permutes the lines, so weights found for the canonical image
    carry over to every orbit member by relabeling the lines.
    """
    num = np.atleast_2d(np.asarray(numerators, dtype=np.int64))
    codes, gidx = canonical_codes(num, denominator + 1, return_maps=True)
    uniq, inverse = np.unique(codes, return_inverse=True)
    reps = decode(uniq, denominator + 1)
    rep_w = [kernel_membership(tuple(Fraction(int(x), denominator) for x in r)) for r in reps]
    lp = line_perms()
    out = []
    for u, g in zip(inverse, gidx):
        w = rep_w[u]
        if w is None:
            out.append(None)
            continue
        lam = [Fraction(0)] * len(w.weights)
        for j, x in enumerate(w.weights):
            lam[lp[g, j]] = x
        out.append(KernelWeights(tuple(lam)))
    return out


def kernel_membership_float(c, tol: float = 1e-9) -> bool:
    """Double-precision LP cross-check (HiGHS)."""
    from scipy.optimize import linprog

    a = line_matrix().T / D
    res = linprog(
        np.zeros(a.shape[1]),
        A_eq=a,
        b_eq=np.asarray(c, float),
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": tol},
    )
    return res.status == 0


# --- phase-space symmetries --------------------------------------------------


@dataclass(frozen=True)
class PhaseSpaceMap:
    """(k, l) -> L (k, l) + t over Z_3, with det L = 1."""

    linear: tuple[tuple[int, int], tuple[int, int]] = ((1, 0), (0, 1))
    translation: tuple[int, int] = (0, 0)

    def __post_init__(self):
        (a, b), (c, d) = self.linear
        if (a * d - b * c) % D == 0:
            raise ValueError("linear part must be invertible over Z_3")

    def __call__(self, p: tuple[int, int]) -> tuple[int, int]:
        (a, b), (c, d) = self.linear
        k, l = p
        return ((a * k + b * l + self.translation[0]) % D, (c * k + d * l + self.translation[1]) % D)

    @property
    def perm(self) -> tuple[int, ...]:
        """perm[i] = index of the image of point i."""
        return tuple(point_index(*self(index_point(i))) for i in range(N_POINTS))

    def map_line(self, line: Line) -> Line:
        perm = self.perm
        return Line(tuple(sorted(perm[i] for i in line.points)))

    def apply(self, c):
        """Relabel coefficients: the weight of point p moves to g(p)."""
        perm = self.perm
        if isinstance(c, np.ndarray):
            out = np.empty_like(c)
            out[..., list(perm)] = c
            return out
        out = [None] * N_POINTS
        for i, x in enumerate(c):
            out[perm[i]] = x
        return tuple(out)


@lru_cache(maxsize=None)
def _group(kind: str) -> tuple[PhaseSpaceMap, ...]:
    shifts = [(a, b) for a in range(D) for b in range(D)]
    if kind == "translations":
        return tuple(PhaseSpaceMap(translation=t) for t in shifts)
    if kind != "full":
        raise ValueError(f"unknown symmetry group kind {kind!r}")
    linear = [
        ((a, b), (c, d))
        for a, b, c, d in itertools.product(range(D), repeat=4)
        if (a * d - b * c) % D == 1
    ]
    # identity first, then deterministic order
    linear.sort(key=lambda m: (m != ((1, 0), (0, 1)), m))
    return tuple(PhaseSpaceMap(m, t) for m in linear for t in shifts)


def symmetry_group(kind: str = "full") -> list[PhaseSpaceMap]:
    return list(_group(kind))


@lru_cache(maxsize=None)
def group_perms(kind: str = "full") -> np.ndarray:
    """Array (|G|, 9): row g holds, for each output slot j, the source index.

    ``c[..., perms[g]]`` is the image of ``c`` under map g.
    """
    rows = []
    for g in _group(kind):
        inv = [0] * N_POINTS
        for i, j in enumerate(g.perm):
            inv[j] = i
        rows.append(inv)
    arr = np.array(rows, dtype=np.intp)
    arr.setflags(write=False)
    return arr


def orbit(c, maps: Sequence[PhaseSpaceMap]) -> set[tuple]:
    if isinstance(c, np.ndarray):
        c = tuple(float(x) for x in c)
    return {tuple(g.apply(tuple(c))) for g in maps}


def orbit_images(c: np.ndarray, kind: str = "full") -> np.ndarray:
    """All group images of a batch, shape (..., |G|, 9)."""
    return np.asarray(c)[..., group_perms(kind)]


def canonical_codes(numerators: np.ndarray, base: int, kind: str = "full", return_maps: bool = False):
    """Orbit-invariant integer code: min over the group of the base-``base`` encoding.

    With ``return_maps`` also the index g of a minimizing map, so that
    ``numerators[i][group_perms(kind)[g]]`` is the canonical representative.
    """
    num = np.asarray(numerators, dtype=np.int64)
    weights = base ** np.arange(N_POINTS - 1, -1, -1, dtype=np.int64)
    perms = group_perms(kind)
    out = np.empty(len(num), dtype=np.int64)
    arg = np.empty(len(num), dtype=np.int64)
    step = max(1, 4_000_000 // len(perms))
    for s in range(0, len(num), step):
        codes = num[s : s + step][:, perms] @ weights  # (n, G)
        arg[s : s + step] = codes.argmin(axis=1)
        out[s : s + step] = codes[np.arange(len(codes)), arg[s : s + step]]
    return (out, arg) if return_maps else out


def decode(codes: np.ndarray, base: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    out = np.empty(codes.shape + (N_POINTS,), dtype=np.int64)
    for j in range(N_POINTS - 1, -1, -1):
        out[..., j] = codes % base
        codes = codes // base
    return out


@lru_cache(maxsize=None)
def line_representations() -> tuple[np.ndarray, ...]:
    """For each line L_j, perms of every group map sending L_j onto the first line.

    The 12 classes are right cosets of the stabilizer of the reference line,
    so the collection of per-class image sets is invariant under the group.
    """
    lines = _lines()
    ref = lines[0]
    groups = []
    for line in lines:
        rows = [
            perm
            for g, perm in zip(_group("full"), group_perms("full"))
            if g.map_line(line) == ref
        ]
        groups.append(np.array(rows, dtype=np.intp))
    return tuple(groups)


def representation_images(c: np.ndarray) -> np.ndarray:
    """The 12 equivalent representations of ``c`` (one per line), shape (12, 9).

    Each is the lexicographically smallest image within its coset class.
    """
    c = np.asarray(c, float)
    out = []
    for perms in line_representations():
        imgs = np.round(c[perms], 12)
        order = np.lexsort(imgs.T[::-1])
        out.append(c[perms[order[0]]])
    return np.array(out)


@dataclass(frozen=True)
class Vertex:
    coeffs: tuple[Fraction, ...]
    kernel: bool


def polytope_vertices() -> list[Vertex]:
    """The 84 uniform mixtures of three Bell states; 12 of them are line states."""
    kernel = {line.points for line in _lines()}
    out = []
    for trio in itertools.combinations(range(N_POINTS), 3):
        coeffs = tuple(THIRD if i in trio else Fraction(0) for i in range(N_POINTS))
        out.append(Vertex(coeffs, trio in kernel))
    return out


def iter_fractions_csv(rows: Iterable[Sequence[Fraction]]) -> Iterable[str]:
    for row in rows:
        yield ",".join(str(x) for x in row)
