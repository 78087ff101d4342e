"""PCA, kNN with orbit majority vote, scenario comparison, extremal states
and occurrence statistics on labeled datasets."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .bell_basis import D, check_coeffs
from .geometry import N_POINTS, group_perms, parallel_class_planes, polytope_vertices, representation_images
from .pipeline import DETECTORS, Dataset, GridSpec, Label, LABEL_NAMES

CLASSES = (Label.FREE, Label.BOUND, Label.SEP)
TIE_TOL = 1e-12
DEGENERACY_RTOL = 1e-9


def _lexsort_rows(x: np.ndarray) -> np.ndarray:
    return np.lexsort(x.T[::-1])


# --- PCA ------------------------------------------------------------------------


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # rows, descending variance
    eigenvalues: np.ndarray


def _resolve_degenerate(vals: np.ndarray, comps: np.ndarray) -> np.ndarray:
    """Fix a basis inside each degenerate eigenspace.

    A symmetric data set has repeated eigenvalues and eigh then returns an
    arbitrary rotation of the eigenspace. Parallel-class planes contained in
    such a space are used as its basis, in direction order; any remainder is
    completed by SVD.
    """
    comps = comps.copy()
    planes = parallel_class_planes()
    scale = max(float(np.abs(vals).max()), np.finfo(float).tiny)
    i = 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and vals[i] - vals[j] <= DEGENERACY_RTOL * scale:
            j += 1
        if j - i > 1:
            v = comps[i:j]
            picked = [p for p in planes if np.allclose((p @ v.T) @ v, p, atol=1e-8)]
            if picked:
                p = np.concatenate(picked)
                rest = v - (v @ p.T) @ p
                u, _, _ = np.linalg.svd(rest.T)
                comps[i:j] = np.concatenate([p, u[:, : j - i - len(p)].T])
        i = j
    return comps


def pca_fit(points) -> PcaModel:
    """Covariance PCA on a canonically sorted copy, so input order is irrelevant.

    Degenerate eigenspaces get a symmetry-adapted basis; each component is
    signed so its largest-magnitude entry is positive.
    """
    x = np.asarray(points, float)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("pca_fit needs at least 2 points")
    x = x[_lexsort_rows(x)]
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (len(x) - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals, comps = vals[order], _resolve_degenerate(vals[order], vecs[:, order].T)
    for comp in comps:
        # ties in |entry| resolved toward the first index
        j = np.argmax(np.round(np.abs(comp), 12))
        if comp[j] < 0:
            comp *= -1
    return PcaModel(mean, comps, vals)


def pca_project(model: PcaModel, c, dims: int = 2) -> np.ndarray:
    if not 1 <= dims <= len(model.mean):
        raise ValueError(f"dims must be in 1..{len(model.mean)}")
    return (np.asarray(c, float) - model.mean) @ model.components[:dims].T


def unique_points(p: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Cluster representatives: points closer than ``tol`` are merged."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = np.atleast_2d(p)
    if not len(p):
        return p
    # exact duplicates first; float noise is far below tol
    u = np.unique(np.round(p, 12), axis=0)
    pairs = cKDTree(u).query_pairs(tol, output_type="ndarray")
    n, lab = connected_components(
        _pair_graph(pairs, len(u)), directed=False
    )
    first = np.full(n, -1)
    for i, l in enumerate(lab):
        if first[l] < 0:
            first[l] = i
    return u[first]


def _pair_graph(pairs: np.ndarray, n: int):
    from scipy.sparse import coo_matrix

    return coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))


def unique_projected_points(points, model: PcaModel, tol: float = 1e-6, dims: int = 2) -> int:
    return len(unique_points(pca_project(model, points, dims), tol))


def rotation_symmetry(points2d: np.ndarray, order: int = 3, tol: float = 1e-6) -> bool:
    """Is the 2-D point set invariant under rotation by 2 pi / order about the origin?"""
    u = unique_points(points2d, tol)
    t = 2 * np.pi / order
    rot = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    d, _ = cKDTree(u).query(u @ rot.T)
    return bool(np.all(d < 10 * tol))


def orbit_action_symmetry(model: PcaModel, c: np.ndarray, tol: float = 1e-6) -> dict:
    """Check that the group acts on the 2-D projection of an orbit-closed set.

    Returns the orders of the planar rotations induced by group maps that
    keep the projection plane invariant, and whether the projected point
    set is 3-fold symmetric.
    """
    comps = model.components[:2]
    orders = set()
    for perm in group_perms("full"):
        # map on coefficient space: (P c)_j = c_perm[j]
        pm = np.eye(N_POINTS)[perm]
        img = comps @ pm.T  # images of the component rows
        r = img @ comps.T
        if np.allclose(r @ r.T, np.eye(2), atol=1e-8) and np.allclose(img, r @ comps, atol=1e-8):
            ang = np.arctan2(r[1, 0], r[0, 0])
            det = np.linalg.det(r)
            if det > 0 and abs(ang) > 1e-9:
                orders.add(int(round(2 * np.pi / abs(ang))))
    proj = pca_project(model, c, 2)
    return {"rotation_orders": sorted(orders), "threefold": rotation_symmetry(proj, 3, tol)}


def landmarks() -> list[tuple[str, str, np.ndarray]]:
    """(name, kind, coefficients) for the 9 Bell states and the 84 polytope vertices."""
    out = []
    for i in range(N_POINTS):
        e = np.zeros(N_POINTS)
        e[i] = 1.0
        out.append((f"B{i // D}{i % D}", "bell", e))
    nk = nv = 0
    for v in polytope_vertices():
        c = np.array([float(x) for x in v.coeffs])
        if v.kernel:
            out.append((f"K{nk}", "kernel", c))
            nk += 1
        else:
            out.append((f"P{nv}", "vertex", c))
            nv += 1
    return out


def mean_radii(model: PcaModel, ds: Dataset, dims: int = 2) -> dict[str, tuple[float, float]]:
    """Mean and std of |projection| for FREE, BOUND and SEP together with UNKNOWN."""
    r = np.linalg.norm(pca_project(model, ds.coeffs, dims), axis=1)
    groups = {
        "FREE": ds.labels == Label.FREE,
        "BOUND": ds.labels == Label.BOUND,
        "SEP+UNKNOWN": (ds.labels == Label.SEP) | (ds.labels == Label.UNKNOWN),
    }
    return {k: (float(r[m].mean()), float(r[m].std())) for k, m in groups.items() if m.any()}


# --- kNN ------------------------------------------------------------------------


@dataclass
class KnnModel:
    points: np.ndarray  # lexicographically sorted; index order breaks distance ties
    labels: np.ndarray
    k: int
    tree: cKDTree = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.tree is None:
            self.tree = cKDTree(self.points)


def knn_fit(train, k: int = 5, labels=None, tie_key=None) -> KnnModel:
    """``train`` is a Dataset or an (n, f) array paired with ``labels``.

    Distance ties go to the lexicographically smaller row of ``tie_key``
    (default: the features themselves).
    """
    if isinstance(train, Dataset):
        x, y = train.coeffs, train.labels
    else:
        x, y = np.asarray(train, float), np.asarray(labels)
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be a positive odd integer")
    if len(x) == 0:
        raise ValueError("empty training set")
    order = _lexsort_rows(x if tie_key is None else np.asarray(tie_key))
    return KnnModel(np.ascontiguousarray(x[order]), np.asarray(y)[order], k)


def knn_neighbors(model: KnnModel, q, k: int | None = None, workers: int = 1, window: int = 64) -> np.ndarray:
    """Indices (n, k) of the k nearest training points, nearest first.

    Distances within TIE_TOL count as equal and are ordered by training
    index (lexicographic order of the training points). ``window`` is the
    first query size; it doubles for rows whose tie band is cut off.
    """
    k = model.k if k is None else k
    q = np.atleast_2d(np.asarray(q, float))
    n_train = len(model.points)
    k = min(k, n_train)
    out = np.empty((len(q), k), dtype=np.int64)
    pending = np.arange(len(q))
    kq = min(n_train, max(2 * k, window))
    while len(pending):
        dist, idx = model.tree.query(q[pending], k=kq, workers=workers)
        dist = dist.reshape(len(pending), kq)
        idx = idx.reshape(len(pending), kq)
        dk = dist[:, k - 1 : k]
        # every tie at the k-th distance must be inside the returned window
        truncated = (dist[:, -1:] <= dk + TIE_TOL)[:, 0] & (kq < n_train)
        ok = ~truncated
        if ok.any():
            d, i = dist[ok], idx[ok]
            order = np.lexsort((i, _tie_bucket(d)), axis=-1)
            out[pending[ok]] = np.take_along_axis(i, order, axis=1)[:, :k]
        pending = pending[truncated]
        kq = min(n_train, kq * 2)
    return out


def _tie_bucket(d: np.ndarray) -> np.ndarray:
    """Merge distances closer than TIE_TOL into one rank per row."""
    order = np.argsort(d, axis=1, kind="stable")
    ds = np.take_along_axis(d, order, axis=1)
    new = np.concatenate([np.ones((len(d), 1), bool), np.diff(ds, axis=1) > TIE_TOL], axis=1)
    rank_sorted = np.cumsum(new, axis=1)
    rank = np.empty_like(rank_sorted)
    np.put_along_axis(rank, order, rank_sorted, axis=1)
    return rank


def vote(neighbor_labels: np.ndarray, n_classes: int = len(Label)) -> np.ndarray:
    """Majority label per row; class ties go to the class of the nearest neighbor."""
    nl = np.asarray(neighbor_labels)
    counts = np.zeros((len(nl), n_classes), dtype=np.int64)
    for j in range(nl.shape[1]):
        np.add.at(counts, (np.arange(len(nl)), nl[:, j]), 1)
    best = counts.max(axis=1, keepdims=True)
    tied = counts == best
    out = np.empty(len(nl), dtype=nl.dtype)
    for j in range(nl.shape[1] - 1, -1, -1):  # nearest tied class wins
        cand = tied[np.arange(len(nl)), nl[:, j]]
        out[cand] = nl[cand, j]
    return out


def knn_predict(model: KnnModel, c, workers: int = 1) -> np.ndarray:
    nb = knn_neighbors(model, c, workers=workers)
    return vote(model.labels[nb])


def majority_vote_predict(model: KnnModel, c, workers: int = 1) -> np.ndarray:
    """Predict each of the 12 equivalent representations; BOUND iff more than 5 votes."""
    c = np.atleast_2d(np.asarray(c, float))
    imgs = np.concatenate([representation_images(row) for row in c])
    pred = knn_predict(model, imgs, workers).reshape(len(c), -1)
    bound = (pred == Label.BOUND).sum(axis=1) > 5
    return np.where(bound, Label.BOUND, Label.SEP).astype(np.int8)


# --- evaluation -----------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple[str, ...]
    matrix: np.ndarray  # [actual, predicted]

    @classmethod
    def from_labels(cls, actual, predicted, classes=CLASSES) -> "ConfusionMatrix":
        idx = {int(c): i for i, c in enumerate(classes)}
        m = np.zeros((len(classes), len(classes)), dtype=np.int64)
        np.add.at(m, (np.vectorize(idx.get)(actual), np.vectorize(idx.get)(predicted)), 1)
        return cls(tuple(LABEL_NAMES[int(c)] for c in classes), m)

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.matrix) / self.total) if self.total else float("nan")

    def recall(self, name: str) -> float:
        i = self.classes.index(name)
        row = self.matrix[i].sum()
        return float(self.matrix[i, i] / row) if row else float("nan")

    def recalls(self) -> dict[str, float]:
        return {c: self.recall(c) for c in self.classes}

    def format(self) -> str:
        w = max(8, *(len(c) for c in self.classes))
        head = "actual\\pred".ljust(w + 4) + "".join(c.rjust(w + 2) for c in self.classes) + "  recall"
        rows = [head]
        for c, r in zip(self.classes, self.matrix):
            rows.append(c.ljust(w + 4) + "".join(str(x).rjust(w + 2) for x in r) + f"  {self.recall(c):.4f}")
        rows.append(f"accuracy {self.accuracy:.4f}")
        return "\n".join(rows)


def stratified_split(labels, test_fraction: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class split; returns sorted (train, test) index arrays."""
    labels = np.asarray(labels)
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    test = []
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        n_test = int(round(test_fraction * len(idx)))
        test.append(rng.permutation(idx)[:n_test])
    test = np.sort(np.concatenate(test)) if test else np.zeros(0, np.int64)
    mask = np.ones(len(labels), bool)
    mask[test] = False
    return np.flatnonzero(mask), test


def relabel_unknown(labels, to: Label) -> np.ndarray:
    out = np.array(labels, copy=True)
    out[out == Label.UNKNOWN] = to
    return out


@dataclass
class ScenarioResult:
    k: int
    sep: ConfusionMatrix  # UNKNOWN -> SEP
    bound: ConfusionMatrix  # UNKNOWN -> BOUND
    no_unknown: bool = False


def scenario_sweep(ds: Dataset, ks=(1, 3, 5, 7), seed: int = 0, test_fraction: float = 0.2, workers: int = 1) -> list[ScenarioResult]:
    """Both relabelings on one stratified split; neighbors are searched once.

    The relabeling changes labels only, so the neighbor lists serve both
    scenarios and every k.
    """
    train, test = stratified_split(ds.labels, test_fraction, seed)
    x = ds.coeffs
    no_unknown = not np.any(ds.labels == Label.UNKNOWN)
    model = knn_fit(x[train], max(ks), ds.labels[train])
    nb = knn_neighbors(model, x[test], max(ks), workers=workers)
    out = []
    for k in ks:
        cms = []
        for to in (Label.SEP, Label.BOUND):
            y_train = relabel_unknown(model.labels, to)
            y_test = relabel_unknown(ds.labels[test], to)
            pred = vote(y_train[nb[:, :k]])
            cms.append(ConfusionMatrix.from_labels(y_test, pred))
        out.append(ScenarioResult(k, cms[0], cms[1], no_unknown))
    return out


def scenario_compare(ds: Dataset, k: int = 5, seed: int = 0, test_fraction: float = 0.2, workers: int = 1) -> ScenarioResult:
    return scenario_sweep(ds, (k,), seed, test_fraction, workers)[0]


def best_scenario(results: list[ScenarioResult]) -> ScenarioResult:
    """Entry with the highest UNKNOWN->SEP accuracy; smaller k on ties."""
    return max(results, key=lambda r: (r.sep.accuracy, -r.k))


def pca_then_knn(ds: Dataset, dims: int = 3, k: int = 5, seed: int = 0, test_fraction: float = 0.2, workers: int = 1) -> ConfusionMatrix:
    """kNN in the space of the first ``dims`` principal components (UNKNOWN as SEP)."""
    if dims < 1:
        raise ValueError("dims must be >= 1")
    train, test = stratified_split(ds.labels, test_fraction, seed)
    y = relabel_unknown(ds.labels, Label.SEP)
    model_pca = pca_fit(ds.coeffs[train])
    xt = pca_project(model_pca, ds.coeffs[train], dims)
    xq = pca_project(model_pca, ds.coeffs[test], dims)
    model = knn_fit(xt, k, y[train], tie_key=ds.coeffs[train])
    return ConfusionMatrix.from_labels(y[test], knn_predict(model, xq, workers))


# --- extremal states ------------------------------------------------------------


EXTREMAL_LINE = (2, 5, 8)  # (0,2), (1,2), (2,2)


def extremal_family(x, variant: int = 1):
    """(1/3 - x) on the line {(0,2),(1,2),(2,2)} plus 2x and x on (0,0) and (1,1).

    Variant 2 swaps the two weights. Exact when ``x`` is a Fraction.
    """
    if variant not in (1, 2):
        raise ValueError("variant must be 1 or 2")
    exact = isinstance(x, (Fraction, int))
    xv = Fraction(x) if exact else float(x)
    if not 0 < xv <= Fraction(1, 9):
        raise ValueError("x must satisfy 0 < x <= 1/9")
    third = Fraction(1, 3) if exact else 1 / 3
    c = [0 * xv] * N_POINTS
    for i in EXTREMAL_LINE:
        c[i] = third - xv
    big, small = (0, 4) if variant == 1 else (4, 0)
    c[big] = 2 * xv
    c[small] = xv
    return tuple(c) if exact else check_coeffs(np.array(c, float))


# --- occurrence statistics ------------------------------------------------------


@dataclass(frozen=True)
class OccurrenceRow:
    group: str
    label: str
    count: int
    fraction: float


def volume_stats(ds: Dataset) -> list[OccurrenceRow]:
    """Label counts and fractions within the polytope, the whole simplex (grid
    datasets; outside-polytope points are FREE) or the scanned family."""
    counts = ds.counts()
    rows = []
    kind = ds.header.get("kind")
    if kind == "grid":
        inside = {k: v for k, v in counts.items()}
        outside_free = int(np.sum(ds.detectors == DETECTORS.index("enclosure")))
        inside["FREE"] -= outside_free
        n_in = sum(inside.values())
        spec = GridSpec(Fraction(ds.header["delta"]))
        total = spec.simplex_points
        simplex = dict(inside)
        simplex["FREE"] = inside["FREE"] + (total - n_in)
        for group, cnt in (("polytope", inside), ("simplex", simplex)):
            tot = sum(cnt.values())
            rows += [OccurrenceRow(group, k, v, v / tot if tot else 0.0) for k, v in cnt.items()]
    else:
        group = f"family {ds.header.get('family', '?')}" if kind == "family" else "dataset"
        tot = len(ds)
        rows += [OccurrenceRow(group, k, v, v / tot if tot else 0.0) for k, v in counts.items()]
    return rows


def format_stats(rows: list[OccurrenceRow]) -> str:
    out = [f"{'group':<12}{'label':<9}{'count':>10}{'fraction':>10}"]
    for r in rows:
        out.append(f"{r.group:<12}{r.label:<9}{r.count:>10}{r.fraction:>10.4f}")
    return "\n".join(out)
