"""Grid generation, the FREE/SEP/BOUND/UNKNOWN cascade, family slices,
witness mining and dataset persistence."""

from __future__ import annotations

import base64
import hashlib
import io
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import IntEnum
from fractions import Fraction
from math import comb, sqrt
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from . import __version__
from . import detectors as det
from .bell_basis import D
from .geometry import N_POINTS, canonical_codes, decode, kernel_contains

log = logging.getLogger(__name__)


class Label(IntEnum):
    FREE = 0
    BOUND = 1
    SEP = 2
    UNKNOWN = 3


LABEL_NAMES = tuple(l.name for l in Label)

DETECTORS = (
    "",
    "enclosure",
    "ppt",
    "kernel",
    "quasipure",
    "quasipure-exact",
    "mub4",
    "mub3",
    "mub2",
    "witness",
)
_DET_CODE = {name: i for i, name in enumerate(DETECTORS)}


# --- grid -----------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    delta: Fraction

    def __post_init__(self):
        delta = Fraction(self.delta)
        object.__setattr__(self, "delta", delta)
        if delta <= 0 or (1 / (D * delta)).denominator != 1:
            raise ValueError(f"1/(3*delta) must be a positive integer, got delta={delta}")

    @property
    def steps(self) -> int:
        """Grid values per component minus one (6 for delta = 1/18)."""
        return int(1 / (D * self.delta))

    @property
    def denominator(self) -> int:
        return int(1 / self.delta)

    @property
    def candidates(self) -> int:
        return (self.steps + 1) ** (N_POINTS - 1)

    @property
    def simplex_points(self) -> int:
        """Grid points of the whole simplex (components in multiples of delta)."""
        n = self.denominator
        return comb(n + N_POINTS - 1, N_POINTS - 1)


def generate_grid(spec: GridSpec, chunk_rows: int = 1_000_000) -> Iterator[np.ndarray]:
    """Integer numerators (over ``spec.denominator``) of in-polytope grid states.

    The first 8 components run over 0..steps in lexicographic order; the
    ninth is fixed by normalization and kept only if it also lies in range.
    """
    n = spec.steps
    total = spec.denominator
    vals = np.arange(n + 1, dtype=np.int64)
    free = N_POINTS - 1
    prefix_len = 0
    while prefix_len < free and (n + 1) ** (free - prefix_len) > chunk_rows:
        prefix_len += 1
    tail = free - prefix_len
    mesh = np.stack(np.meshgrid(*([vals] * tail), indexing="ij"), -1).reshape(-1, tail)
    for prefix in itertools.product(range(n + 1), repeat=prefix_len):
        block = np.empty((len(mesh), free), dtype=np.int64)
        block[:, :prefix_len] = prefix
        block[:, prefix_len:] = mesh
        last = total - block.sum(axis=1)
        keep = (last >= 0) & (last <= n)
        if keep.any():
            yield np.concatenate([block[keep], last[keep, None]], axis=1)


def grid_points(spec: GridSpec) -> np.ndarray:
    parts = list(generate_grid(spec))
    if not parts:
        return np.empty((0, N_POINTS), dtype=np.int64)
    return np.concatenate(parts)


# --- classification cascade -----------------------------------------------------


@dataclass(frozen=True)
class CascadeConfig:
    mub: tuple = ()  # MubWitness instances, applied orbit-wise
    quasipure_exact: bool = False
    ppt_tol: float = det.PPT_TOL

    @classmethod
    def default(cls, perm=det.DEFAULT_MUB_PERM, margin: float = det.DEFAULT_MARGIN, **kw) -> "CascadeConfig":
        return cls(mub=tuple(det.default_mub_witnesses(perm, margin)), **kw)

    def describe(self) -> dict:
        return {
            "mub": [
                {"m": w.m, "perm": w.perm, "lower": w.lower, "upper": w.upper, "margin": w.margin}
                for w in self.mub
            ],
            "quasipure_exact": self.quasipure_exact,
            "ppt_tol": self.ppt_tol,
        }


@dataclass
class Classification:
    labels: np.ndarray  # int8, Label values
    detectors: np.ndarray  # uint8 codes into DETECTORS
    witness_ids: np.ndarray  # int64, -1 if none

    @classmethod
    def empty(cls, n: int) -> "Classification":
        return cls(
            np.full(n, Label.UNKNOWN, dtype=np.int8),
            np.zeros(n, dtype=np.uint8),
            np.full(n, -1, dtype=np.int64),
        )

    def set(self, mask, label: Label, detector: str, wid=None):
        self.labels[mask] = label
        self.detectors[mask] = _DET_CODE[detector]
        if wid is not None:
            self.witness_ids[mask] = wid


@dataclass(frozen=True)
class WitnessTable:
    """Column view of a witness list for vectorized application."""

    kappas: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    margin: np.ndarray
    ids: np.ndarray

    @classmethod
    def from_witnesses(cls, ws: Sequence) -> "WitnessTable":
        return cls(
            np.array([w.kappa for w in ws], float).reshape(-1, N_POINTS),
            np.array([w.lower for w in ws], float),
            np.array([w.upper for w in ws], float),
            np.array([w.margin for w in ws], float),
            np.array([getattr(w, "id", i) for i, w in enumerate(ws)], np.int64),
        )

    def __len__(self):
        return len(self.kappas)


def first_firing(table: WitnessTable, c: np.ndarray, block: int = 64) -> np.ndarray:
    """Index (into ``table``) of the first witness detecting each row, or -1."""
    c = np.atleast_2d(c)
    out = np.full(len(c), -1, dtype=np.int64)
    pending = np.arange(len(c))
    for s in range(0, len(table), block):
        if len(pending) == 0:
            break
        sl = slice(s, s + block)
        fires = det.witness_fires(
            table.kappas[sl], table.lower[sl], table.upper[sl], table.margin[sl], c[pending]
        )
        hit = fires.any(axis=1)
        out[pending[hit]] = s + np.argmax(fires[hit], axis=1)
        pending = pending[~hit]
    return out


def _orbit_reduce(numerators: np.ndarray | None, denominator: int | None, c: np.ndarray):
    """Unique orbit representatives; returns (rep_coeffs, inverse) or None."""
    if numerators is None or len(c) < 2:
        return None
    codes = canonical_codes(numerators, denominator + 1)
    uniq, inverse = np.unique(codes, return_inverse=True)
    return decode(uniq, denominator + 1) / denominator, inverse


def _apply_table(table: WitnessTable, c, numerators, denominator) -> np.ndarray:
    red = _orbit_reduce(numerators, denominator, c)
    if red is None:
        return first_firing(table, c)
    reps, inverse = red
    return first_firing(table, reps)[inverse]


def classify_batch(
    c: np.ndarray,
    config: CascadeConfig = CascadeConfig(),
    witnesses: Sequence = (),
    numerators: np.ndarray | None = None,
    denominator: int | None = None,
) -> Classification:
    """Run the detector cascade on each row of ``c``.

    Order: outside enclosure or NPT -> FREE; kernel -> SEP; quasipure,
    then MUB witnesses, then stored witnesses -> BOUND; otherwise UNKNOWN
    (or SEP when the family is one on which the quasipure test is exact).
    Passing integer ``numerators`` over ``denominator`` makes the
    enclosure and kernel tests exact.
    """
    c = np.atleast_2d(np.asarray(c, float))
    out = Classification.empty(len(c))
    if numerators is not None:
        numerators = np.atleast_2d(numerators)
        inside = np.all((numerators >= 0) & (D * numerators <= denominator), axis=1)
    else:
        inside = np.all((c >= -1e-12) & (c <= 1 / D + 1e-12), axis=1)
    out.set(~inside, Label.FREE, "enclosure")

    idx = np.flatnonzero(inside)
    npt = det.ppt_min_eigenvalues(c[idx]) < -config.ppt_tol if len(idx) else np.zeros(0, bool)
    out.set(idx[npt], Label.FREE, "ppt")
    idx = idx[~npt]

    if numerators is not None:
        ker = kernel_contains(numerators[idx], denominator)
    else:
        ker = kernel_contains(c[idx])
    out.set(idx[ker], Label.SEP, "kernel")
    idx = idx[~ker]

    if len(idx):
        val, ok = det.quasipure_batch(c[idx])
        hit = ok & (val > det.QP_DETECT_TOL)
        out.set(idx[hit], Label.BOUND, "quasipure")
        idx = idx[~hit]
        if config.quasipure_exact:
            out.set(idx, Label.SEP, "quasipure-exact")
            idx = idx[:0]

    sub_num = numerators[idx] if numerators is not None else None
    for w in config.mub:
        if not len(idx):
            break
        table = WitnessTable.from_witnesses([w])
        hit = _apply_table(table, c[idx], sub_num, denominator) >= 0
        out.set(idx[hit], Label.BOUND, w.name)
        idx = idx[~hit]
        sub_num = sub_num[~hit] if sub_num is not None else None

    if len(idx) and len(witnesses):
        table = witnesses if isinstance(witnesses, WitnessTable) else WitnessTable.from_witnesses(witnesses)
        first = _apply_table(table, c[idx], sub_num, denominator)
        hit = first >= 0
        out.set(idx[hit], Label.BOUND, "witness", table.ids[first[hit]])
    return out


@dataclass(frozen=True)
class LabeledPoint:
    c: tuple
    label: Label
    detector: str
    witness_id: int | None = None


def classify(c, witnesses: Sequence = (), config: CascadeConfig | None = None) -> LabeledPoint:
    """Single-point cascade; exact when ``c`` holds Fractions."""
    if config is None:
        config = CascadeConfig.default()
    exact = all(isinstance(x, (Fraction, int)) for x in c)
    num = den = None
    if exact:
        fr = [Fraction(x) for x in c]
        den = int(np.lcm.reduce([x.denominator for x in fr]))
        num = np.array([[int(x * den) for x in fr]], dtype=np.int64)
    cf = np.array([[float(x) for x in c]])
    res = classify_batch(cf, config, witnesses, num, den)
    wid = int(res.witness_ids[0])
    return LabeledPoint(
        tuple(c), Label(int(res.labels[0])), DETECTORS[res.detectors[0]], wid if wid >= 0 else None
    )


# --- dataset --------------------------------------------------------------------


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    header: dict
    coeffs: np.ndarray
    labels: np.ndarray
    detectors: np.ndarray
    witness_ids: np.ndarray
    numerators: np.ndarray | None = None
    denominator: int | None = None

    def __post_init__(self):
        # JSON-normal form so headers compare equal after a round trip
        self.header = json.loads(json.dumps(self.header, sort_keys=True, default=_json_default))

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        same_num = (self.numerators is None) == (other.numerators is None) and (
            self.numerators is None or np.array_equal(self.numerators, other.numerators)
        )
        return (
            self.header == other.header
            and self.denominator == other.denominator
            and same_num
            and np.array_equal(self.coeffs, other.coeffs)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.detectors, other.detectors)
            and np.array_equal(self.witness_ids, other.witness_ids)
        )

    @classmethod
    def from_classification(cls, header: dict, coeffs, cls_: Classification, numerators=None, denominator=None):
        return cls(dict(header), np.asarray(coeffs, float), cls_.labels, cls_.detectors, cls_.witness_ids, numerators, denominator)

    def subset(self, mask) -> "Dataset":
        return Dataset(
            dict(self.header),
            self.coeffs[mask],
            self.labels[mask],
            self.detectors[mask],
            self.witness_ids[mask],
            None if self.numerators is None else self.numerators[mask],
            self.denominator,
        )

    def counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.labels == lab)) for name, lab in zip(LABEL_NAMES, Label)}

    def detector_counts(self) -> dict[str, int]:
        vals, cnt = np.unique(self.detectors, return_counts=True)
        return {DETECTORS[v] or "none": int(n) for v, n in zip(vals, cnt)}


MAGIC = "# magicsimplex-dataset 1"
COLUMNS = [f"c{k}{l}" for k in range(D) for l in range(D)] + ["label", "detector", "witness_id"]


def dataset_write(ds: Dataset, path) -> None:
    header = dict(ds.header)
    header["rows"] = len(ds)
    header["denominator"] = ds.denominator
    lines = [MAGIC, "# " + json.dumps(header, sort_keys=True, default=_json_default), ",".join(COLUMNS)]
    if ds.numerators is not None:
        table = [str(Fraction(i, ds.denominator)) for i in range(ds.denominator + 1)]
        coeff_rows = (",".join(table[x] for x in row) for row in ds.numerators.tolist())
    else:
        coeff_rows = (",".join(repr(x) for x in row) for row in ds.coeffs.tolist())
    body = (
        f"{cr},{LABEL_NAMES[lab]},{DETECTORS[dc]},{wid if wid >= 0 else ''}"
        for cr, lab, dc, wid in zip(coeff_rows, ds.labels.tolist(), ds.detectors.tolist(), ds.witness_ids.tolist())
    )
    with Path(path).open("w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
        for row in body:
            fh.write(row + "\n")


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def read_header(path) -> dict:
    with Path(path).open() as fh:
        if fh.readline().rstrip("\n") != MAGIC:
            raise DatasetError(f"{path}:1: not a magicsimplex dataset")
        line = fh.readline()
        if not line.startswith("# "):
            raise DatasetError(f"{path}:2: missing header line")
        return json.loads(line[2:])


def dataset_read(path) -> Dataset:
    path = Path(path)
    header = read_header(path)
    nrows = header.get("rows")
    den = header.get("denominator")
    label_code = {n: i for i, n in enumerate(LABEL_NAMES)}
    lut: dict[str, int] = {}
    num_rows, coeff_rows, labels, dets, wids = [], [], [], [], []
    with path.open() as fh:
        for _ in range(2):
            fh.readline()
        if fh.readline().rstrip("\n") != ",".join(COLUMNS):
            raise DatasetError(f"{path}:3: unexpected column header")
        lineno = 3
        for lineno, line in enumerate(fh, 4):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(COLUMNS):
                raise DatasetError(f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(parts)}")
            try:
                if den is not None:
                    try:
                        num_rows.append([lut[s] for s in parts[:N_POINTS]])
                    except KeyError:
                        for s in parts[:N_POINTS]:
                            if s not in lut:
                                x = Fraction(s) * den
                                if x.denominator != 1:
                                    raise ValueError(f"{s} is not a multiple of 1/{den}")
                                lut[s] = int(x)
                        num_rows.append([lut[s] for s in parts[:N_POINTS]])
                else:
                    coeff_rows.append([float(s) for s in parts[:N_POINTS]])
                labels.append(label_code[parts[N_POINTS]])
                dets.append(_DET_CODE[parts[N_POINTS + 1]])
                wids.append(int(parts[N_POINTS + 2]) if parts[N_POINTS + 2] else -1)
            except (ValueError, KeyError, ZeroDivisionError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    got = len(labels)
    if nrows is not None and got != nrows:
        raise DatasetError(f"{path}:{lineno}: truncated or padded file, header declares {nrows} rows, found {got}")
    if den is not None:
        numerators = np.array(num_rows, dtype=np.int64).reshape(-1, N_POINTS)
        coeffs = numerators / den
    else:
        numerators = None
        coeffs = np.array(coeff_rows, dtype=float).reshape(-1, N_POINTS)
    header = {k: v for k, v in header.items() if k not in ("rows", "denominator")}
    return Dataset(
        header,
        coeffs,
        np.array(labels, dtype=np.int8),
        np.array(dets, dtype=np.uint8),
        np.array(wids, dtype=np.int64),
        numerators,
        den,
    )


def file_digest(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# --- grid classification with checkpoints ---------------------------------------


def _encode(a: np.ndarray) -> str:
    buf = io.BytesIO()
    np.save(buf, a, allow_pickle=False)
    return base64.b64encode(buf.getvalue()).decode()


def _decode(s: str) -> np.ndarray:
    return np.load(io.BytesIO(base64.b64decode(s)), allow_pickle=False)


def _classify_chunk(args):
    num, den, config, table = args
    res = classify_batch(num / den, config, table, num, den)
    return res.labels, res.detectors, res.witness_ids


def classify_grid(
    spec: GridSpec,
    config: CascadeConfig,
    witnesses: Sequence = (),
    header: dict | None = None,
    checkpoint: Path | None = None,
    checkpoint_every: int = 50_000,
    resume: bool = False,
    workers: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> Dataset:
    """Classify every in-polytope grid state; order is lexicographic.

    Finished chunks are appended to ``checkpoint`` (JSON lines) and reused
    on ``resume`` when the configuration digest matches.
    """
    num = grid_points(spec)
    den = spec.denominator
    table = WitnessTable.from_witnesses(witnesses)
    digest = hashlib.sha256(
        json.dumps(
            {"delta": str(spec.delta), "config": config.describe(), "witnesses": table.ids.tolist(),
             "bounds": table.upper.tolist() + table.lower.tolist(), "every": checkpoint_every},
            sort_keys=True,
            default=_json_default,
        ).encode()
    ).hexdigest()
    done: dict[int, tuple] = {}
    if checkpoint is not None and resume and Path(checkpoint).exists():
        with Path(checkpoint).open() as fh:
            for line in fh:
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    break  # torn final write
                if rec.get("digest") == digest:
                    done[rec["chunk"]] = (_decode(rec["labels"]), _decode(rec["detectors"]), _decode(rec["witness_ids"]))
    elif checkpoint is not None and Path(checkpoint).exists():
        Path(checkpoint).unlink()

    starts = list(range(0, len(num), checkpoint_every))
    todo = [i for i in range(len(starts)) if i not in done]
    jobs = ((num[starts[i] : starts[i] + checkpoint_every], den, config, table) for i in todo)

    def record(i, res):
        done[i] = res
        if checkpoint is not None:
            with Path(checkpoint).open("a") as fh:
                fh.write(json.dumps({"chunk": i, "digest": digest, "labels": _encode(res[0]),
                                     "detectors": _encode(res[1]), "witness_ids": _encode(res[2])}) + "\n")
        if progress:
            progress(len(done), len(starts))

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in zip(todo, pool.map(_classify_chunk, jobs)):
                record(i, res)
    else:
        for i, job in zip(todo, jobs):
            record(i, _classify_chunk(job))

    labels = np.concatenate([done[i][0] for i in range(len(starts))]) if starts else np.zeros(0, np.int8)
    dets = np.concatenate([done[i][1] for i in range(len(starts))]) if starts else np.zeros(0, np.uint8)
    wids = np.concatenate([done[i][2] for i in range(len(starts))]) if starts else np.zeros(0, np.int64)
    hdr = {"version": __version__, "kind": "grid", "delta": str(spec.delta), "candidates": spec.candidates, "cascade": config.describe()}
    hdr.update(header or {})
    return Dataset(hdr, num / den, labels, dets, wids, num, den)


# --- family slices --------------------------------------------------------------


def family_a(alpha, beta, gamma) -> np.ndarray:
    """(1-a-b-g)/9 * 1 + a P00 + b P01 + g P02, as coefficient rows."""
    alpha, beta, gamma = np.broadcast_arrays(*(np.asarray(x) for x in (alpha, beta, gamma)))
    base = -alpha - beta - gamma + 1
    out = np.repeat(base[..., None], N_POINTS, axis=-1).astype(np.result_type(base, float))
    out[..., 0] = 8 * alpha - beta - gamma + 1
    out[..., 1] = -alpha + 8 * beta - gamma + 1
    out[..., 2] = -alpha - beta + 8 * gamma + 1
    return out / 9


def family_b(alpha, beta, gamma, delta) -> np.ndarray:
    alpha, beta, gamma, delta = np.broadcast_arrays(*(np.asarray(x, float) for x in (alpha, beta, gamma, delta)))
    r0 = 8 * alpha / 5 - beta / 4 - gamma - delta + 1
    r1 = -alpha / 5 + 7 * beta / 8 - gamma - delta + 1
    r2 = -alpha / 5 - beta / 4 + 2 * gamma - delta + 1
    r3 = -alpha / 5 - beta / 4 - gamma + 2 * delta + 1
    return np.stack([r0, r1, r1, r2, r2, r2, r3, r3, r3], axis=-1) / 9


@dataclass(frozen=True)
class FamilySpec:
    """A slice of the simplex: free parameters on a grid, the rest fixed.

    ``ranges`` maps each free parameter to (start, stop, step); for family A
    these are Fractions and the scan is exact.
    """

    family: str  # "A", "B1", "B2", "B3"
    ranges: tuple[tuple[str, tuple], ...]
    fixed: tuple[tuple[str, float], ...] = ()

    @property
    def exact(self) -> bool:
        return self.family == "A" and all(isinstance(x, Fraction) for _, r in self.ranges for x in r)

    def axes(self) -> dict[str, np.ndarray]:
        out = {}
        for name, (start, stop, step) in self.ranges:
            n = int(round((stop - start) / step)) + 1
            if self.exact:
                out[name] = np.array([start + i * step for i in range(n)], dtype=object)
            else:
                out[name] = float(start) + float(step) * np.arange(n)
        return out

    def describe(self) -> dict:
        return {
            "family": self.family,
            "ranges": {k: [str(x) for x in v] for k, v in self.ranges},
            "fixed": {k: v for k, v in self.fixed},
        }


def family_a_spec(step: Fraction = Fraction(1, 72), start: Fraction = Fraction(-1, 6), stop: Fraction = Fraction(1)) -> FamilySpec:
    r = (Fraction(start), Fraction(stop), Fraction(step))
    return FamilySpec("A", (("alpha", r), ("beta", r), ("gamma", r)))


B_FIXED = {
    "B1": (("gamma", -1 / sqrt(3)), ("delta", 0.0)),
    "B2": (("gamma", 0.83), ("delta", 0.0)),
    "B3": (("alpha", 5 / 3 * (-1 + sqrt(3))), ("beta", -0.1)),
}


def positivity_box(family: str) -> dict[str, tuple[float, float]]:
    """Bounding box of the free parameters over which every coefficient is >= 0."""
    from scipy.optimize import linprog

    fixed = dict(B_FIXED[family])
    names = [p for p in ("alpha", "beta", "gamma", "delta") if p not in fixed]
    # coefficients are affine in the free parameters: c = M x + b
    def coeffs(x):
        vals = dict(fixed)
        vals.update(zip(names, x))
        return family_b(vals["alpha"], vals["beta"], vals["gamma"], vals["delta"])

    b0 = coeffs([0.0, 0.0])
    m = np.stack([coeffs(np.eye(2)[i]) - b0 for i in range(2)], axis=1)
    box = {}
    for i, name in enumerate(names):
        ext = []
        for sign in (1, -1):
            obj = np.zeros(2)
            obj[i] = sign
            res = linprog(obj, A_ub=-m, b_ub=b0, bounds=(None, None), method="highs")
            ext.append(sign * res.fun)
        box[name] = (ext[0], ext[1])
    return box


def family_b_spec(family: str, step: float = 0.01) -> FamilySpec:
    box = positivity_box(family)
    ranges = tuple(
        (name, (step * np.floor(lo / step), step * np.ceil(hi / step), step)) for name, (lo, hi) in box.items()
    )
    return FamilySpec(family, ranges, B_FIXED[family])


def family_spec(family: str, step=None) -> FamilySpec:
    if family == "A":
        return family_a_spec(Fraction(step) if step is not None else Fraction(1, 72))
    if family in B_FIXED:
        return family_b_spec(family, float(step) if step is not None else 0.01)
    raise ValueError(f"unknown family {family!r}")


def family_points(spec: FamilySpec):
    """(coeffs, numerators, denominator, params, tested) for positive grid states."""
    axes = spec.axes()
    names = list(axes)
    if spec.exact:
        q = int(np.lcm.reduce([Fraction(x).denominator for v in axes.values() for x in v]))
        ints = [np.array([int(x * q) for x in axes[n]], dtype=np.int64) for n in names]
        grids = np.meshgrid(*ints, indexing="ij")
        a, b, g = (x.ravel() for x in grids)
        num = np.repeat((q - a - b - g)[:, None], N_POINTS, axis=1)
        num[:, 0] = 8 * a - b - g + q
        num[:, 1] = -a + 8 * b - g + q
        num[:, 2] = -a - b + 8 * g + q
        tested = len(num)
        pos = np.all(num >= 0, axis=1)
        num = num[pos]
        den = 9 * q
        params = np.stack([a[pos], b[pos], g[pos]], axis=1) / q
        return num / den, num, den, params, tested
    grids = np.meshgrid(*[axes[n] for n in names], indexing="ij")
    vals = dict(spec.fixed)
    vals.update({n: gr.ravel() for n, gr in zip(names, grids)})
    if spec.family == "A":
        c = family_a(vals["alpha"], vals["beta"], vals["gamma"])
    else:
        c = family_b(vals["alpha"], vals["beta"], vals["gamma"], vals["delta"])
    tested = len(c)
    pos = np.all(c >= -1e-12, axis=1)
    params = np.stack([vals[n][pos] for n in names], axis=1)
    return np.clip(c[pos], 0, None), None, None, params, tested


def scan_family(spec: FamilySpec, config: CascadeConfig | None = None, witnesses: Sequence = ()) -> Dataset:
    if config is None:
        config = CascadeConfig.default()
    if spec.family == "A":
        config = replace(config, quasipure_exact=True)
    c, num, den, params, tested = family_points(spec)
    res = classify_batch(c, config, witnesses, num, den)
    header = {"version": __version__, "kind": "family", "tested": tested, "params": [n for n, _ in spec.ranges], "cascade": config.describe()}
    header.update(spec.describe())
    return Dataset.from_classification(header, c, res, num, den)


def family_counts(ds: Dataset) -> dict[str, int]:
    """Tested / positive / FREE / outside-polytope / SEP / BOUND / UNKNOWN."""
    outside = int(np.sum(ds.detectors == _DET_CODE["enclosure"]))
    counts = ds.counts()
    return {
        "tested": int(ds.header.get("tested", len(ds))),
        "positive": len(ds),
        "free": counts["FREE"],
        "outside": outside,
        "sep": counts["SEP"],
        "bound": counts["BOUND"],
        "unknown": counts["UNKNOWN"],
    }


# --- witness mining -------------------------------------------------------------


@dataclass
class MiningReport:
    drawn: int = 0
    detecting: int = 0
    relabeled: int = 0
    stop_reason: str = ""
    history: list = field(default_factory=list)  # (witness id, new detections)


def mine_witnesses(
    ds: Dataset,
    budget: int,
    seed: int,
    stall: int = 500,
    restarts: int = det.DEFAULT_RESTARTS,
    margin: float = det.DEFAULT_MARGIN,
    store: Path | None = None,
    harden_factor: int = 4,
    progress: Callable[[MiningReport, int], None] | None = None,
) -> tuple[list, Dataset, MiningReport]:
    """Draw random simplex witnesses and relabel the UNKNOWN points they detect.

    ``budget`` is the total number of witnesses for this seed; witnesses
    already in ``store`` are re-applied rather than redrawn, so a resumed
    run ends in the same state as an uninterrupted one. Each detection
    relabels the whole symmetry orbit. A witness that detects anything is
    re-estimated with ``harden_factor`` times more restarts first.
    """
    ds = ds.subset(slice(None))
    ds.labels = ds.labels.copy()
    ds.detectors = ds.detectors.copy()
    ds.witness_ids = ds.witness_ids.copy()
    report = MiningReport()
    existing = det.read_witness_store(store) if store is not None else []

    unk = np.flatnonzero(ds.labels == Label.UNKNOWN)
    if ds.numerators is not None and len(unk):
        base = ds.denominator + 1
        codes = canonical_codes(ds.numerators[unk], base)
        uniq, inverse = np.unique(codes, return_inverse=True)
        reps = decode(uniq, base) / ds.denominator
    else:
        reps = ds.coeffs[unk]
        inverse = np.arange(len(unk))
    alive = np.ones(len(reps), dtype=bool)
    new_ws = []
    streak = 0

    def apply(w) -> int:
        nonlocal streak
        live = np.flatnonzero(alive)
        if not len(live):
            return 0
        hit = det.witness_fires(np.array([w.kappa]), w.lower, w.upper, w.margin, reps[live])[:, 0]
        return live[hit]

    def relabel(w, hit_reps):
        alive[hit_reps] = False
        mask = np.isin(inverse, hit_reps)
        pts = unk[mask]
        ds.labels[pts] = Label.BOUND
        ds.detectors[pts] = _DET_CODE["witness"]
        ds.witness_ids[pts] = w.id
        return len(pts)

    for w in existing[:budget]:
        hit = apply(w)
        n = relabel(w, hit) if len(hit) else 0
        report.drawn += 1
        report.history.append((w.id, n))
        if n:
            report.detecting += 1
            report.relabeled += n
            streak = 0
        else:
            streak += 1

    i = len(existing)
    while report.drawn < budget:
        if streak >= stall:
            break
        if not alive.any():
            report.stop_reason = "no unknown points left"
            break
        wseed = det.witness_seed(seed, i)
        kappa = det.generate_random_witness(wseed)
        w = det.make_witness(kappa, wseed, restarts, margin, witness_id=i)
        hit = apply(w)
        if len(hit):
            w = det.make_witness(kappa, wseed, restarts * harden_factor, margin, witness_id=i)
            hit = apply(w)
        n = relabel(w, hit) if len(hit) else 0
        new_ws.append(w)
        if store is not None:
            det.append_witnesses(store, [w])
        report.drawn += 1
        report.history.append((w.id, n))
        if n:
            report.detecting += 1
            report.relabeled += n
            streak = 0
        else:
            streak += 1
        i += 1
        if progress:
            progress(report, int(alive.sum()))
    if not report.stop_reason:
        report.stop_reason = "stall" if streak >= stall else "budget"
    ds.header = dict(ds.header)
    ds.header["mining"] = {
        "seed": seed,
        "budget": budget,
        "stall": stall,
        "restarts": restarts,
        "margin": margin,
        "harden_factor": harden_factor,
        "drawn": report.drawn,
        "detecting": report.detecting,
        "relabeled": report.relabeled,
        "stop_reason": report.stop_reason,
    }
    ds.header = json.loads(json.dumps(ds.header, sort_keys=True, default=_json_default))
    return new_ws, ds, report
