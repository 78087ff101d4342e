"""Entanglement and separability detectors for Bell-diagonal qutrit states."""

from __future__ import annotations

import itertools
import json
import os
import time
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import numpy as np

from . import bell_basis as bb
from .bell_basis import D
from .geometry import group_perms

PPT_TOL = 1e-10
QP_TIE_TOL = 1e-9
QP_DETECT_TOL = 1e-9
DEFAULT_MARGIN = 1e-7
DEFAULT_RESTARTS = 200

# Found by exhaustive search over the 6^4 per-basis permutations on the B1 slice
# (see search_mub_permutation); the only choice with any detections there.
DEFAULT_MUB_PERM = ((0, 1, 2), (1, 2, 0), (0, 1, 2), (0, 1, 2))


# --- PPT ----------------------------------------------------------------------


def partial_transpose(rho: np.ndarray) -> np.ndarray:
    """Transpose on the second subsystem; works on batches (..., 9, 9)."""
    t = np.asarray(rho).reshape(rho.shape[:-2] + (D, D, D, D))
    return np.swapaxes(t, -3, -1).reshape(rho.shape)


@lru_cache(maxsize=None)
def _pt_projectors() -> np.ndarray:
    out = partial_transpose(bb.bell_projectors())
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PptResult:
    min_eigenvalue: float
    is_ppt: bool


def ppt_min_eigenvalues(c: np.ndarray, chunk: int = 50_000) -> np.ndarray:
    """Smallest eigenvalue of the partial transpose for each row of ``c``."""
    c = np.atleast_2d(np.asarray(c, float))
    out = np.empty(len(c))
    pt = _pt_projectors()
    for s in range(0, len(c), chunk):
        m = np.einsum("na,aij->nij", c[s : s + chunk], pt)
        out[s : s + chunk] = np.linalg.eigvalsh(m)[:, 0]
    return out


def is_ppt(c, tol: float = PPT_TOL) -> PptResult:
    c = bb.check_coeffs(c)
    rho = bb.state_from_coeffs(c)
    ev = float(np.linalg.eigvalsh(partial_transpose(rho))[0])
    return PptResult(ev, ev >= -tol)


# --- quasipure concurrence ------------------------------------------------------


def _swap_perm(which: str) -> np.ndarray:
    # ordering A1 B1 A2 B2, each of size D
    idx = np.arange(D**4).reshape(D, D, D, D)
    axes = (2, 1, 0, 3) if which == "A" else (0, 3, 2, 1)
    return idx.transpose(axes).ravel()


@lru_cache(maxsize=None)
def concurrence_operator() -> np.ndarray:
    """A = 4 P_-^{A1A2} (x) P_-^{B1B2} on two copies ordered (A1 B1 A2 B2).

    Normalized so that a pure state has C = sqrt(<psi psi|A|psi psi>)
    = sqrt(2 (1 - Tr rho_A^2)).
    """
    n = D**4
    eye = np.eye(n)
    swap_a = eye[_swap_perm("A")]
    swap_b = eye[_swap_perm("B")]
    return 4 * ((eye - swap_a) / 2) @ ((eye - swap_b) / 2)


@lru_cache(maxsize=None)
def _qp_tensor() -> np.ndarray:
    """G[z, i, j] = <psi_i psi_j|A|psi_z psi_z> / sqrt(<psi_z psi_z|A|psi_z psi_z>)."""
    v = bb.bell_vectors()
    pairs = np.einsum("ai,bj->abij", v, v).reshape(D * D, D * D, D**4)
    a = concurrence_operator()
    out = np.empty((D * D, D * D, D * D), dtype=complex)
    for z in range(D * D):
        chi = a @ pairs[z, z]
        norm = np.sqrt(np.vdot(pairs[z, z], chi).real)
        out[z] = np.einsum("abi,i->ab", pairs.conj(), chi) / norm
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class QuasipureResult:
    c_qp: float
    applicable: bool
    singular_values: tuple[float, ...] = ()


def quasipure_batch(c: np.ndarray, chunk: int = 50_000) -> tuple[np.ndarray, np.ndarray]:
    """Quasipure lower bound for each row; returns (c_qp, applicable)."""
    c = np.atleast_2d(np.asarray(c, float))
    g = _qp_tensor()
    vals = np.zeros(len(c))
    ok = np.zeros(len(c), dtype=bool)
    for s in range(0, len(c), chunk):
        x = c[s : s + chunk]
        top2 = -np.sort(-x, axis=1)[:, :2]
        z = np.argmax(x, axis=1)
        app = top2[:, 0] - top2[:, 1] >= QP_TIE_TOL
        sq = np.sqrt(np.clip(x, 0, None))
        t = sq[:, :, None] * sq[:, None, :] * g[z]
        sv = np.linalg.svd(t, compute_uv=False)
        v = np.maximum(0.0, 2 * sv[:, 0] - sv.sum(axis=1))
        vals[s : s + chunk] = np.where(app, v, 0.0)
        ok[s : s + chunk] = app
    return vals, ok


def quasipure(c) -> QuasipureResult:
    c = bb.check_coeffs(c)
    order = np.argsort(-c, kind="stable")
    applicable = bool(c[order[0]] - c[order[1]] >= QP_TIE_TOL)
    sq = np.sqrt(np.clip(c, 0, None))
    t = np.outer(sq, sq) * _qp_tensor()[order[0]]
    sv = np.linalg.svd(t, compute_uv=False)
    val = max(0.0, 2 * sv.max() - sv.sum()) if applicable else 0.0
    return QuasipureResult(float(val), applicable, tuple(float(s) for s in sv))


def pure_concurrence(psi: np.ndarray) -> float:
    """sqrt(2 (1 - Tr rho_A^2)) for a normalized two-qutrit ket."""
    m = np.asarray(psi).reshape(D, D)
    rho_a = m @ m.conj().T
    return float(np.sqrt(max(0.0, 2 * (1 - np.trace(rho_a @ rho_a).real))))


# --- see-saw separable bounds ---------------------------------------------------


@dataclass(frozen=True)
class SeesawResult:
    lower: float
    upper: float
    discarded: int  # restarts that hit the iteration cap


def _random_product_inits(restarts: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.empty((restarts, D), dtype=complex)
    b = np.empty((restarts, D), dtype=complex)
    for r in range(restarts):
        z = np.random.default_rng([seed, r]).standard_normal((2, D, 2))
        z = z[..., 0] + 1j * z[..., 1]
        a[r] = z[0] / np.linalg.norm(z[0])
        b[r] = z[1] / np.linalg.norm(z[1])
    return a, b


def _seesaw_max(op: np.ndarray, a: np.ndarray, b: np.ndarray, tol: float, max_iter: int):
    t = op.reshape(D, D, D, D)  # <ij|op|kl>
    to_a = t.transpose(0, 2, 1, 3).reshape(D * D, D * D)  # [(i,k), (j,l)]
    to_b = t.transpose(1, 3, 0, 2).reshape(D * D, D * D)  # [(j,l), (i,k)]
    n = len(a)
    f = np.full(n, -np.inf)
    done = np.zeros(n, dtype=bool)
    act = np.arange(n)
    for _ in range(max_iter):
        b_act = b[act]
        bb_ = (b_act.conj()[:, :, None] * b_act[:, None, :]).reshape(len(act), -1)
        _, u = np.linalg.eigh((bb_ @ to_a.T).reshape(len(act), D, D))
        a_act = u[:, :, -1]
        aa = (a_act.conj()[:, :, None] * a_act[:, None, :]).reshape(len(act), -1)
        e, u = np.linalg.eigh((aa @ to_b.T).reshape(len(act), D, D))
        b[act] = u[:, :, -1]
        f_new = e[:, -1]
        conv = np.abs(f_new - f[act]) < tol
        f[act] = f_new
        done[act[conv]] = True
        act = act[~conv]
        if len(act) == 0:
            break
    return f, done


def estimate_operator_interval(
    op: np.ndarray,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> SeesawResult:
    """Inner estimates of min/max of Tr(op |ab><ab|) over product states.

    Alternating top-eigenvector iteration from ``restarts`` random starts;
    restart r always uses the stream (seed, r), so more restarts never
    lowers the reported maximum.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    op = (op + op.conj().T) / 2
    a, b = _random_product_inits(restarts, seed)
    hi, ok_hi = _seesaw_max(op, a.copy(), b.copy(), tol, max_iter)
    lo, ok_lo = _seesaw_max(-op, a.copy(), b.copy(), tol, max_iter)
    if not ok_hi.any() or not ok_lo.any():
        raise RuntimeError("see-saw did not converge for any restart")
    discarded = int((~ok_hi).sum() + (~ok_lo).sum())
    return SeesawResult(float(-lo[ok_lo].max()), float(hi[ok_hi].max()), discarded)


def estimate_separable_interval(
    kappa,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    margin: float = DEFAULT_MARGIN,
) -> tuple[float, float, float]:
    res = estimate_operator_interval(bb.operator_from_kappa(kappa), restarts, seed)
    return res.lower, res.upper, margin


# --- witnesses ------------------------------------------------------------------


@dataclass(frozen=True)
class Detection:
    detector: str
    value: float
    verdict: str  # "entangled" | "inconclusive"

    @property
    def entangled(self) -> bool:
        return self.verdict == "entangled"


def _verdict(value: float, lower: float, upper: float, margin: float) -> str:
    return "entangled" if value > upper + margin or value < lower - margin else "inconclusive"


@dataclass(frozen=True)
class SimplexWitness:
    kappa: tuple[float, ...]
    lower: float
    upper: float
    margin: float = DEFAULT_MARGIN
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0
    id: int = 0
    created: str = ""

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("witness lower bound exceeds upper bound")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")

    def to_json(self) -> str:
        d = asdict(self)
        d["kappa"] = [repr(float(x)) for x in self.kappa]
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "SimplexWitness":
        d = json.loads(line)
        d["kappa"] = tuple(float(x) for x in d["kappa"])
        return cls(**d)


def generate_random_witness(seed: int) -> np.ndarray:
    """Unit-norm kappa with i.i.d. standard normal direction."""
    k = np.random.default_rng(seed).standard_normal(D * D)
    return k / np.linalg.norm(k)


def witness_seed(run_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([run_seed, index]).generate_state(1, np.uint32)[0])


def timestamp() -> str:
    """Creation stamp from SOURCE_DATE_EPOCH; empty otherwise so stores stay byte-stable."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(int(epoch))) if epoch else ""


def make_witness(kappa, seed: int, restarts: int = DEFAULT_RESTARTS, margin: float = DEFAULT_MARGIN, witness_id: int = 0) -> SimplexWitness:
    lower, upper, margin = estimate_separable_interval(kappa, restarts, seed, margin)
    return SimplexWitness(
        tuple(float(x) for x in kappa), lower, upper, margin, restarts, seed, witness_id, timestamp()
    )


def apply_witness(w: SimplexWitness, c) -> Detection:
    value = float(np.dot(w.kappa, np.asarray(c, float)))
    return Detection(f"witness:{w.id}", value, _verdict(value, w.lower, w.upper, w.margin))


def witness_fires(kappas: np.ndarray, lower, upper, margin, c: np.ndarray, orbit: bool = True) -> np.ndarray:
    """Boolean (n_points, n_witnesses): does witness w detect point n?

    With ``orbit`` each witness is applied to every symmetry image of the
    point; local-unitary symmetries leave separable bounds unchanged.
    """
    kappas = np.atleast_2d(kappas)
    lower = np.broadcast_to(np.asarray(lower, float), len(kappas))
    upper = np.broadcast_to(np.asarray(upper, float), len(kappas))
    margin = np.broadcast_to(np.asarray(margin, float), len(kappas))
    c = np.atleast_2d(np.asarray(c, float))
    if orbit:
        # images of kappa under the inverse maps give the same value set
        kimg = kappas[:, group_perms("full")]  # (W, G, 9)
        vals = np.einsum("na,wga->nwg", c, kimg)
        hi, lo = vals.max(axis=2), vals.min(axis=2)
    else:
        hi = lo = c @ kappas.T
    return (hi > upper + margin) | (lo < lower - margin)


def read_witness_store(path) -> list[SimplexWitness]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with path.open() as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(SimplexWitness.from_json(line))
            except (ValueError, TypeError, KeyError) as exc:
                raise ValueError(f"{path}:{n}: malformed witness record: {exc}") from exc
    return out


def append_witnesses(path, witnesses: Iterable[SimplexWitness]) -> None:
    with Path(path).open("a") as fh:
        for w in witnesses:
            fh.write(w.to_json() + "\n")


def write_witness_store(path, witnesses: Iterable[SimplexWitness]) -> None:
    Path(path).write_text("".join(w.to_json() + "\n" for w in witnesses))


# --- MUB witnesses ----------------------------------------------------------------


def mub_kappa(m: int, perm=DEFAULT_MUB_PERM) -> np.ndarray:
    return bb.bell_diagonal_part(bb.mub_witness_operator(m, perm))


@lru_cache(maxsize=None)
def mub_lower_bound(m: int, perm=DEFAULT_MUB_PERM, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> float:
    """Numerical separable minimum of Tr(M_m sigma) for the raw operator."""
    op = bb.mub_witness_operator(m, perm)
    return estimate_operator_interval(op, restarts, seed).lower


@dataclass(frozen=True)
class MubWitness:
    m: int
    perm: tuple
    kappa: tuple[float, ...]
    lower: float
    upper: float
    margin: float = DEFAULT_MARGIN

    @property
    def name(self) -> str:
        return f"mub{self.m}"


def mub_witness(m: int, perm=DEFAULT_MUB_PERM, margin: float = DEFAULT_MARGIN, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> MubWitness:
    perm = tuple(tuple(p) for p in perm)
    return MubWitness(
        m,
        perm,
        tuple(mub_kappa(m, perm)),
        mub_lower_bound(m, perm, restarts, seed),
        bb.mub_upper_bound(m),
        margin,
    )


def default_mub_witnesses(perm=DEFAULT_MUB_PERM, margin: float = DEFAULT_MARGIN) -> list[MubWitness]:
    return [mub_witness(m, perm, margin) for m in (4, 3, 2)]


def mub_witness_eval(c, m: int, perm=DEFAULT_MUB_PERM, margin: float = DEFAULT_MARGIN) -> Detection:
    w = mub_witness(m, perm, margin)
    c = bb.check_coeffs(c)
    value = float(np.dot(w.kappa, c))
    return Detection(w.name, value, _verdict(value, w.lower, w.upper, margin))


def search_mub_permutation(c: np.ndarray, m: int = D + 1, margin: float = DEFAULT_MARGIN):
    """Permutation tuple maximizing upper-bound violations on the rows of ``c``.

    Returns (best_perm, counts) where counts maps every candidate to its
    number of detections; ties go to the first candidate in product order.
    """
    c = np.atleast_2d(np.asarray(c, float))
    perms = list(itertools.permutations(range(D)))
    upper = bb.mub_upper_bound(m)
    counts = {}
    for choice in itertools.product(perms, repeat=m):
        full = tuple(choice) + ((0, 1, 2),) * (D + 1 - m)
        counts[full] = int(np.sum(c @ mub_kappa(m, full) > upper + margin))
    best = max(counts, key=lambda p: counts[p])
    return best, counts
