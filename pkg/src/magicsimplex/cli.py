"""Command-line entry point: ``magicsimplex <subcommand> ...``.

Exit codes: 0 success, 2 argument error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from . import bell_basis as bb
from . import detectors as det
from . import geometry as geo
from . import pipeline as pl
from .pipeline import Label

log = logging.getLogger("magicsimplex")

EXIT_OK, EXIT_ARGS, EXIT_DATA = 0, 2, 3


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    """Every flag of a run; echoed verbatim into output headers."""

    command: str
    delta: str | None = None
    seed: int | None = None
    restarts: int | None = None
    budget: int | None = None
    margin: float | None = None
    k: int | None = None
    paths: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        d = {k: v for k, v in vars(args).items() if k not in EXEC_ONLY}
        known = {f: d.pop(f, None) for f in ("delta", "seed", "restarts", "budget", "margin", "k")}
        paths = {k: str(v) for k, v in list(d.items()) if k in PATH_ARGS and v is not None}
        for k in paths:
            d.pop(k)
        known["delta"] = None if known["delta"] is None else str(known["delta"])
        return cls(args.command, paths=paths, options=d, **known)

    def header(self, inputs: dict | None = None) -> dict:
        return {
            "version": __version__,
            "run": asdict(self),
            "inputs": {k: pl.file_digest(v) for k, v in sorted((inputs or {}).items())},
        }


PATH_ARGS = {"out", "inp", "store", "witness_store"}
# flags that change how, not what, is computed; kept out of headers so bytes match
EXEC_ONLY = {"func", "verbose", "command", "workers", "resume", "checkpoint", "checkpoint_every"}


# --- argument types -------------------------------------------------------------


def fraction_arg(s: str) -> Fraction:
    try:
        f = Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {s!r}")
    return f


def positive_fraction(s: str) -> Fraction:
    f = fraction_arg(s)
    if f <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return f


def coeffs_arg(s: str) -> tuple:
    parts = [p for p in s.replace(" ", "").split(",") if p]
    if len(parts) != geo.N_POINTS:
        raise argparse.ArgumentTypeError(f"expected 9 comma-separated coefficients, got {len(parts)}")
    vals = tuple(fraction_arg(p) for p in parts)
    if sum(vals) != 1 or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("coefficients must be nonnegative and sum to 1")
    return vals


def nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def pos_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def odd_int(s: str) -> int:
    v = pos_int(s)
    if v % 2 == 0:
        raise argparse.ArgumentTypeError("must be odd")
    return v


def perm_arg(s: str) -> tuple:
    """'012,120,012,012' -> per-basis permutations."""
    try:
        perm = tuple(tuple(int(ch) for ch in p) for p in s.split(","))
        bb._check_mub_args(len(perm), perm)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    return perm + ((0, 1, 2),) * (bb.D + 1 - len(perm))


def label_arg(s: str) -> str:
    s = s.upper()
    if s not in pl.LABEL_NAMES + ("ALL", "POLYTOPE"):
        raise argparse.ArgumentTypeError(f"unknown subset {s!r}")
    return s


# --- helpers --------------------------------------------------------------------


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


def _read_dataset(path) -> pl.Dataset:
    try:
        return pl.dataset_read(path)
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    except (pl.DatasetError, json.JSONDecodeError) as exc:
        raise DataError(str(exc)) from exc


def _read_store(path) -> list:
    if path is None:
        return []
    if not Path(path).exists():
        raise DataError(f"no such witness store: {path}")
    try:
        return det.read_witness_store(path)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _cascade(args) -> pl.CascadeConfig:
    return pl.CascadeConfig.default(perm=args.mub_perm, margin=args.margin)


def _frac_row(c) -> str:
    return ",".join(str(Fraction(x).limit_denominator(10**6)) if not isinstance(x, Fraction) else str(x) for x in c)


def _pass(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


# --- subcommands ----------------------------------------------------------------


def cmd_basis_dump(args, cfg: RunConfig) -> int:
    dump = bb.basis_dump()
    dump["header"] = cfg.header()
    _emit(json.dumps(dump, sort_keys=True), args.out)
    return EXIT_OK


def cmd_geometry(args, cfg: RunConfig) -> int:
    lines = ["# " + json.dumps(cfg.header(), sort_keys=True)]
    if args.what == "lines":
        lines.append("line,points," + ",".join(pl.COLUMNS[:9]))
        for i, line in enumerate(geo.enumerate_lines()):
            pts = " ".join(f"({k},{l})" for k, l in map(geo.index_point, line.points))
            lines.append(f"L{i},{pts}," + _frac_row(geo.line_state(line)))
    else:
        lines.append("vertex,kind," + ",".join(pl.COLUMNS[:9]))
        for i, v in enumerate(geo.polytope_vertices()):
            lines.append(f"V{i},{'kernel' if v.kernel else 'enclosure'}," + _frac_row(v.coeffs))
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_grid_classify(args, cfg: RunConfig) -> int:
    try:
        spec = pl.GridSpec(args.delta)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    if args.dry_run:
        n = sum(len(b) for b in pl.generate_grid(spec))
        print(f"delta {spec.delta}")
        print(f"candidates {spec.candidates}")
        print(f"in-polytope {n}")
        return EXIT_OK
    if args.out is None:
        raise argparse.ArgumentTypeError("--out is required unless --dry-run")
    witnesses = _read_store(args.witness_store)
    ckpt = args.checkpoint or Path(str(args.out) + ".ckpt")
    inputs = {"witness_store": args.witness_store} if args.witness_store else {}

    def progress(done, total):
        log.info("chunk %d/%d", done, total)

    ds = pl.classify_grid(
        spec,
        _cascade(args),
        witnesses,
        header=cfg.header(inputs),
        checkpoint=ckpt,
        checkpoint_every=args.checkpoint_every,
        resume=args.resume,
        workers=args.workers,
        progress=progress,
    )
    pl.dataset_write(ds, args.out)
    Path(ckpt).unlink(missing_ok=True)
    counts = ds.counts()
    print(f"candidates {spec.candidates} in-polytope {len(ds)} " + " ".join(f"{k} {v}" for k, v in counts.items()))
    return EXIT_OK


def cmd_family_scan(args, cfg: RunConfig) -> int:
    try:
        spec = pl.family_spec(args.family, args.delta)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc))
    ds = pl.scan_family(spec, _cascade(args), _read_store(args.witness_store))
    ds.header.update(cfg.header({"witness_store": args.witness_store} if args.witness_store else {}))
    if args.out:
        pl.dataset_write(ds, args.out)
    print(" ".join(f"{k} {v}" for k, v in pl.family_counts(ds).items()))
    return EXIT_OK


def cmd_mine(args, cfg: RunConfig) -> int:
    ds = _read_dataset(args.inp)
    out = args.out or args.inp
    store = args.store or Path(str(out) + f".witnesses-{args.seed}.jsonl")
    inputs = {"in": args.inp}
    if Path(store).exists():
        _read_store(store)  # fail early on a corrupt store
        inputs["store_before"] = store

    def progress(rep, alive):
        if rep.drawn % 50 == 0:
            log.info("drawn %d detecting %d relabeled %d open orbits %d", rep.drawn, rep.detecting, rep.relabeled, alive)

    header = cfg.header(inputs)
    _, mined, rep = pl.mine_witnesses(
        ds, args.budget, args.seed, stall=args.stall, restarts=args.restarts, margin=args.margin,
        store=Path(store), progress=progress,
    )
    mined.header["mine_run"] = header
    mined.header = json.loads(json.dumps(mined.header, sort_keys=True))
    pl.dataset_write(mined, out)
    print(f"drawn {rep.drawn} detecting {rep.detecting} relabeled {rep.relabeled} stop {rep.stop_reason}")
    print(" ".join(f"{k} {v}" for k, v in mined.counts().items()))
    return EXIT_OK


def cmd_witness_gen(args, cfg: RunConfig) -> int:
    existing = _read_store(args.store) if Path(args.store).exists() else []
    start = len(existing)
    new = []
    for i in range(start, start + args.count):
        s = det.witness_seed(args.seed, i)
        new.append(det.make_witness(det.generate_random_witness(s), s, args.restarts, args.margin, witness_id=i))
    det.append_witnesses(args.store, new)
    for w in new:
        print(f"witness {w.id} lower {w.lower:.12g} upper {w.upper:.12g}")
    return EXIT_OK


def cmd_witness_apply(args, cfg: RunConfig) -> int:
    ws = _read_store(args.store)
    if args.coeffs is not None:
        c = np.array([float(x) for x in args.coeffs])
        table = pl.WitnessTable.from_witnesses(ws)
        fires = det.witness_fires(table.kappas, table.lower, table.upper, table.margin, c)[0] if ws else []
        for w, f in zip(ws, fires):
            d = det.apply_witness(w, c)
            print(f"witness {w.id} value {d.value:.12g} interval [{w.lower:.12g}, {w.upper:.12g}] "
                  f"{d.verdict} orbit {'entangled' if f else 'inconclusive'}")
        return EXIT_OK
    if args.inp is None:
        raise argparse.ArgumentTypeError("give --in or --coeffs")
    ds = _read_dataset(args.inp)
    unk = np.flatnonzero(ds.labels == Label.UNKNOWN)
    table = pl.WitnessTable.from_witnesses(ws)
    num = ds.numerators[unk] if ds.numerators is not None else None
    first = pl._apply_table(table, ds.coeffs[unk], num, ds.denominator) if len(ws) and len(unk) else np.full(len(unk), -1)
    hit = first >= 0
    ds.labels[unk[hit]] = Label.BOUND
    ds.detectors[unk[hit]] = pl.DETECTORS.index("witness")
    ds.witness_ids[unk[hit]] = table.ids[first[hit]]
    ds.header["witness_apply"] = cfg.header({"in": args.inp, "store": args.store})
    ds.header = json.loads(json.dumps(ds.header, sort_keys=True))
    pl.dataset_write(ds, args.out or args.inp)
    print(f"relabeled {int(hit.sum())} of {len(unk)} UNKNOWN")
    return EXIT_OK


def _subset(ds: pl.Dataset, name: str) -> pl.Dataset:
    if name in ("ALL", "POLYTOPE"):
        return ds
    return ds.subset(ds.labels == Label[name])


def cmd_pca(args, cfg: RunConfig) -> int:
    ds = _read_dataset(args.inp)
    sub = _subset(ds, args.subset)
    if len(sub) < 2:
        raise DataError(f"subset {args.subset} has {len(sub)} points; PCA needs 2")
    model = an.pca_fit(sub.coeffs)
    proj = an.pca_project(model, sub.coeffs, args.dims)
    n_unique = an.unique_projected_points(sub.coeffs, model, args.tol)
    sym = an.orbit_action_symmetry(model, sub.coeffs, args.tol)
    header = cfg.header({"in": args.inp})
    header.update({"eigenvalues": model.eigenvalues.tolist(), "unique_2d": n_unique, "symmetry": sym, "points": len(sub)})
    axes = ["x", "y", "z"][: args.dims] if args.dims <= 3 else [f"pc{i + 1}" for i in range(args.dims)]
    rows = ["# " + json.dumps(header, sort_keys=True), "kind,name,label," + ",".join(axes)]
    for lab, p in zip(sub.labels.tolist(), proj.tolist()):
        rows.append("data,," + pl.LABEL_NAMES[lab] + "," + ",".join(f"{v:.12g}" for v in p))
    for name, kind, c in an.landmarks():
        p = an.pca_project(model, c, args.dims)
        rows.append(f"{kind},{name},," + ",".join(f"{v:.12g}" for v in p))
    if args.out:
        _emit("\n".join(rows), args.out)
    print(f"points {len(sub)} unique-2d {n_unique} threefold {sym['threefold']} rotation-orders {sym['rotation_orders']}")
    print("eigenvalues " + " ".join(f"{v:.6g}" for v in model.eigenvalues))
    if args.subset in ("ALL", "POLYTOPE"):
        for k, (m, s) in an.mean_radii(model, ds).items():
            print(f"radius {k} {m:.6f} +- {s:.6f}")
    return EXIT_OK


def cmd_knn(args, cfg: RunConfig) -> int:
    ds = _read_dataset(args.inp)
    to = Label[args.unknown_as]
    if args.coeffs is not None:
        model = an.knn_fit(ds.coeffs, args.k, an.relabel_unknown(ds.labels, to))
        c = np.array([[float(x) for x in args.coeffs]])
        pred = an.majority_vote_predict(model, c) if args.majority_vote else an.knn_predict(model, c)
        print(pl.LABEL_NAMES[int(pred[0])])
        return EXIT_OK
    train, test = an.stratified_split(ds.labels, args.test_fraction, args.seed)
    y = an.relabel_unknown(ds.labels, to)
    model = an.knn_fit(ds.coeffs[train], args.k, y[train])
    if args.pca_dims:
        cm = an.pca_then_knn(ds, args.pca_dims, args.k, args.seed, args.test_fraction, args.workers)
    else:
        cm = an.ConfusionMatrix.from_labels(y[test], an.knn_predict(model, ds.coeffs[test], args.workers))
    print(cm.format())
    return EXIT_OK


def cmd_scenarios(args, cfg: RunConfig) -> int:
    ds = _read_dataset(args.inp)
    ks = [args.k] if args.k else [1, 3, 5, 7]
    res = an.scenario_sweep(ds, ks, args.seed, args.test_fraction, args.workers)
    if res[0].no_unknown:
        print("note: dataset has no UNKNOWN points; both scenarios coincide")
    for r in res:
        print(f"k={r.k} UNKNOWN->SEP accuracy {r.sep.accuracy:.4f} recalls "
              + " ".join(f"{c} {v:.4f}" for c, v in r.sep.recalls().items()))
        print(f"k={r.k} UNKNOWN->BOUND accuracy {r.bound.accuracy:.4f} recalls "
              + " ".join(f"{c} {v:.4f}" for c, v in r.bound.recalls().items()))
    best = an.best_scenario(res)
    print(f"best k={best.k}")
    print("UNKNOWN->SEP\n" + best.sep.format())
    print("UNKNOWN->BOUND\n" + best.bound.format())
    return EXIT_OK


def cmd_stats(args, cfg: RunConfig) -> int:
    ds = _read_dataset(args.inp)
    text = an.format_stats(an.volume_stats(ds))
    text += "\n\ndetectors\n" + "\n".join(f"{k:<16}{v:>10}" for k, v in sorted(ds.detector_counts().items()))
    _emit(text, args.out)
    return EXIT_OK


def extremal_report(x, variant: int) -> dict:
    c = an.extremal_family(x, variant)
    cf = np.array([float(v) for v in c])
    ppt = det.is_ppt(cf)
    mubs = {}
    for w in pl.CascadeConfig.default().mub:
        vals = cf[geo.group_perms("full")] @ np.array(w.kappa)
        mubs[w.name] = (float(vals.max()), w.upper)
    lab = pl.classify(c)
    return {"c": c, "ppt": ppt, "mub": mubs, "label": lab}


def cmd_extremal(args, cfg: RunConfig) -> int:
    try:
        rep = extremal_report(args.x, args.variant)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    print("c " + _frac_row(rep["c"]))
    print(f"ppt {rep['ppt'].is_ppt} min-pt-eigenvalue {rep['ppt'].min_eigenvalue:.12g}")
    for name, (val, upper) in rep["mub"].items():
        print(f"{name} orbit-max {val:.12g} bound {upper:.12g} violation {val - upper:.12g}")
    print(f"label {rep['label'].label.name} detector {rep['label'].detector}")
    return EXIT_OK


# --- repro ----------------------------------------------------------------------


def repro_family_a(args) -> bool:
    ds = pl.scan_family(pl.family_a_spec())
    got = pl.family_counts(ds)
    want = {"tested": 614_125, "positive": 95_455, "free": 78_042, "outside": 74_418, "sep": 17_317, "bound": 96, "unknown": 0}
    ok = True
    for k, v in want.items():
        print(f"{_pass(got[k] == v)} family-a {k} {got[k]} expected {v}")
        ok &= got[k] == v
    return ok


def repro_grid(args) -> bool:
    spec = pl.GridSpec(args.delta)
    num = pl.grid_points(spec)
    c = num / spec.denominator
    npt = det.ppt_min_eigenvalues(c) < -det.PPT_TOL
    ker = geo.kernel_contains(num, spec.denominator) & ~npt
    got = {"candidates": spec.candidates, "in-polytope": len(num), "free": int(npt.sum()), "kernel": int(ker.sum())}
    if spec.delta == Fraction(1, 18):
        want = {"candidates": 5_764_801, "in-polytope": 899_857, "free": 620_406, "kernel": 27_055}
        ok = True
        for k, v in want.items():
            print(f"{_pass(got[k] == v)} grid {k} {got[k]} expected {v}")
            ok &= got[k] == v
        return ok
    for k, v in got.items():
        print(f"INFO grid {k} {v}")
    return True


def repro_witnesses(args) -> bool:
    r = det.estimate_operator_interval(bb.bell_projector(0, 0).matrix)
    ok1 = abs(r.lower) < 1e-6 and abs(r.upper - 1 / 3) < 1e-6
    print(f"{_pass(ok1)} P00 separable interval [{r.lower:.9f}, {r.upper:.9f}] expected [0, 1/3]")
    m = det.estimate_operator_interval(bb.mub_witness_operator(4, det.DEFAULT_MUB_PERM))
    ok2 = abs(m.upper - 2) < 1e-6
    print(f"{_pass(ok2)} M4 separable upper {m.upper:.9f} expected 2")
    return ok1 and ok2


def repro_bound(args) -> bool:
    spec = pl.family_spec("B1")
    ds = pl.scan_family(spec)
    n_mub = int(np.sum(np.isin(ds.detectors, [pl.DETECTORS.index(f"mub{m}") for m in (4, 3, 2)])))
    ok1 = n_mub > 0
    print(f"{_pass(ok1)} B1 PPT and MUB-detected points {n_mub}")
    rep = extremal_report(Fraction(1, 18), 1)
    ok2 = rep["ppt"].is_ppt and rep["label"].label == Label.BOUND
    print(f"{_pass(ok2)} extremal x=1/18 ppt {rep['ppt'].is_ppt} label {rep['label'].label.name} via {rep['label'].detector}")
    return ok1 and ok2


def repro_ml(args) -> bool:
    if args.inp is None:
        raise argparse.ArgumentTypeError("repro ml needs --in with a mined grid dataset")
    ds = _read_dataset(args.inp)
    best = an.best_scenario(an.scenario_sweep(ds, workers=args.workers))
    s1, s2 = best.sep, best.bound
    checks = [
        (s1.accuracy > s2.accuracy, f"accuracy UNKNOWN->SEP {s1.accuracy:.4f} > UNKNOWN->BOUND {s2.accuracy:.4f} (k={best.k})"),
        (abs(s1.recall("FREE") - s2.recall("FREE")) < 0.03, f"FREE recall {s1.recall('FREE'):.4f} vs {s2.recall('FREE'):.4f}"),
        (s1.recall("SEP") - s2.recall("SEP") >= 0.20, f"SEP recall drop {s1.recall('SEP'):.4f} -> {s2.recall('SEP'):.4f}"),
        (abs(s1.accuracy - 0.94) <= 0.05, f"UNKNOWN->SEP accuracy {s1.accuracy:.4f} within 0.94 +- 0.05"),
        (abs(s2.accuracy - 0.84) <= 0.05, f"UNKNOWN->BOUND accuracy {s2.accuracy:.4f} within 0.84 +- 0.05"),
    ]
    for ok, msg in checks:
        print(f"{_pass(ok)} {msg}")
    return all(ok for ok, _ in checks)


def repro_pca(args) -> bool:
    if args.inp is None:
        raise argparse.ArgumentTypeError("repro pca needs --in with a mined grid dataset")
    ds = _read_dataset(args.inp)
    bound = ds.subset(ds.labels == Label.BOUND)
    model = an.pca_fit(bound.coeffs)
    n = an.unique_projected_points(bound.coeffs, model)
    sym = an.orbit_action_symmetry(model, bound.coeffs)
    ok1 = n * 1000 <= len(bound)
    print(f"{_pass(ok1)} BOUND projection {len(bound)} points -> {n} unique (ratio {len(bound) / max(n, 1):.0f})")
    print(f"{_pass(sym['threefold'])} BOUND projection 3-fold symmetric, rotation orders {sym['rotation_orders']}")
    print(f"INFO unique projected points {n} (reference 133 at full mining scale)")
    radii = an.mean_radii(an.pca_fit(ds.coeffs), ds)
    ok3 = radii["FREE"][0] > radii["BOUND"][0] > radii["SEP+UNKNOWN"][0]
    print(f"{_pass(ok3)} mean radii " + " ".join(f"{k} {m:.4f}" for k, (m, _) in radii.items()))
    return ok1 and sym["threefold"] and ok3


REPRO = {
    "family-a": repro_family_a,
    "grid": repro_grid,
    "witnesses": repro_witnesses,
    "bound": repro_bound,
    "ml": repro_ml,
    "pca": repro_pca,
}


def cmd_repro(args, cfg: RunConfig) -> int:
    names = list(REPRO) if args.target == "all" else [args.target]
    ok = True
    for name in names:
        if name in ("ml", "pca") and args.inp is None and args.target == "all":
            print(f"SKIP {name} (needs --in)")
            continue
        ok &= REPRO[name](args)
    return EXIT_OK if ok else 1


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="magicsimplex", description="Bell-diagonal qutrit simplex: classification and analysis.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="progress logging on stderr")
    sub = ap.add_subparsers(dest="command", metavar="subcommand")
    sub.required = True

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        return p

    def detector_flags(p):
        p.add_argument("--margin", type=float, default=det.DEFAULT_MARGIN)
        p.add_argument("--mub-perm", type=perm_arg, default=det.DEFAULT_MUB_PERM, help="e.g. 012,120,012,012")
        p.add_argument("--witness-store", type=Path, default=None)

    p = add("basis-dump", cmd_basis_dump, "Bell projectors and MUB bases as JSON")
    p.add_argument("--out", type=Path)

    p = add("geometry", cmd_geometry, "lines or polytope vertices as exact fractions")
    p.add_argument("what", choices=["lines", "vertices"])
    p.add_argument("--out", type=Path)

    p = add("grid-classify", cmd_grid_classify, "classify the grid with step delta")
    p.add_argument("--delta", type=positive_fraction, required=True, help="grid step as p/q, e.g. 1/18")
    p.add_argument("--out", type=Path)
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--workers", type=pos_int, default=os.cpu_count() or 1)
    p.add_argument("--checkpoint", type=Path, default=None, help="sidecar path (default OUT.ckpt)")
    p.add_argument("--checkpoint-every", type=pos_int, default=50_000)
    detector_flags(p)

    p = add("family-scan", cmd_family_scan, "scan a family slice")
    p.add_argument("--family", choices=["A", "B1", "B2", "B3"], required=True)
    p.add_argument("--delta", type=positive_fraction, default=None, help="parameter step (A: 1/72, B: 1/100)")
    p.add_argument("--out", type=Path)
    detector_flags(p)

    p = add("mine", cmd_mine, "mine random witnesses on the UNKNOWN points of a dataset")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--out", type=Path, help="default: overwrite --in")
    p.add_argument("--budget", type=nonneg_int, required=True, help="total witnesses for this seed")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stall", type=pos_int, default=500)
    p.add_argument("--restarts", type=pos_int, default=det.DEFAULT_RESTARTS)
    p.add_argument("--margin", type=float, default=det.DEFAULT_MARGIN)
    p.add_argument("--store", type=Path, default=None, help="witness store (default OUT.witnesses-SEED.jsonl)")

    p = add("witness-gen", cmd_witness_gen, "append random witnesses with estimated bounds to a store")
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--count", type=pos_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=pos_int, default=det.DEFAULT_RESTARTS)
    p.add_argument("--margin", type=float, default=det.DEFAULT_MARGIN)

    p = add("witness-apply", cmd_witness_apply, "apply stored witnesses to a point or a dataset")
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--in", dest="inp", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--coeffs", type=coeffs_arg, help="nine p/q values")

    p = add("pca", cmd_pca, "2-D/3-D PCA projection with landmarks")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--subset", type=label_arg, default="ALL")
    p.add_argument("--dims", type=int, choices=range(1, 10), default=2)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", type=Path)

    p = add("knn", cmd_knn, "kNN evaluation or single-point prediction")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--k", type=odd_int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--unknown-as", choices=["SEP", "BOUND"], default="SEP")
    p.add_argument("--pca-dims", type=int, choices=range(1, 10), default=None)
    p.add_argument("--coeffs", type=coeffs_arg)
    p.add_argument("--majority-vote", action="store_true")
    p.add_argument("--workers", type=pos_int, default=1)

    p = add("scenarios", cmd_scenarios, "UNKNOWN->SEP vs UNKNOWN->BOUND comparison")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--k", type=odd_int, default=None, help="default: sweep 1,3,5,7")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--workers", type=pos_int, default=1)

    p = add("stats", cmd_stats, "occurrence table")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--out", type=Path)

    p = add("extremal", cmd_extremal, "extremal bound-entangled family at x")
    p.add_argument("--x", type=positive_fraction, default=Fraction(1, 18))
    p.add_argument("--variant", type=int, choices=[1, 2], default=1)

    p = add("repro", cmd_repro, "reproduction checks with PASS/FAIL lines")
    p.add_argument("target", choices=list(REPRO) + ["all"])
    p.add_argument("--delta", type=positive_fraction, default=Fraction(1, 18))
    p.add_argument("--in", dest="inp", type=Path, default=None)
    p.add_argument("--workers", type=pos_int, default=1)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    cfg = RunConfig.from_args(args)
    try:
        return args.func(args, cfg)
    except argparse.ArgumentTypeError as exc:
        ap.print_usage(sys.stderr)
        print(f"magicsimplex: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (DataError, pl.DatasetError) as exc:
        print(f"magicsimplex: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
