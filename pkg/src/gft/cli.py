"""Command-line entry point ``gft``.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 missing
classification evidence.  Outputs are written to a temporary file and
renamed into place, so a failing command leaves nothing behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import killing
from .classify import ClassificationInput, axis_tag, frobenius_evidence, grid_cell
from .discretize import assemble_laplace_beltrami, build_grid
from .errors import GFTError, ManifestError, ValidationError
from .harmonics import rayleigh_coefficients, rayleigh_parseval
from .manifold import CATALOG_IDS, ManifoldSpec, catalog, load_manifest
from .report import report_worked_examples
from .spectral import eig_decompose, gft_forward, gft_inverse, laplacian_labels
from .symmetry import MasaCandidate, default_catalog, masa_search

FORMAT_VERSION = 1
DEFAULT_SEED = 42
COMMANDS = ("eigs", "transform", "masa", "classify", "killing-check", "torus-flow", "rayleigh", "report", "export")

log = logging.getLogger("gft")


@dataclass(frozen=True)
class RunConfig:
    command: str
    manifest_path: Optional[str] = None
    resolution: tuple[int, ...] = ()
    k: int = 10
    cluster_tol: Optional[float] = None
    comm_tol: Optional[float] = None
    label_tol: float = 1e-6
    seed: int = DEFAULT_SEED
    out_path: Optional[str] = None
    spectral: bool = True
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        for name in ("cluster_tol", "comm_tol", "label_tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"{name} must be positive")
        if self.k < 1:
            raise ValidationError("k must be >= 1")


# --- output helpers -------------------------------------------------------------


def _atomic_write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(payload: dict) -> str:
    payload = {"format_version": FORMAT_VERSION, **payload}
    return json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def _csv_text(header: Sequence[str], rows, meta: Optional[dict] = None) -> str:
    buf = io.StringIO()
    buf.write(f"# format_version: {FORMAT_VERSION}\n")
    for key, val in (meta or {}).items():
        buf.write(f"# {key}: {val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


# --- pipeline pieces ------------------------------------------------------------


def _manifest(path: Optional[str]) -> ManifoldSpec:
    if path is None:
        raise ManifestError("--manifest is required")
    if path in CATALOG_IDS:
        return catalog(path)
    return load_manifest(path)


def _grid(cfg: RunConfig):
    spec = _manifest(cfg.manifest_path)
    if not cfg.resolution:
        raise ValidationError("--n is required (points per axis)")
    res = cfg.resolution
    if len(res) == 1 and spec.dim > 1:
        res = res * spec.dim
    return build_grid(spec, res, spectral=cfg.spectral)


def _decompose(cfg: RunConfig):
    grid = _grid(cfg)
    decomp = eig_decompose(assemble_laplace_beltrami(grid), cfg.k, cluster_tol=cfg.cluster_tol)
    return grid, decomp


def _cmd_eigs(cfg: RunConfig) -> str:
    _, decomp = _decompose(cfg)
    rows = []
    for c, cl in enumerate(decomp.clusters):
        for i in cl.member_indices:
            rows.append((i, float(decomp.eigenvalues[i]), c, cl.multiplicity))
    meta = {"clusters": " ".join(f"{round(lam, 9) + 0.0:.10g}x{m}" for lam, m in decomp.cluster_values())}
    return _csv_text(("index", "lambda", "cluster", "multiplicity"), rows, meta)


def _read_vector(path: str, size: int) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] == 1:
        vec = data[:, 0].astype(complex)
    else:
        vec = data[:, 0] + 1j * data[:, 1]
    if vec.size != size:
        raise ValidationError(f"input vector has {vec.size} entries, grid has {size}")
    return vec


def _cmd_transform(cfg: RunConfig) -> str:
    grid, decomp = _decompose(cfg)
    inp = cfg.extra.get("input")
    if inp:
        psi = _read_vector(inp, grid.size)
    else:
        # random vector from the computed span, so the captured norm is the full norm
        rng = np.random.default_rng(cfg.seed)
        c = rng.standard_normal(decomp.k) + 1j * rng.standard_normal(decomp.k)
        psi = decomp.eigenvectors @ c
    if cfg.extra.get("joint"):
        cands = masa_search(default_catalog(grid), decomp, comm_tol=cfg.comm_tol,
                            label_tol=cfg.label_tol, seed=cfg.seed)
        decomp, labels = cands[0].decomposition, cands[0].labels
    else:
        labels = laplacian_labels(decomp)
    coeffs = gft_forward(decomp, labels, psi)
    back = gft_inverse(coeffs, decomp)
    n2 = grid.norm(psi) ** 2
    meta = {
        "labels": " ".join(a.operator_id for a in labels.axes),
        "parseval_residual": repr(abs(n2 - coeffs.norm_sq()) / n2),
        "reconstruction_error": repr(grid.norm(back - psi) / math.sqrt(n2)),
    }
    header = ["index", "lambda"] + [f"alpha_{a.operator_id}" for a in labels.axes[1:]] + ["re", "im", "rho"]
    rows = [
        (i, *labels.tuples[i], coeffs.values[i].real, coeffs.values[i].imag, coeffs.measure_weights[i])
        for i in range(decomp.k)
    ]
    return _csv_text(header, rows, meta)


def _cmd_masa(cfg: RunConfig) -> str:
    grid, decomp = _decompose(cfg)
    if cfg.extra.get("catalog", "default") != "default":
        raise ValidationError("only the default catalog is available from the command line")
    ops = default_catalog(grid)
    cands = masa_search(ops, decomp, comm_tol=cfg.comm_tol, label_tol=cfg.label_tol, seed=cfg.seed)
    out = []
    for c in cands:
        chosen = [o for o in ops if o.id in c.members]
        d = c.to_dict()
        d["frobenius_pass"] = frobenius_evidence(chosen, grid.spec, seed=cfg.seed)
        out.append(d)
    return _json_text({
        "manifold": grid.spec.to_manifest(),
        "points": list(grid.shape),
        "degeneracy_present": any(cl.multiplicity > 1 for cl in decomp.clusters),
        "clusters": [[lam, m] for lam, m in decomp.cluster_values()],
        "candidates": out,
    })


def _cmd_classify(cfg: RunConfig) -> str:
    spec = _manifest(cfg.manifest_path)
    masa_path = cfg.extra.get("masa")
    if not masa_path:
        raise ValidationError("--masa is required")
    try:
        data = json.loads(Path(masa_path).read_text())
        entry = data["candidates"][cfg.extra.get("candidate", 0)]
        degenerate = bool(data["degeneracy_present"])
    except (OSError, ValueError, KeyError, IndexError, TypeError) as exc:
        raise ValidationError(f"cannot read MASA file {masa_path}: {exc}") from None
    cand = MasaCandidate.from_dict(entry)
    tags = tuple(axis_tag(cand.spectra.get(m, "discrete")) for m in cand.members)
    inp = ClassificationInput(spec, cand, degenerate, entry.get("frobenius_pass"), tags)
    return _json_text(grid_cell(inp).to_dict())


def _parse_field(spec: ManifoldSpec, text: str):
    name, _, body = text.partition("=")
    if not body:
        name, body = "K", name
    body = body.strip()
    if body.startswith("d") and body[1:] in spec.names:
        comps = ["1" if n == body[1:] else "0" for n in spec.names]
    else:
        comps = [c.strip() for c in body.split(",")]
    return killing.KillingField.from_strings(spec, comps, name.strip())


def _cmd_killing(cfg: RunConfig) -> str:
    spec = _manifest(cfg.manifest_path)
    rng = np.random.default_rng(cfg.seed)
    pts = killing.interior_samples(spec, cfg.extra.get("samples", 32), rng)
    result: dict = {"manifold": spec.name, "fields": {}, "tensors": {}}
    fields = [_parse_field(spec, f) for f in cfg.extra.get("fields") or []]
    if not fields and not cfg.extra.get("tensors"):
        fields = list(killing.catalog_fields(spec).values())
    for f in fields:
        r = killing.killing_vector_residual(f, pts)
        result["fields"][f.name] = {"residual": r, "killing": r <= 1e-6}
    for text in cfg.extra.get("tensors") or []:
        name, _, body = text.partition("=")
        t = killing.KillingTensor2.diagonal(spec, [c.strip() for c in body.split(",")], name.strip())
        r = killing.killing_tensor_residual(t, pts)
        result["tensors"][t.name] = {"residual": r, "killing": r <= 1e-6}
    try:
        rob = killing.robertson_check(spec, pts)
        result["robertson"] = {"separable": rob.separable, "max_value": rob.max_value}
    except GFTError as exc:
        result["robertson"] = {"error": str(exc)}
    return _json_text(result)


def _cmd_flow(cfg: RunConfig) -> str:
    tr = killing.integrate_flow(cfg.extra["slope"], (0.0, 0.0), cfg.extra.get("wraps", 100))
    meta = {
        "slope_tan_eps": repr(tr.slope_tan_eps),
        "closed": str(tr.closed).lower(),
        "winding": f"{tr.winding[0]},{tr.winding[1]}" if tr.winding else "none",
        "max_section_gap": repr(tr.max_gap),
    }
    return _csv_text(("t", "theta", "phi"), tr.points.tolist(), meta)


def _cmd_rayleigh(cfg: RunConfig) -> str:
    coeffs = rayleigh_coefficients(cfg.extra["k_vec"], cfg.extra.get("r", 1.0), cfg.extra.get("lmax", 20))
    rows = [(ell, m, c.real, c.imag) for (ell, m), c in sorted(coeffs.items())]
    return _csv_text(("ell", "m", "re", "im"), rows, {"parseval": repr(rayleigh_parseval(coeffs))})


def _cmd_report(cfg: RunConfig) -> str:
    data = report_worked_examples()
    data.pop("format_version", None)
    return _json_text(data)


def _cmd_export(cfg: RunConfig) -> str:
    import scipy.io

    grid = _grid(cfg)
    lap = assemble_laplace_beltrami(grid)
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, lap.matrix, comment=f"format_version: {FORMAT_VERSION}; weights in companion file")
    return buf.getvalue().decode()


_HANDLERS = {
    "eigs": _cmd_eigs,
    "transform": _cmd_transform,
    "masa": _cmd_masa,
    "classify": _cmd_classify,
    "killing-check": _cmd_killing,
    "torus-flow": _cmd_flow,
    "rayleigh": _cmd_rayleigh,
    "report": _cmd_report,
    "export": _cmd_export,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit code."""
    try:
        text = _HANDLERS[cfg.command](cfg)
        _atomic_write(cfg.out_path, text)
        if cfg.command == "export" and cfg.out_path and cfg.out_path != "-":
            grid = _grid(cfg)
            _atomic_write(str(Path(cfg.out_path).with_suffix(".weights.csv")),
                          _csv_text(("weight",), [(w,) for w in grid.weights]))
    except GFTError as exc:
        print(f"gft {cfg.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def report_worked_examples_cli(out_path: Optional[str] = None) -> int:
    return run(RunConfig("report", out_path=out_path))


# --- argument parsing -----------------------------------------------------------


def _ints(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("points per axis must be positive")
    return vals


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gft", description="Generalized Fourier transforms on discretized manifolds.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def grid_args(p, k_default=10):
        p.add_argument("--manifest", required=True, help="manifest JSON path or a catalog id")
        p.add_argument("--n", type=_ints, required=True, help="points per axis, e.g. 16,16")
        p.add_argument("--k", type=int, default=k_default, help="eigenpairs to compute")
        p.add_argument("--cluster-tol", type=_positive, default=None)
        p.add_argument("--comm-tol", type=_positive, default=None)
        p.add_argument("--label-tol", type=_positive, default=1e-6)
        p.add_argument("--fd", action="store_true", help="finite differences on periodic axes")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--out", default=None)

    grid_args(sub.add_parser("eigs", help="lowest eigenpairs of -Delta and their clusters"))
    p = sub.add_parser("transform", help="forward and inverse transform of a vector")
    grid_args(p)
    p.add_argument("--input", help="CSV with one (real) or two (re, im) columns per node")
    p.add_argument("--joint", action="store_true", help="label by the top MASA instead of lambda alone")
    p = sub.add_parser("masa", help="search commuting operator sets")
    grid_args(p, 20)
    p.add_argument("--catalog", default="default")

    p = sub.add_parser("classify", help="Type I/II/III and D/C/SD cell of a MASA")
    p.add_argument("--manifest", required=True)
    p.add_argument("--masa", required=True)
    p.add_argument("--candidate", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("killing-check", help="Killing residuals of fields and diagonal tensors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--field", action="append", default=[], help='e.g. "K=dphi" or "L_x=-sin(phi),-cos(th)*cos(phi)/sin(th)"')
    p.add_argument("--tensor", action="append", default=[], help='diagonal tensor "NAME=c1,c2,..."')
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=None)

    p = sub.add_parser("torus-flow", help="orbit of the unit field at slope tan(eps)")
    p.add_argument("--slope", type=float, required=True)
    p.add_argument("--wraps", type=int, default=100)
    p.add_argument("--out", default=None)

    p = sub.add_parser("rayleigh", help="plane-wave coefficients on a sphere")
    p.add_argument("--k", type=_floats, required=True, help="wave vector kx,ky,kz")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--lmax", type=int, default=20)
    p.add_argument("--out", default=None)

    p = sub.add_parser("report", help="worked examples as one JSON report")
    p.add_argument("--out", default=None)

    p = sub.add_parser("export", help="write the discrete Laplacian in Matrix Market format")
    grid_args(p)
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    extra = {}
    c = args.command
    if c == "transform":
        extra = {"input": args.input, "joint": args.joint}
    elif c == "masa":
        extra = {"catalog": args.catalog}
    elif c == "classify":
        extra = {"masa": args.masa, "candidate": args.candidate}
    elif c == "killing-check":
        extra = {"fields": args.field, "tensors": args.tensor, "samples": args.samples}
    elif c == "torus-flow":
        if args.wraps < 1:
            raise ValidationError("--wraps must be >= 1")
        extra = {"slope": args.slope, "wraps": args.wraps}
    elif c == "rayleigh":
        if len(args.k) != 3:
            raise ValidationError("--k needs three components")
        extra = {"k_vec": args.k, "r": args.r, "lmax": args.lmax}
    return RunConfig(
        command=c,
        manifest_path=getattr(args, "manifest", None),
        resolution=getattr(args, "n", ()) or (),
        k=getattr(args, "k", 10) if c != "rayleigh" else 10,
        cluster_tol=getattr(args, "cluster_tol", None),
        comm_tol=getattr(args, "comm_tol", None),
        label_tol=getattr(args, "label_tol", 1e-6),
        seed=getattr(args, "seed", DEFAULT_SEED),
        out_path=args.out,
        spectral=not getattr(args, "fd", False),
        extra=extra,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except GFTError as exc:
        print(f"gft {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
