"""Experiment harness: deconvolution, compressive sensing and denoising runs.

Each run expands a config into independent cells
(image x regularizer x snr x seed), solves every cell on a thread pool and
writes all files from the calling thread in cell order, so identical
configs give byte-identical outputs.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import denoise as dn
from .errors import ConfigurationError, InvexError
from .images import load_image, write_pgm
from .linops import compose, make_gaussian_blur, make_gaussian_sensing, make_haar
from .metrics import PSNR_CAP_DB, add_awgn, experimental_snr, psnr, ssim
from .regularizers import Regularizer
from .rng import cell_seed, gaussian, make_rng
from .solvers import (
    Problem,
    SolverConfig,
    apg,
    averaged_shrink_denoiser,
    folded_pg,
    pnp_apg,
)

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "RESULT_HEADER",
    "build_deconv",
    "run_experiment",
    "run_deconv",
    "run_cs",
    "run_denoise",
    "cs_instance",
    "write_results",
]

logger = logging.getLogger(__name__)

EXPERIMENTS = ("deconv", "cs", "denoise")
SOLVERS = ("apg", "folded", "pnp")
RESULT_HEADER = ["experiment", "image", "reg", "p", "snr_db", "seed",
                 "psnr_db", "ssim", "rel_err", "runtime_ms"]
CS_SUCCESS_TOL = 1e-3

# per-experiment defaults filled into unset fields
_DEFAULTS = {
    "deconv": {"lam": 1e-5, "T": 800, "solver": "apg"},
    "cs": {"lam": 1.5e-3, "T": 2000, "solver": "folded"},
    "denoise": {"lam": None, "T": None, "solver": None},
}


@dataclass
class ExperimentConfig:
    experiment: str = "deconv"
    images: list = field(default_factory=lambda: ["synthetic:blocks"])
    image_size: int = 64
    regularizers: list = field(default_factory=lambda: [
        {"kind": "lp", "p": 0.5}, {"kind": "l1"}])
    snr_db: list = field(default_factory=lambda: ["inf"])
    seeds: list = field(default_factory=lambda: [0])
    solver: str | None = None
    lam: float | None = None
    T: int | None = None
    output_dir: str = "out"
    # deconvolution
    blur_ksize: int = 9
    blur_sigma: float = 4.0
    haar_levels: int = 3
    pnp_beta: float = 0.5
    # compressive sensing
    n: int = 256
    m_over_n: float = 0.5
    k: int = 10
    # denoising
    denoise: dict = field(default_factory=dict)
    # outputs
    save_traces: bool = True
    save_reconstructions: bool = True
    record_timing: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(
                f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        for key, value in _DEFAULTS[self.experiment].items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        if self.solver is not None and self.solver not in SOLVERS:
            raise ConfigurationError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.experiment == "cs" and not 0.0 < self.m_over_n < 1.0:
            raise ConfigurationError(f"m_over_n must lie in (0, 1), got {self.m_over_n}")
        if self.T is not None and self.T < 0:
            raise ConfigurationError("T must be non-negative")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        self.snr_db = [_parse_snr(s) for s in self.snr_db]
        self.regularizers = [_parse_reg(r) for r in self.regularizers]
        if self.experiment == "denoise":
            self.denoise = dn.FrameLearnConfig(**self.denoise).to_dict()
        if self.experiment != "cs":
            for source in self.images:
                load_image(source, self.image_size)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {unknown}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["snr_db"] = [_snr_label(s) for s in self.snr_db]
        d["regularizers"] = [r.to_dict() for r in self.regularizers]
        return d


def _parse_snr(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        value = float(value)
    value = float(value)
    if math.isnan(value) or value == -math.inf:
        raise ConfigurationError(f"invalid snr {value}")
    return value


def _snr_label(snr: float) -> str:
    return "inf" if math.isinf(snr) else repr(float(snr))


def _parse_reg(value) -> Regularizer:
    if isinstance(value, Regularizer):
        return value
    if isinstance(value, str):
        return Regularizer.from_dict({"kind": value})
    return Regularizer.from_dict(value)


@dataclass
class ResultRow:
    experiment: str
    image: str
    reg: str
    p: float | None
    snr_db: float
    seed: int
    psnr_db: float | None = None
    ssim: float | None = None
    rel_err: float | None = None
    runtime_ms: float = 0.0
    error: str | None = None

    def csv_fields(self) -> list:
        def num(v):
            return "" if v is None else repr(float(v))
        ps = None if self.psnr_db is None else min(self.psnr_db, PSNR_CAP_DB)
        return [self.experiment, self.image, self.reg,
                "" if self.p is None else repr(self.p),
                _snr_label(self.snr_db), str(self.seed),
                num(ps), num(self.ssim), num(self.rel_err), f"{self.runtime_ms:.3f}"]


@dataclass
class _CellOutput:
    row: ResultRow
    files: dict = field(default_factory=dict)  # relative name -> text or bytes writer
    extra: dict = field(default_factory=dict)


def _rel_err(ref, est) -> float:
    ref = np.asarray(ref, dtype=float).ravel()
    est = np.asarray(est, dtype=float).ravel()
    return float(np.linalg.norm(est - ref) / np.linalg.norm(ref))


def _vector_csv(v) -> str:
    return "".join(repr(float(x)) + "\n" for x in np.ravel(v))


def _image_csv(arr) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in np.asarray(arr):
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _stem(exp, image, reg, snr, seed) -> str:
    return f"{exp}_{image}_{reg.label}_snr{_snr_label(snr)}_seed{seed}"


def _solve(cfg: ExperimentConfig, prob: Problem, scfg: SolverConfig):
    if cfg.solver == "apg":
        return apg(prob, scfg)
    if cfg.solver == "folded":
        return folded_pg(prob, scfg)
    den = averaged_shrink_denoiser(prob.reg, prob.lam, cfg.pnp_beta)
    return pnp_apg(prob, den, scfg)


def build_deconv(image, reg: Regularizer, lam: float, snr_db: float, seed: int,
                 ksize: int = 9, sigma: float = 4.0, levels: int = 3):
    """Blur-plus-Haar deconvolution problem for ``image``.

    Returns ``(problem, haar, x0)`` where ``x0`` holds the Haar coefficients
    of the (noisy) blurred observation.
    """
    arr = np.asarray(image, dtype=float)
    h, w = arr.shape
    blur = make_gaussian_blur(w, h, ksize, sigma)
    haar = make_haar(levels, w, h)
    H = compose(blur, haar)
    b = add_awgn(blur @ arr.ravel(), snr_db, seed)
    x0 = haar.adjoint(b)
    return Problem(H, b, reg, lam), haar, x0


def _deconv_cell(cfg, image_label, image, reg, snr, seed, data_seed):
    row = ResultRow("deconv", image_label, reg.kind.value, reg.p, snr, seed)
    t0 = time.perf_counter()
    prob, haar, x0 = build_deconv(image.array, reg, cfg.lam, snr, data_seed,
                                  cfg.blur_ksize, cfg.blur_sigma, cfg.haar_levels)
    scfg = SolverConfig(T=cfg.T, x0=x0, seed=seed, record_timing=cfg.record_timing)
    x, trace = _solve(cfg, prob, scfg)
    rec = np.clip(haar.forward(x).reshape(image.height, image.width), 0.0, 1.0)
    row.psnr_db = psnr(image.array, rec)
    row.ssim = ssim(image.array, rec)
    row.rel_err = _rel_err(image.array, rec)
    if cfg.record_timing:
        row.runtime_ms = (time.perf_counter() - t0) * 1e3
    stem = _stem("deconv", image_label, reg, snr, seed)
    out = _CellOutput(row)
    if cfg.save_traces:
        out.files[f"traces/{stem}.csv"] = trace.to_csv()
    if cfg.save_reconstructions:
        out.files[f"recon/{stem}.csv"] = _image_csv(rec)
        out.files[f"recon/{stem}.pgm"] = rec
    return out


def cs_instance(n: int, m: int, k: int, seed: int):
    """Seeded ``(H, x)`` pair: Gaussian sensing matrix and a k-sparse signal."""
    H = make_gaussian_sensing(m, n, seed)
    rng = make_rng(cell_seed(seed, 1))
    x = np.zeros(n)
    if k:
        support = np.sort(rng.choice(n, size=k, replace=False))
        x[support] = gaussian(rng, (k,))
    return H, x


def _cs_cell(cfg, reg, snr, seed, data_seed):
    m = int(round(cfg.m_over_n * cfg.n))
    row = ResultRow("cs", f"n{cfg.n}_m{m}_k{cfg.k}", reg.kind.value, reg.p, snr, seed)
    t0 = time.perf_counter()
    H, x_true = cs_instance(cfg.n, m, cfg.k, seed)
    clean = H @ x_true
    b = clean if not np.any(clean) else add_awgn(clean, snr, data_seed)
    prob = Problem(H, b, reg, cfg.lam)
    scfg = SolverConfig(T=cfg.T, seed=seed, record_timing=cfg.record_timing)
    x, trace = _solve(cfg, prob, scfg)
    norm = np.linalg.norm(x_true)
    row.rel_err = _rel_err(x_true, x) if norm > 0 else float(np.linalg.norm(x))
    if cfg.record_timing:
        row.runtime_ms = (time.perf_counter() - t0) * 1e3
    stem = _stem("cs", row.image, reg, snr, seed)
    out = _CellOutput(row, extra={"success": row.rel_err < CS_SUCCESS_TOL})
    if cfg.save_traces:
        out.files[f"traces/{stem}.csv"] = trace.to_csv()
    if cfg.save_reconstructions:
        out.files[f"recon/{stem}.csv"] = _vector_csv(x)
        out.files[f"recon/{stem}_truth.csv"] = _vector_csv(x_true)
    return out


def _denoise_cell(cfg, image_label, image, reg, snr, seed, data_seed):
    row = ResultRow("denoise", image_label, reg.kind.value, reg.p, snr, seed)
    t0 = time.perf_counter()
    fcfg = dn.FrameLearnConfig(**{**cfg.denoise, "seed": data_seed})
    noisy = add_awgn(image.array, snr, data_seed)
    out_img = dn.denoise_image(noisy, reg, fcfg).array
    row.psnr_db = psnr(image.array, out_img)
    row.ssim = ssim(image.array, out_img)
    row.rel_err = _rel_err(image.array, out_img)
    if cfg.record_timing:
        row.runtime_ms = (time.perf_counter() - t0) * 1e3
    stem = _stem("denoise", image_label, reg, snr, seed)
    sidecar = {
        "snr_in": _json_num(experimental_snr(image.array, noisy)),
        "snr_out": _json_num(experimental_snr(image.array, out_img)),
        "ssim": row.ssim,
        "config": {**fcfg.to_dict(), "reg": reg.to_dict()},
    }
    out = _CellOutput(row, extra=sidecar)
    out.files[f"recon/{stem}.json"] = json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    if cfg.save_reconstructions:
        out.files[f"recon/{stem}.csv"] = _image_csv(out_img)
        out.files[f"recon/{stem}.pgm"] = out_img
        out.files[f"recon/{stem}_noisy.pgm"] = noisy
    return out


def _json_num(v):
    return v if math.isfinite(v) else "inf"


def _cells(cfg: ExperimentConfig):
    # noise seeds mix the base seed with the image and snr indices only, so
    # every regularizer sees the same data
    regs = cfg.regularizers
    if cfg.experiment == "cs":
        for reg in regs:
            for j, snr in enumerate(cfg.snr_db):
                for seed in cfg.seeds:
                    yield (_cs_cell, (cfg, reg, snr, seed, cell_seed(seed, 2, j)),
                           ResultRow("cs", "", reg.kind.value, reg.p, snr, seed))
        return
    fn = _deconv_cell if cfg.experiment == "deconv" else _denoise_cell
    for i, source in enumerate(cfg.images):
        label, image = load_image(source, cfg.image_size)
        for reg in regs:
            for j, snr in enumerate(cfg.snr_db):
                for seed in cfg.seeds:
                    yield (fn, (cfg, label, image, reg, snr, seed, cell_seed(seed, i, j)),
                           ResultRow(cfg.experiment, label, reg.kind.value, reg.p, snr, seed))


def _run_cell(fn, args, blank):
    try:
        return fn(*args)
    except (InvexError, ValueError, ArithmeticError) as exc:
        logger.error("cell %s/%s/snr %s/seed %s failed: %s",
                     blank.image, blank.reg, blank.snr_db, blank.seed, exc)
        blank.error = f"{type(exc).__name__}: {exc}"
        return _CellOutput(blank)


def write_results(path, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_HEADER)
    for row in rows:
        writer.writerow(row.csv_fields())
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> list:
    """Run every cell of ``cfg`` and write outputs under ``cfg.output_dir``.

    Returns the result rows in cell order.
    """
    threads = threads or cfg.threads
    cells = list(_cells(cfg))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(lambda c: _run_cell(*c), cells))
    else:
        outputs = [_run_cell(*c) for c in cells]

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "resolved_config.json").write_text(
        json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    for out in outputs:
        for name, payload in out.files.items():
            target = out_dir / name
            target.parent.mkdir(parents=True, exist_ok=True)
            if isinstance(payload, str):
                target.write_text(payload)
            else:
                write_pgm(target, payload)
    rows = [o.row for o in outputs]
    write_results(out_dir / "results.csv", rows)

    errors = [{"image": r.image, "reg": r.reg, "p": r.p, "snr_db": _snr_label(r.snr_db),
               "seed": r.seed, "error": r.error} for r in rows if r.error]
    summary = {"experiment": cfg.experiment, "cells": len(rows), "failed": len(errors),
               "errors": errors}
    if cfg.experiment == "cs":
        by_reg = {}
        for o in outputs:
            key = o.row.reg if o.row.p is None else f"{o.row.reg}(p={o.row.p!r})"
            hit = bool(o.extra.get("success", False))
            s = by_reg.setdefault(key, {"success": 0, "trials": 0})
            s["success"] += hit
            s["trials"] += 1
        summary["success_tol"] = CS_SUCCESS_TOL
        summary["recovery"] = by_reg
    if cfg.experiment == "denoise":
        summary["threshold_mode"] = cfg.denoise["threshold_mode"]
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return rows


def _run_as(name):
    def run(cfg: ExperimentConfig, threads: int | None = None) -> list:
        if cfg.experiment != name:
            raise ConfigurationError(f"expected a {name} config, got {cfg.experiment}")
        return run_experiment(cfg, threads)
    run.__name__ = f"run_{name}"
    run.__doc__ = f"Run a ``{name}`` config; see :func:`run_experiment`."
    return run


run_deconv = _run_as("deconv")
run_cs = _run_as("cs")
run_denoise = _run_as("denoise")
