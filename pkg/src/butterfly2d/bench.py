"""Benchmark harness: dense reference, sampled error, timed experiment runs.

A run builds one factorization, applies it to a seeded complex Gaussian ``g``
and compares against direct evaluation on a random sample ``S`` of at most
256 output points. Direct evaluation is only timed on ``S``; the full-size
figure (and with it the speedup) is extrapolated by ``N / |S|``.
"""

from __future__ import annotations

import csv
import json
import logging
import platform
import resource
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import io as bfio
from .butterfly import build_butterfly
from .kernels import (RADON, KernelHandle, composition_kernel, dft_apply, dft_kernel, fio_kernel,
                      synthetic_lowrank_kernel)
from .randlr import RandConfig
from .variants import build_mbf, build_pbf

log = logging.getLogger(__name__)

KERNELS = ("dft", "fio-radon", "composition", "synthetic")
METHODS = ("bf", "pbf-s", "pbf-m", "mbf-s", "mbf-m")
CSV_HEADER = "kernel,method,n,r,k,seed,err,t_factor_sec,t_apply_sec,t_direct_sec,nnz_total,speedup"
SAMPLE_SIZE = 256
_ROW_CHUNK = 1 << 21

# Which constructions make sense for which kernel. The "-m" variants need a
# fast matvec, "pbf" needs a phase function.
SUPPORTED = {
    "dft": {"bf", "pbf-s", "pbf-m", "mbf-s", "mbf-m"},
    "fio-radon": {"bf", "pbf-s", "mbf-s"},
    "composition": {"pbf-m", "mbf-m"},
    "synthetic": {"bf", "mbf-s", "mbf-m"},
}

DEFAULTS = {"kernel": "fio-radon", "method": "mbf-s", "n": 64, "rank": 12, "oversample": 8, "seed": 0,
            "center_halfwidth": 8, "inner_factor": None, "kernel_rank": 2, "extra_levels": 0,
            "max_sampling_iters": 5}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class BenchRecord:
    kernel: str
    method: str
    n: int
    r: int
    k: int
    seed: int
    err: float
    t_factor_sec: float
    t_apply_sec: float
    t_direct_sec: float
    nnz_total: int
    speedup: float

    def row(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]


# -- reference evaluation ---------------------------------------------------


def _grids(kernel: KernelHandle):
    n = kernel.meta.get("n")
    if n is None:
        raise ValueError(f"{kernel.name} does not record its grid size")
    return geo.build_uniform_grids(n)


def dense_oracle_apply(kernel: KernelHandle, g: np.ndarray, rows=None) -> np.ndarray:
    """Direct evaluation ``u[i] = sum_j K(x_i, xi_j) g[j]``, optionally only for ``rows``.

    Kernel rows are generated in fixed-size chunks, each multiplied by ``g``
    in column order, so the result does not depend on anything but the input.
    """
    if kernel.entry is None:
        raise ValueError(f"{kernel.name} has no entry oracle")
    X, omega = _grids(kernel)
    g = np.asarray(g)
    if g.shape[0] != len(omega):
        raise ValueError(f"input has length {g.shape[0]}, expected {len(omega)}")
    pts = X.points if rows is None else X.points[np.asarray(rows)]
    step = max(1, _ROW_CHUNK // len(omega))
    out = np.empty((len(pts),) + g.shape[1:], dtype=complex)
    for a in range(0, len(pts), step):
        out[a:a + step] = kernel.entry(pts[a:a + step], omega.points) @ g
    return out


def composition_reference(n: int, g: np.ndarray, rows=None) -> np.ndarray:
    """``K F K g`` for the Radon FIO ``K``, with both ``K`` evaluated directly."""
    K = fio_kernel(RADON, n)
    return dense_oracle_apply(K, dft_apply(dense_oracle_apply(K, g), n), rows)


def estimate_error(approx_u, exact_u) -> float:
    """Relative 2-norm error over a sample: ``||approx - exact|| / ||exact||``."""
    approx_u, exact_u = np.asarray(approx_u), np.asarray(exact_u)
    if approx_u.shape != exact_u.shape or approx_u.size == 0:
        raise ValueError("samples must be nonempty and of equal shape")
    den = np.linalg.norm(exact_u)
    if den == 0:
        raise ValueError("exact sample is identically zero")
    return float(np.linalg.norm(approx_u - exact_u) / den)


def sample_points(N: int, rng: np.random.Generator, size: int = SAMPLE_SIZE) -> np.ndarray:
    return np.sort(rng.choice(N, size=min(size, N), replace=False))


def random_input(N: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(N) + 1j * rng.standard_normal(N)


# -- configuration --------------------------------------------------------------


def validate(config: dict) -> dict:
    """Fill defaults and check one run configuration; raises :class:`ConfigError`."""
    unknown = set(config) - set(DEFAULTS) - {"inner"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = {**DEFAULTS, **config}
    if cfg["kernel"] not in KERNELS:
        raise ConfigError(f"unknown kernel {cfg['kernel']!r}")
    if cfg["method"] not in METHODS:
        raise ConfigError(f"unknown method {cfg['method']!r}")
    if cfg["method"] not in SUPPORTED[cfg["kernel"]]:
        raise ConfigError(f"method {cfg['method']} is not available for kernel {cfg['kernel']}")
    n = cfg["n"]
    if not isinstance(n, int) or not geo.is_power_of_two(n) or n < 4:
        raise ConfigError(f"n must be a power of two >= 4, got {n!r}")
    if cfg["rank"] < 1 or cfg["oversample"] < 0 or cfg["extra_levels"] < 0:
        raise ConfigError("need rank >= 1, oversample >= 0, extra_levels >= 0")
    if cfg["method"].startswith("mbf"):
        hw = cfg["center_halfwidth"]
        if not geo.is_power_of_two(hw) or hw < 4 or n < 4 * hw:
            raise ConfigError(f"center_halfwidth={hw} does not fit n={n}")
    if cfg["kernel"] == "composition" and cfg.get("inner") is None and cfg["inner_factor"] is None:
        raise ConfigError("the composition kernel needs inner_factor")
    return cfg


def rand_config(cfg: dict) -> RandConfig:
    return RandConfig(cfg["rank"], cfg["oversample"], cfg["seed"], cfg["max_sampling_iters"])


def make_kernel(cfg: dict) -> KernelHandle:
    n = cfg["n"]
    name = cfg["kernel"]
    if name == "dft":
        return dft_kernel(n)
    if name == "fio-radon":
        return fio_kernel(RADON, n)
    if name == "synthetic":
        return synthetic_lowrank_kernel(n, cfg["kernel_rank"], cfg["seed"])
    inner = cfg.get("inner")
    if inner is None:
        inner = bfio.load(cfg["inner_factor"])
    if inner.shape != (n * n, n * n):
        raise ConfigError(f"inner factorization has shape {inner.shape}, expected n={n}")
    return composition_kernel(inner, n)


def factorize(kernel: KernelHandle, cfg: dict):
    """Build the factorization named by ``cfg['method']``."""
    n, method = cfg["n"], cfg["method"]
    rc = rand_config(cfg)
    how = "matvec" if method.endswith("-m") else "sampling"
    phase = kernel.meta.get("phase", RADON)
    if method == "bf":
        L = geo.log2_int(n) + cfg["extra_levels"]
        X, omega = geo.build_uniform_grids(n)
        tx = geo.build_quadtree(X, geo.uniform_x_box(), L)
        tw = geo.build_quadtree(omega, geo.uniform_omega_box(n), L)
        return build_butterfly(kernel, tx, tw, rc)
    if method.startswith("pbf"):
        return build_pbf(phase, n, rc, how, kernel=kernel, extra_levels=cfg["extra_levels"])
    return build_mbf(kernel, n, rc, how, cfg["center_halfwidth"], extra_levels=cfg["extra_levels"])


def reference(kernel: KernelHandle, cfg: dict, g: np.ndarray, rows: np.ndarray) -> np.ndarray:
    if cfg["kernel"] == "composition":
        return composition_reference(cfg["n"], g, rows)
    return dense_oracle_apply(kernel, g, rows)


def run_one(config: dict, keep: dict | None = None) -> BenchRecord:
    """Run one experiment. ``keep`` (if given) receives the factorization."""
    cfg = validate(config)
    kernel = make_kernel(cfg)
    N = cfg["n"] ** 2
    rng = np.random.default_rng(cfg["seed"])
    g = random_input(N, rng)
    rows = sample_points(N, rng)

    t0 = time.perf_counter()
    fact = factorize(kernel, cfg)
    t1 = time.perf_counter()
    u = fact.apply(g)
    t2 = time.perf_counter()
    exact = reference(kernel, cfg, g, rows)
    t3 = time.perf_counter()
    if keep is not None:
        keep["factorization"] = fact
    t_apply = max(t2 - t1, 1e-9)
    t_direct = (t3 - t2) * N / len(rows)
    return BenchRecord(cfg["kernel"], cfg["method"], cfg["n"], cfg["rank"], cfg["oversample"], cfg["seed"],
                       estimate_error(u[rows], exact), t1 - t0, t_apply, t_direct, int(fact.nnz),
                       t_direct / t_apply)


def run_bench(config) -> list[BenchRecord]:
    """Run one configuration or a list of them, in order."""
    configs = [config] if isinstance(config, dict) else list(config)
    for c in configs:
        validate(c)
    records = []
    for c in configs:
        rec = run_one(c)
        log.info("%s", rec)
        records.append(rec)
    return records


# -- output ---------------------------------------------------------------------


def peak_rss_mb() -> float:
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return rss / 2**20 if sys.platform == "darwin" else rss / 1024


def metadata() -> dict:
    return {
        "speedup_note": "estimated: direct evaluation is timed on the sampled rows and scaled by N/|S|",
        "sample_size": SAMPLE_SIZE,
        "peak_rss_mb": peak_rss_mb(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
    }


def write_csv(records: list[BenchRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER.split(","))
        for rec in records:
            w.writerow(rec.row())


def write_json(records: list[BenchRecord], path) -> None:
    Path(path).write_text(json.dumps({"metadata": metadata(), "records": [asdict(r) for r in records]},
                                     indent=2) + "\n")


def write_records(records: list[BenchRecord], path, fmt: str = "csv") -> None:
    """Write records as CSV (plus a ``.meta.json`` sidecar) or as one JSON document."""
    if fmt == "json":
        write_json(records, path)
        return
    write_csv(records, path)
    side = Path(str(path) + ".meta.json")
    side.write_text(json.dumps(metadata(), indent=2) + "\n")
