"""Configuration-driven experiment runner, error metrics and plot-data export.

A run goes forward solve -> noise -> frames -> reconstruction -> metrics and
writes every recovered field, its ground truth and the ``x = 0.5``
cross-section as CSV next to a JSON report. Identical configurations give
byte-identical outputs; wall-clock timings go to a separate file.
"""
from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import det_coupled, det_theta
from .anisotropy import (
    REL_THRESHOLD,
    AnisotropyEstimate,
    reconstruct_least_squares,
    rotated_illumination_family,
)
from .conductivity import (
    AnisotropyXiZeta,
    ConductivityField,
    constant_conductivity,
    load_conductivity_csv,
    phantom,
)
from .forward import (
    NoiseSpec,
    PowerDensitySet,
    add_noise,
    coordinate_pair,
    power_densities,
    solve_illuminations,
    standard_quadruple,
    standard_triplet,
)
from .frames import AdmissibilityError, admissibility, gram_schmidt_transfer, xy_fields
from .grid import ITERATIVE_RTOL, Grid, save_field_csv

PIPELINES = ("anisotropy", "theta", "coupled", "full")
PHANTOM_NAMES = ("smooth", "rough", "identity")
FAMILIES = ("triplet", "quadruple", "rotated")

# Noise stream prefixes, so stages of one run never share a realization.
ANISO_STREAM = 0
DET_STREAM = 1


class StageError(RuntimeError):
    """Failure inside one stage of a run; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ExperimentConfig:
    """Parameters of one run; see the README for the JSON schema.

    ``conductivity_csv`` maps ``detsqrt``, ``xi`` and ``zeta`` to CSV paths
    and takes precedence over ``phantom``. ``family`` selects the
    illuminations of the anisotropy stage; the determinant stages always
    use ``(x, y)``.
    """

    name: str = "experiment"
    n: int = 128
    phantom: str = "smooth"
    conductivity_csv: dict | None = None
    kappa: float = 8.0
    pipeline: str = "anisotropy"
    family: str = "triplet"
    p: int = 1
    exponents: tuple[float, float, float] = (1.0, 2.0, 1.0)
    alpha: float = 0.0
    seed: int = 1
    c0: float = 1e-6
    y0: float = 1e-8
    rel_threshold: float = REL_THRESHOLD
    strict: bool = True
    solver_rtol: float = ITERATIVE_RTOL
    out: str | None = None

    def __post_init__(self):
        self.exponents = tuple(float(e) for e in self.exponents)
        self.validate()

    def validate(self) -> None:
        if self.n < 4:
            raise ValueError("n must be >= 4")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.pipeline not in PIPELINES:
            raise ValueError(f"pipeline must be one of {PIPELINES}")
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.family != "rotated" and self.p != 1:
            raise ValueError(f"family {self.family!r} has a single set; use p = 1")
        if self.conductivity_csv is not None:
            missing = [k for k in ("detsqrt", "xi", "zeta") if k not in self.conductivity_csv]
            if missing:
                raise ValueError(f"conductivity_csv lacks {missing}")
            for path in self.conductivity_csv.values():
                if not Path(path).is_file():
                    raise FileNotFoundError(path)
        elif self.phantom not in PHANTOM_NAMES:
            raise ValueError(f"phantom must be one of {PHANTOM_NAMES}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        """Read a JSON config; bare names resolve to the bundled configs."""
        p = Path(path)
        if not p.is_file():
            p = bundled_config_path(str(path))
        return cls.from_dict(json.loads(p.read_text()))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["exponents"] = list(self.exponents)
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def bundled_configs() -> list[str]:
    root = resources.files("anisopd") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_config_path(name: str) -> Path:
    stem = name[:-5] if name.endswith(".json") else name
    p = Path(str(resources.files("anisopd") / "configs" / f"{stem}.json"))
    if not p.is_file():
        raise FileNotFoundError(f"no config file or bundled config named {name!r}")
    return p


@dataclass
class FieldResult:
    """A recovered scalar field with its ground truth and mask."""

    rec: np.ndarray
    truth: np.ndarray
    mask: np.ndarray


@dataclass
class ReconstructionReport:
    """Error metrics and diagnostics of one run.

    ``errors`` use every unmasked node; ``errors_interior`` drop the boundary
    ring as well. Each entry is ``{"rel_l2": ..., "rel_linf": ...}``.
    """

    config: dict
    errors: dict = field(default_factory=dict)
    errors_interior: dict = field(default_factory=dict)
    masked: dict = field(default_factory=dict)
    admissibility: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        """Deterministic content (no timings, no arrays)."""
        return {
            "config": self.config, "errors": self.errors, "errors_interior": self.errors_interior,
            "masked": self.masked, "admissibility": self.admissibility,
            "diagnostics": self.diagnostics,
        }

    def rel_l2(self, name: str, interior: bool = False) -> float:
        return (self.errors_interior if interior else self.errors)[name]["rel_l2"]

    def rel_linf(self, name: str, interior: bool = False) -> float:
        return (self.errors_interior if interior else self.errors)[name]["rel_linf"]


def compute_errors(rec: np.ndarray, truth: np.ndarray, mask: np.ndarray | None = None) -> tuple[float, float]:
    """Relative L2 and L-infinity errors over the nodes where ``mask`` is False."""
    rec, truth = np.asarray(rec, float), np.asarray(truth, float)
    if rec.shape != truth.shape:
        raise ValueError("rec and truth have different shapes")
    keep = np.ones(truth.shape, bool) if mask is None else ~np.asarray(mask, bool)
    if not keep.any():
        raise ValueError("every node is masked")
    r, t = rec[keep], truth[keep]
    t_l2, t_inf = np.linalg.norm(t), np.abs(t).max()
    if t_inf == 0:
        raise ValueError("truth vanishes on the unmasked set")
    diff = r - t
    return float(np.linalg.norm(diff) / t_l2), float(np.abs(diff).max() / t_inf)


def cross_section(grid: Grid, f: np.ndarray, x0: float = 0.5) -> np.ndarray:
    """Values along ``x = x0``, linearly interpolated between grid lines."""
    t = (x0 + 1.0) / grid.h
    i0 = min(int(np.floor(t)), grid.n - 1)
    w = t - i0
    return f[i0] if w == 0 else (1 - w) * f[i0] + w * f[i0 + 1]


def export_plot_data(report: ReconstructionReport, fields: dict[str, FieldResult], out) -> list[Path]:
    """Write full fields, masks and ``x = 0.5`` cross-sections as CSV.

    For every field ``name``: ``name.csv`` (NaN at masked nodes),
    ``name_true.csv``, ``name_mask.csv`` and ``name_x0.5.csv`` with columns
    ``y, true, reconstructed`` and one row per grid line.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    grid = Grid(int(report.config["n"]))
    written = []
    for name, fr in fields.items():
        rec = np.where(fr.mask, np.nan, fr.rec)
        for suffix, arr in (("", rec), ("_true", fr.truth), ("_mask", fr.mask.astype(float))):
            path = out / f"{name}{suffix}.csv"
            save_field_csv(path, arr)
            written.append(path)
        xs = np.column_stack([grid.coords, cross_section(grid, fr.truth), cross_section(grid, rec)])
        path = out / f"{name}_x0.5.csv"
        np.savetxt(path, xs, delimiter=",", fmt="%.17g", header="y,true,reconstructed", comments="")
        written.append(path)
    return written


def write_report(report: ReconstructionReport, out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps(report.runtime, indent=2, sort_keys=True) + "\n")
    return path


def build_conductivity(cfg: ExperimentConfig) -> ConductivityField:
    grid = Grid(cfg.n)
    if cfg.conductivity_csv is not None:
        cc = cfg.conductivity_csv
        return load_conductivity_csv(grid, cc["detsqrt"], cc["xi"], cc["zeta"], cfg.kappa)
    if cfg.phantom == "identity":
        return constant_conductivity(grid, kappa=cfg.kappa)
    return phantom(cfg.phantom, grid, cfg.kappa)


def _illumination_sets(cfg: ExperimentConfig):
    """Illumination sets of the anisotropy stage with their frame pairs."""
    if cfg.family == "triplet":
        return [standard_triplet()], ((0, 1), (1, 2))
    if cfg.family == "quadruple":
        return [standard_quadruple()], ((0, 1), (2, 3))
    return rotated_illumination_family(cfg.p, cfg.exponents), ((0, 1), (1, 2))


class _Stages:
    """Stage bookkeeping: timings and stage-tagged errors."""

    def __init__(self):
        self.runtime: dict[str, float] = {}

    def run(self, stage: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage, exc) from exc
        finally:
            self.runtime[stage] = self.runtime.get(stage, 0.0) + time.perf_counter() - t0


def _record(report: ReconstructionReport, fields: dict, name: str, rec, truth, mask) -> None:
    grid = Grid(int(report.config["n"]))
    mask = np.asarray(mask, bool)
    fields[name] = FieldResult(np.asarray(rec, float), np.asarray(truth, float), mask)
    l2, linf = compute_errors(rec, truth, mask)
    report.errors[name] = {"rel_l2": l2, "rel_linf": linf}
    l2, linf = compute_errors(rec, truth, mask | grid.boundary_mask)
    report.errors_interior[name] = {"rel_l2": l2, "rel_linf": linf}
    report.masked[name] = int(mask.sum())


def _require_admissible(reports) -> None:
    failed = [j for j, r in enumerate(reports) if not r.ok]
    if failed:
        r = reports[failed[0]]
        raise AdmissibilityError(
            f"{len(failed)} of {len(reports)} illumination sets fail the checks; first is set {failed[0]} "
            f"(min d1 {r.min_d1:.3g}, min d2 {r.min_d2:.3g}, min |Y| {r.min_norm_y:.3g})",
            np.array(failed),
        )


def _reconstruct_anisotropy(Ds, rel_threshold) -> AnisotropyEstimate:
    est = reconstruct_least_squares(Ds, rel_threshold)
    if est.mask.all():
        raise AdmissibilityError("X.Y vanishes at every node", np.argwhere(est.mask))
    return est


def _anisotropy_stage(cfg, c, report, fields, S: _Stages) -> AnisotropyEstimate:
    sets, pairs = _illumination_sets(cfg)
    flat = [g for s in sets for g in s]
    us = S.run("forward", solve_illuminations, c, flat, cfg.solver_rtol)
    spec = NoiseSpec(cfg.alpha, cfg.seed)
    Ds, reports, first = [], [], None
    k = 0
    for j, s in enumerate(sets):
        H = power_densities(c, us[k:k + len(s)], [g.tag for g in s])
        k += len(s)
        Hn = S.run("noise", add_noise, H, spec, (ANISO_STREAM, j))
        F1, F2 = S.run("frames", gram_schmidt_transfer, Hn, pairs, cfg.strict)
        D = S.run("frames", xy_fields, F1, F2, Hn)
        Ds.append(D)
        reports.append(admissibility(F1, F2, D, cfg.c0, cfg.y0))
        first = first or (F1, F2)
    if cfg.strict:
        S.run("admissibility", _require_admissible, reports)
    est = S.run("anisotropy", _reconstruct_anisotropy, Ds, cfg.rel_threshold)
    S.run("metrics", _record, report, fields, "xi", est.xi, c.xi, est.mask)
    S.run("metrics", _record, report, fields, "zeta", est.zeta, c.zeta, est.mask)
    report.admissibility["anisotropy"] = {
        "sets": len(reports),
        "admissible_sets": int(sum(r.ok for r in reports)),
        "min_d1": min(r.min_d1 for r in reports),
        "min_d2": min(r.min_d2 for r in reports),
        "min_norm_y": min(r.min_norm_y for r in reports),
        "floored_nodes": int(sum(r.floored_nodes for r in reports)),
        "c0": cfg.c0, "y0": cfg.y0,
        "ok": bool(all(r.ok for r in reports)),
    }
    # log d1 - log d2 of the first set, with true values from noiseless data
    grid = c.grid
    H0 = power_densities(c, us[:len(sets[0])])
    T1, T2 = gram_schmidt_transfer(H0, pairs, strict=False)
    no_mask = np.zeros(grid.shape, bool)
    fields["log_d1_minus_log_d2"] = FieldResult(
        np.log(first[0].d) - np.log(first[1].d), np.log(T1.d) - np.log(T2.d), no_mask
    )
    return est


def _det_data(cfg, c, S: _Stages):
    us = S.run("forward", solve_illuminations, c, coordinate_pair(), cfg.solver_rtol)
    H = power_densities(c, us, ["x", "y"])
    Hn = S.run("noise", add_noise, H, NoiseSpec(cfg.alpha, cfg.seed), (DET_STREAM,))
    return us, Hn


def _theta_stage(cfg, c, aniso: AnisotropyXiZeta, report, fields, S: _Stages) -> None:
    grid = c.grid
    us, Hn = _det_data(cfg, c, S)
    (F,) = S.run("frames", gram_schmidt_transfer, Hn, ((0, 1),), cfg.strict)
    theta_true = det_theta.frame_angle(grid, c.aniso, us[0])
    theta, detsqrt = S.run(
        "theta", det_theta.reconstruct_detsqrt, aniso, F, theta_true, np.log(c.detsqrt)
    )
    none = np.zeros(grid.shape, bool)
    S.run("metrics", _record, report, fields, "theta", theta, theta_true, none)
    S.run("metrics", _record, report, fields, "detsqrt", detsqrt, c.detsqrt, ~np.isfinite(detsqrt))
    report.admissibility["determinant"] = {
        "min_d": float(F.d.min()), "c0": cfg.c0, "floored_nodes": int(F.floored.sum()),
        "ok": bool(F.d.min() >= cfg.c0),
    }
    G = det_theta.theta_rhs(aniso, F)
    curl = det_theta.curl_compatibility(grid, G)
    report.diagnostics["theta_rhs_curl_max_interior"] = float(np.abs(curl[grid.interior_mask]).max())


def _coupled_stage(cfg, c, report, fields, S: _Stages) -> None:
    grid = c.grid
    us, Hn = _det_data(cfg, c, S)
    system = S.run("coupled", det_coupled.assemble_coupled, c.aniso, Hn, us[0], us[1], cfg.strict)
    u1, u2 = S.run("coupled", system.solve)
    v, detsqrt = S.run("coupled", det_coupled.reconstruct_inv_detA, c.aniso, Hn, u1, u2,
                       1.0 / c.detsqrt, cfg.strict)
    none = np.zeros(grid.shape, bool)
    S.run("metrics", _record, report, fields, "u1", u1, us[0], none)
    S.run("metrics", _record, report, fields, "u2", u2, us[1], none)
    bad = ~(v > 0)
    S.run("metrics", _record, report, fields, "detsqrt", detsqrt, c.detsqrt, bad)
    d = np.sqrt(np.maximum(Hn[0, 0] * Hn[1, 1] - Hn[0, 1] ** 2, 0.0))
    report.admissibility["determinant"] = {
        "min_d": float(d.min()), "c0": cfg.c0, "floored_nodes": int(system.floored.sum()),
        "ok": bool(d.min() >= cfg.c0),
    }
    report.diagnostics["nonpositive_inv_det_nodes"] = int(bad.sum())
    res = det_coupled.nondivergence_residual(c.aniso, Hn, np.stack([u1, u2]))
    report.diagnostics["nondivergence_residual_max_interior"] = float(
        np.abs(res[:, grid.interior_mask]).max()
    )


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ReconstructionReport:
    """Run the configured pipeline and return its report.

    When ``write`` is set and ``cfg.out`` is given, the report and all plot
    data are written there. Failures raise :class:`StageError` naming the
    stage.
    """
    cfg.validate()
    S = _Stages()
    t0 = time.perf_counter()
    c = S.run("conductivity", build_conductivity, cfg)
    report = ReconstructionReport(config=cfg.to_dict())
    fields: dict[str, FieldResult] = {}
    if cfg.pipeline == "anisotropy":
        _anisotropy_stage(cfg, c, report, fields, S)
    elif cfg.pipeline == "theta":
        _theta_stage(cfg, c, c.aniso, report, fields, S)
    elif cfg.pipeline == "coupled":
        _coupled_stage(cfg, c, report, fields, S)
    else:
        est = _anisotropy_stage(cfg, c, report, fields, S)
        _theta_stage(cfg, c, est.filled(), report, fields, S)
    S.runtime["total"] = time.perf_counter() - t0
    report.runtime = S.runtime
    report.fields = fields
    if write and cfg.out:
        S.run("export", export_plot_data, report, fields, cfg.out)
        S.run("export", write_report, report, cfg.out)
    return report


def forward_data(cfg: ExperimentConfig) -> tuple[ConductivityField, np.ndarray, PowerDensitySet]:
    """Forward solutions and (noisy) power densities for the first illumination set.

    The determinant pipelines use ``(x, y)``; the others use ``cfg.family``.
    """
    c = build_conductivity(cfg)
    if cfg.pipeline in ("theta", "coupled"):
        gs, stream = coordinate_pair(), (DET_STREAM,)
    else:
        gs, stream = _illumination_sets(cfg)[0][0], (ANISO_STREAM, 0)
    us = solve_illuminations(c, gs, cfg.solver_rtol)
    H = power_densities(c, us, [g.tag for g in gs])
    return c, us, add_noise(H, NoiseSpec(cfg.alpha, cfg.seed), stream)


def admissibility_report(cfg: ExperimentConfig) -> dict:
    """Positivity and non-vanishing checks for the configured illuminations.

    The ``full`` pipeline is checked on its anisotropy illuminations.
    """
    if cfg.pipeline == "full":
        cfg = cfg.replace(pipeline="anisotropy")
    _, _, H = forward_data(cfg)
    if cfg.pipeline in ("theta", "coupled"):
        (F,) = gram_schmidt_transfer(H, ((0, 1),), strict=False)
        ok = bool(F.d.min() >= cfg.c0) and not F.floored.any()
        return {"min_d": float(F.d.min()), "c0": cfg.c0, "floored_nodes": int(F.floored.sum()),
                "ok": ok}
    _, pairs = _illumination_sets(cfg)
    F1, F2 = gram_schmidt_transfer(H, pairs, strict=False)
    r = admissibility(F1, F2, xy_fields(F1, F2, H), cfg.c0, cfg.y0)
    out = r.as_dict()
    out["ok"] = bool(r.ok and r.floored_nodes == 0)
    return out


__all__ = [
    "AdmissibilityError",
    "ExperimentConfig",
    "FieldResult",
    "ReconstructionReport",
    "StageError",
    "admissibility_report",
    "bundled_config_path",
    "bundled_configs",
    "compute_errors",
    "cross_section",
    "export_plot_data",
    "forward_data",
    "run_experiment",
    "write_report",
]
