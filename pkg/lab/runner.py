"""
Run configs, dispatch and result records for every lab subcommand.

A run config is JSON validated by pydantic before any computation. Every run
produces a body (CSV, JSON lines or JSON) and a verdict; both depend only on
the canonical config, so identical (config, seed, workers) give identical bytes.
"""

import hashlib
import json
import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from config import ARTIFACT_VERSION, DISTANCE_TOLERANCE, MECKE_STRATA, SCHEMA_VERSION, SIGMA_GATE
from core.models import ConfigurationFile, WindowSpec
from core.point_config import configuration_from_model, configuration_to_json
from lab import cylinder, diffusion_lab, samplers, transport
from lab.builtins import (
    CylinderSpec,
    DiffusionSpecModel,
    EventSpec,
    IntensitySpec,
    LaplaceSpec,
    LipschitzSpec,
    MeckeSpec,
    ModelSpec,
    PoissonSpec,
    list_builtins,
)
from lab.parallel import spawn_generators

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    "sample",
    "distance",
    "mecke-check",
    "laplace-check",
    "tightness",
    "energy",
    "semigroup",
    "varadhan",
    "gaussian-bound",
    "rademacher",
    "stationarity",
    "list-builtins",
)


############################################
#                                          #
#   Run configs                            #
#                                          #
############################################


class _RunBase(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = SCHEMA_VERSION
    seed: int = Field(0, ge=0, le=2**64 - 1, description="Root seed of every random stream")
    workers: int = Field(1, ge=1, description="Number of worker chunks; part of the reproducibility key")


class SampleRun(_RunBase):
    subcommand: Literal["sample"] = "sample"
    model: ModelSpec
    n_samples: int = Field(ge=1)


class DistanceRun(_RunBase):
    subcommand: Literal["distance"] = "distance"
    gamma: ConfigurationFile
    eta: ConfigurationFile
    oracle: bool = Field(False, description="Also compare with exhaustive enumeration")


class MeckeRun(_RunBase):
    subcommand: Literal["mecke-check"] = "mecke-check"
    m: IntensitySpec
    functionals: list[MeckeSpec] = Field(min_length=1)
    n_samples: int = Field(ge=2)
    strata: int = Field(MECKE_STRATA, ge=1)


class LaplaceRun(_RunBase):
    subcommand: Literal["laplace-check"] = "laplace-check"
    m: IntensitySpec
    functions: list[LaplaceSpec] = Field(min_length=1)
    n_samples: int = Field(ge=2)
    rel_tolerance: float = Field(0.02, gt=0)


class TightnessRun(_RunBase):
    subcommand: Literal["tightness"] = "tightness"
    model: ModelSpec
    region: WindowSpec
    n_max: int = Field(ge=1)
    n_samples: int = Field(ge=1)


class EnergyRun(_RunBase):
    subcommand: Literal["energy"] = "energy"
    u: CylinderSpec
    v: CylinderSpec | None = None
    model: ModelSpec
    n_samples: int = Field(ge=2)


class SemigroupRun(_RunBase):
    subcommand: Literal["semigroup"] = "semigroup"
    diffusion: DiffusionSpecModel
    xi: EventSpec
    lam: EventSpec
    t: float = Field(gt=0)
    n_paths: int = Field(ge=1)
    mode: Literal["plain", "conditioned"] = "plain"
    check_symmetry: bool = True


class VaradhanRun(_RunBase):
    subcommand: Literal["varadhan"] = "varadhan"
    diffusion: DiffusionSpecModel
    xi: EventSpec
    lam: EventSpec
    t_grid: list[float] = Field(min_length=2)
    n_paths: int = Field(ge=1)
    mode: Literal["plain", "conditioned"] = "plain"
    basis: Literal["linear", "gaussian_tail"] = "linear"
    tolerance: float = Field(0.1, gt=0)
    reference: float | None = Field(None, ge=0, description="Overrides the sampled transport reference")
    reference_samples: int = Field(2000, ge=1)


class GaussianBoundRun(_RunBase):
    subcommand: Literal["gaussian-bound"] = "gaussian-bound"
    diffusion: DiffusionSpecModel
    lam1: EventSpec
    lam2: EventSpec
    t_grid: list[float] = Field(min_length=1)
    n_paths: int = Field(ge=1)


class RademacherRun(_RunBase):
    subcommand: Literal["rademacher"] = "rademacher"
    diffusion: DiffusionSpecModel
    u: LipschitzSpec
    n_pairs: int = Field(ge=1)
    n_configs: int = Field(50, ge=1)
    n_paths: int = Field(10_000, ge=2)
    t: float = Field(0.002, gt=0)


class StationarityRun(_RunBase):
    subcommand: Literal["stationarity"] = "stationarity"
    diffusion: DiffusionSpecModel
    horizon: float = Field(1.0, ge=0)
    windows: list[WindowSpec] = Field(min_length=1)
    n_chains: int = Field(ge=2)
    test: Literal["chi2", "ks"] = "chi2"


class ListBuiltinsRun(_RunBase):
    subcommand: Literal["list-builtins"] = "list-builtins"


RunConfig = Annotated[
    Union[
        SampleRun,
        DistanceRun,
        MeckeRun,
        LaplaceRun,
        TightnessRun,
        EnergyRun,
        SemigroupRun,
        VaradhanRun,
        GaussianBoundRun,
        RademacherRun,
        StationarityRun,
        ListBuiltinsRun,
    ],
    Field(discriminator="subcommand"),
]

_RUN_CONFIG_ADAPTER = TypeAdapter(RunConfig)


def parse_run_config(data: dict | str | bytes) -> BaseModel:
    """Validate a run config from a dict or JSON text; raises pydantic.ValidationError."""
    if isinstance(data, (str, bytes)):
        return _RUN_CONFIG_ADAPTER.validate_json(data)
    return _RUN_CONFIG_ADAPTER.validate_python(data)


def load_run_config(file_path: str | Path, overrides: dict[str, Any] | None = None) -> BaseModel:
    """Read a JSON run config, apply top-level overrides (seed, workers, subcommand) and validate."""
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"Run config not found: {file_path}")
    data = json.loads(file_path.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"Run config must be a JSON object, got {type(data).__name__}")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return parse_run_config(data)


############################################
#                                          #
#   Canonical JSON and result records      #
#                                          #
############################################


def jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become "inf", "-inf" or "nan"."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(jsonable(value), sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_digest(config: BaseModel) -> str:
    """sha256 of the canonical JSON of the validated config."""
    return hashlib.sha256(canonical_json(config.model_dump(mode="json")).encode("utf-8")).hexdigest()


def rows_to_csv(rows: list[dict]) -> str:
    return pd.DataFrame(rows).to_csv(index=False, float_format="%.17g", lineterminator="\n")


@dataclass(frozen=True)
class ResultRecord:
    subcommand: str
    digest: str
    config: dict
    body: str
    body_format: Literal["csv", "jsonl", "json"]
    passed: bool
    details: dict
    artifact_version: str = ARTIFACT_VERSION
    wall_time: float = field(default=0.0, compare=False)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 2

    def verdict(self) -> dict:
        return {
            "pass": self.passed,
            "details": self.details,
            "subcommand": self.subcommand,
            "digest": self.digest,
            "artifact_version": self.artifact_version,
            "config": self.config,
        }

    def verdict_json(self) -> str:
        return canonical_json(self.verdict())


def write_record(record: ResultRecord, out_path: str | Path) -> Path:
    """Write the body to out_path and the verdict next to it; returns the verdict path."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(record.body, encoding="utf-8")
    verdict_path = out_path.with_name(out_path.name + ".verdict.json")
    verdict_path.write_text(record.verdict_json() + "\n", encoding="utf-8")
    return verdict_path


############################################
#                                          #
#   Subcommand handlers                    #
#                                          #
############################################

# (body, body_format, passed, details)
Outcome = tuple[str, str, bool, dict]


def _run_sample(cfg: SampleRun) -> Outcome:
    samples = samplers.sample_many(cfg.model.build(), cfg.n_samples, cfg.seed, cfg.workers)
    body = "".join(configuration_to_json(gamma) + "\n" for gamma in samples)
    masses = [gamma.mass for gamma in samples]
    return body, "jsonl", True, {"n_samples": len(samples), "mean_mass": float(np.mean(masses))}


def _run_distance(cfg: DistanceRun) -> Outcome:
    gamma, eta = configuration_from_model(cfg.gamma), configuration_from_model(cfg.eta)
    d = transport.d_upsilon(gamma, eta)
    matching = transport.optimal_matching(gamma, eta).to_json() if d.is_finite else None
    details: dict = {"d": d.to_json()}
    passed = True
    if cfg.oracle:
        oracle = transport.brute_force_distance(gamma, eta)
        details["oracle"] = oracle.to_json()
        passed = (not d.is_finite and not oracle.is_finite) or (
            d.is_finite and oracle.is_finite and abs(d.value - oracle.value) <= DISTANCE_TOLERANCE
        )
    return canonical_json({"d": d.to_json(), "matching": matching}) + "\n", "json", passed, details


def _run_mecke(cfg: MeckeRun) -> Outcome:
    m = cfg.m.build()
    rows = []
    for spec, g in zip(cfg.functionals, spawn_generators(cfg.seed, len(cfg.functionals))):
        u = spec.build()
        check = samplers.check_mecke(m, u, cfg.n_samples, g, cfg.workers, cfg.strata)
        rows.append({"functional": u.name, **check.to_dict(), "passed": check.passed(SIGMA_GATE)})
    passed = all(r["passed"] for r in rows)
    return rows_to_csv(rows), "csv", passed, {"failed": [r["functional"] for r in rows if not r["passed"]]}


def _run_laplace(cfg: LaplaceRun) -> Outcome:
    m = cfg.m.build()
    rows = []
    for spec, g in zip(cfg.functions, spawn_generators(cfg.seed, len(cfg.functions))):
        f = spec.build()
        check = samplers.check_laplace(m, f, cfg.n_samples, g, cfg.workers)
        rel = abs(check.lhs - check.rhs) / check.rhs
        ok = rel <= cfg.rel_tolerance or check.passed(SIGMA_GATE)
        rows.append({"function": f.name, **check.to_dict(), "rel_error": rel, "passed": ok})
    passed = all(r["passed"] for r in rows)
    return rows_to_csv(rows), "csv", passed, {"failed": [r["function"] for r in rows if not r["passed"]]}


def _run_tightness(cfg: TightnessRun) -> Outcome:
    rows = samplers.tightness_profile(cfg.model.build(), cfg.region.build(), cfg.n_max, cfg.n_samples, cfg.seed, cfg.workers)
    failed = []
    for row in rows:
        if row.exact is None or row.n == 0:
            continue
        p = row.exact / row.n
        se = max(row.stderr, row.n * math.sqrt(p * (1 - p) / cfg.n_samples))
        if abs(row.empirical - row.exact) > SIGMA_GATE * se + 1e-12:
            failed.append(row.n)
    return rows_to_csv([r.to_dict() for r in rows]), "csv", not failed, {"failed_n": failed}


def _energy_reference(cfg: EnergyRun, u: cylinder.CylinderFunction) -> float | None:
    """w^2 * integral of |grad f|^2 dm for u = w * (f*gamma) under a Poisson model."""
    if cfg.v is not None or not isinstance(cfg.model, PoissonSpec) or u.k != 1 or u.outer.name != "linear":
        return None
    w = float(u.outer.grad(np.zeros(1))[0])
    return w**2 * cylinder.base_energy_quadrature(u.inner[0], cfg.model.m.build())


def _run_energy(cfg: EnergyRun) -> Outcome:
    u = cfg.u.build()
    v = cfg.v.build() if cfg.v is not None else u
    est = cylinder.energy_monte_carlo(u, v, cfg.model.build(), cfg.n_samples, cfg.seed, cfg.workers)
    reference = _energy_reference(cfg, u)
    passed = reference is None or abs(est.estimate - reference) <= SIGMA_GATE * est.stderr + 1e-3 * abs(reference)
    row = {**est.to_dict(), "reference": reference}
    return rows_to_csv([row]), "csv", passed, {"estimate": est.estimate, "reference": reference}


def _run_semigroup(cfg: SemigroupRun) -> Outcome:
    spec = cfg.diffusion.build(cfg.t)
    xi, lam = cfg.xi.build(), cfg.lam.build()
    g_forward, g_backward = spawn_generators(cfg.seed, 2)
    forward = diffusion_lab.semigroup_estimate(xi, lam, cfg.t, spec, cfg.n_paths, g_forward, cfg.workers, cfg.mode)
    rows = [{"direction": "xi_from_lambda", **forward.to_dict()}]
    details: dict = {"estimate": forward.estimate, "stderr": forward.stderr}
    passed = True
    if cfg.check_symmetry:
        backward = diffusion_lab.semigroup_estimate(lam, xi, cfg.t, spec, cfg.n_paths, g_backward, cfg.workers, cfg.mode)
        rows.append({"direction": "lambda_from_xi", **backward.to_dict()})
        gap = abs(forward.estimate - backward.estimate)
        passed = gap <= SIGMA_GATE * math.hypot(forward.stderr, backward.stderr)
        details["symmetry_gap"] = gap
    return rows_to_csv(rows), "csv", passed, details


def _run_varadhan(cfg: VaradhanRun) -> Outcome:
    spec = cfg.diffusion.build(min(cfg.t_grid))
    report = diffusion_lab.varadhan_profile(
        cfg.xi.build(),
        cfg.lam.build(),
        cfg.t_grid,
        spec,
        cfg.n_paths,
        cfg.seed,
        cfg.workers,
        cfg.mode,
        cfg.basis,
        cfg.reference_samples,
    )
    if cfg.reference is not None:
        report = replace(report, reference=cfg.reference)
    details = {
        "intercept": report.intercept,
        "intercept_stderr": report.intercept_stderr,
        "reference": report.reference,
        "basis": report.basis,
        "xi_open": report.xi_open,
        "informational": report.reference is None or not report.xi_open,
    }
    passed = not report.xi_open or report.passed(cfg.tolerance)
    return rows_to_csv([r.to_dict() for r in report.rows]), "csv", passed, details


def _run_gaussian_bound(cfg: GaussianBoundRun) -> Outcome:
    spec = cfg.diffusion.build(min(cfg.t_grid))
    report = diffusion_lab.gaussian_bound_check(
        cfg.lam1.build(), cfg.lam2.build(), cfg.t_grid, spec, cfg.n_paths, cfg.seed, cfg.workers
    )
    details = {
        "distance_lower_bound": report.distance_lower_bound,
        "mass_1": report.mass_1,
        "mass_2": report.mass_2,
        "violations": [row.t for row in report.rows if row.violated],
    }
    return rows_to_csv([r.to_dict() for r in report.rows]), "csv", report.passed, details


def _run_rademacher(cfg: RademacherRun) -> Outcome:
    spec = cfg.diffusion.build(cfg.t)
    report = diffusion_lab.rademacher_check(
        cfg.u.build(), spec, cfg.n_pairs, cfg.seed, cfg.workers, cfg.n_configs, cfg.n_paths, cfg.t
    )
    rows = [{"config": i, "square_field": value} for i, value in enumerate(report.square_fields)]
    return rows_to_csv(rows), "csv", report.passed, report.to_dict()


def _run_stationarity(cfg: StationarityRun) -> Outcome:
    spec = cfg.diffusion.build()
    windows = [w.build() for w in cfg.windows]
    report = diffusion_lab.stationarity_test(spec, cfg.horizon, windows, cfg.n_chains, cfg.seed, cfg.workers, cfg.test)
    details = {"min_p_adjusted": min(row.p_adjusted for row in report.rows), "significance": report.significance}
    return rows_to_csv([r.to_dict() for r in report.rows]), "csv", report.passed, details


def _run_list_builtins(cfg: ListBuiltinsRun) -> Outcome:
    catalog = list_builtins()
    return canonical_json(catalog) + "\n", "json", True, {"categories": sorted(catalog)}


HANDLERS: dict[str, Callable[[Any], Outcome]] = {
    "sample": _run_sample,
    "distance": _run_distance,
    "mecke-check": _run_mecke,
    "laplace-check": _run_laplace,
    "tightness": _run_tightness,
    "energy": _run_energy,
    "semigroup": _run_semigroup,
    "varadhan": _run_varadhan,
    "gaussian-bound": _run_gaussian_bound,
    "rademacher": _run_rademacher,
    "stationarity": _run_stationarity,
    "list-builtins": _run_list_builtins,
}


def run(config: BaseModel | dict) -> ResultRecord:
    """Validate (if needed) and dispatch a run config."""
    if not isinstance(config, BaseModel):
        config = parse_run_config(config)
    subcommand = config.subcommand
    logger.info("Starting %s (seed=%d, workers=%d)", subcommand, config.seed, config.workers)
    start = time.perf_counter()
    body, body_format, passed, details = HANDLERS[subcommand](config)
    wall_time = time.perf_counter() - start
    logger.info("Finished %s in %.2fs: %s", subcommand, wall_time, "pass" if passed else "fail")
    return ResultRecord(
        subcommand=subcommand,
        digest=config_digest(config),
        config=config.model_dump(mode="json"),
        body=body,
        body_format=body_format,
        passed=bool(passed),
        details=jsonable(details),
        wall_time=wall_time,
    )
