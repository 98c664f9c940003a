"""Config-driven command line front end.

    kmsgreen COMMAND --config model.json [--out report.json] [--seed N]
                     [--tolerance TOL] [--samples N]

Exit status: 0 when every check passes, 2 when a check fails, 1 on a
configuration or runtime error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from pathlib import Path

import numpy as np

from . import __version__
from .cumulants import MAX_CUMULANT_ORDER, truncate
from .greens import (
    Mixture,
    QuasiFreeSpec,
    generalized_free,
    moment_by_differentiation,
    subset_moments,
)
from .kernel import (
    Argument,
    DeltaComb,
    MixedKernel,
    SpectralMeasure,
    ThermalCircle,
    covariance_scalar,
    matsubara_covariance,
    profile_from_record,
)
from .sampler import empirical_green, empirical_moment, k_statistic, sample_gaussian, sample_mixture
from .spectral import Dispersion, TestFunction, gaussian_packet, single_node
from .verify import (
    CorruptedKernel,
    invariance_audit,
    kernel_positivity,
    reflection_positivity,
    s_positivity,
)

CONFIG_SCHEMA = "kmsgreen.config/1"
REPORT_SCHEMA = "kmsgreen.report/1"
COMMANDS = (
    "kernel-eval",
    "green-eval",
    "schwinger",
    "cumulant",
    "audit-positivity",
    "audit-invariance",
    "sample-validate",
    "full-report",
)

RUN_DEFAULTS = {
    "seed": 0,
    "samples": 200_000,
    "tolerance": 1e-10,
    "invariance_tolerance": 1e-11,
    "derivative_tolerance": 1e-6,
    "matsubara_tolerance": 1e-8,
    "mc_sigmas": 4.0,
    "family_size": 6,
    "n_families": 3,
    "shifts": [0.25, 0.5, 1.0],
}


class ConfigError(ValueError):
    """Configuration problem; the message starts with the offending field."""


@dataclass
class ModelConfig:
    raw: dict
    circle: ThermalCircle
    kind: str
    model_type: str
    model: object
    measure: SpectralMeasure
    test_functions: dict
    points: list
    arguments: list
    run: dict = field(default_factory=dict)

    @property
    def kernel(self):
        if isinstance(self.model, Mixture):
            return MixedKernel(self.measure, self.kind, self.circle)
        return self.model.kernel


def _field(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        where = getattr(fn, "__qualname__", "")
        module = getattr(fn, "__module__", "")
        raise ConfigError(f"{path}: {type(exc).__name__} from {module}.{where}: {exc}") from exc


def _require(raw: dict, key: str, path: str = ""):
    if key not in raw:
        raise ConfigError(f"{path}{key}: missing required field")
    return raw[key]


def _test_function(name: str, spec: dict) -> TestFunction:
    path = f"test_functions.{name}"
    kind = spec.get("type", "node")
    if kind == "node":
        return _field(path, single_node, spec.get("value", 1.0), int(spec.get("dim", 1)),
                      float(spec.get("weight", 1.0)))
    if kind == "packet":
        return _field(path, gaussian_packet, int(spec.get("dim", 1)), spec.get("center", 0.0),
                      float(spec.get("width", 1.0)), spec.get("n_nodes"), spec.get("cutoff"))
    if kind == "nodes":
        return _field(path, TestFunction.from_record, spec)
    raise ConfigError(f"{path}.type: unknown test function type {kind!r}")


def parse_config(raw: dict) -> ModelConfig:
    """Validate a config mapping and build the module-level objects."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    schema = raw.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ConfigError(f"schema: expected {CONFIG_SCHEMA!r}, got {schema!r}")
    circle = _field("beta", ThermalCircle, _require(raw, "beta"))
    kind = raw.get("dispersion", "nonrelativistic")
    _field("dispersion", Dispersion, kind, 1.0)

    model_raw = _require(raw, "model")
    model_type = _require(model_raw, "type", "model.")
    tfs = {name: _test_function(name, spec) for name, spec in raw.get("test_functions", {}).items()}
    if not tfs:
        tfs = {"f0": single_node()}

    def lookup(name, path):
        if name not in tfs:
            raise ConfigError(f"{path}: unknown test function {name!r}")
        return tfs[name]

    if model_type == "free":
        mu = _require(model_raw, "mu", "model.")
        disp = _field("model.mu", Dispersion, kind, mu)
        measure = SpectralMeasure.dirac(disp.mu)
        mean = lookup(model_raw["mean"], "model.mean") if model_raw.get("mean") else None
        model = QuasiFreeSpec.free(disp, circle, mean)
    elif model_type in ("mixture", "generalized_free"):
        measure = _field("model.measure", SpectralMeasure.from_record, _require(model_raw, "measure", "model."))
        model = Mixture(measure, kind, circle) if model_type == "mixture" else generalized_free(measure, kind, circle)
    else:
        raise ConfigError(f"model.type: unknown model type {model_type!r}")

    points = []
    for i, p in enumerate(raw.get("points", [])):
        tau = p.get("tau")
        if not isinstance(tau, (int, float)) or not np.isfinite(tau):
            raise ConfigError(f"points[{i}].tau: must be a finite number")
        points.append((float(tau), lookup(p.get("f", "f0"), f"points[{i}].f")))
    if not points:
        raise ConfigError("points: at least one point is required")

    arguments = []
    for i, a in enumerate(raw.get("arguments", [])):
        terms = []
        for j, t in enumerate(_require(a, "terms", f"arguments[{i}].")):
            path = f"arguments[{i}].terms[{j}]"
            prof = _field(f"{path}.profile", profile_from_record, _require(t, "profile", path + "."))
            _field(f"{path}.profile", prof.check_on, circle)
            terms.append((prof, lookup(t.get("f", "f0"), f"{path}.f")))
        arguments.append(Argument(tuple(terms)))

    run = dict(RUN_DEFAULTS)
    unknown = set(raw.get("run", {})) - set(RUN_DEFAULTS)
    if unknown:
        raise ConfigError(f"run.{sorted(unknown)[0]}: unknown run parameter")
    run.update(raw.get("run", {}))
    return ModelConfig(raw, circle, kind, model_type, model, measure, tfs, points, arguments, run)


def load_config(path) -> ModelConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(raw)


# --------------------------------------------------------------------------
# commands


def _c(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _rng(cfg: ModelConfig, salt: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(cfg.run["seed"]), salt]))


def _point_scale(cfg: ModelConfig, points) -> float:
    diag = np.real(np.diag(cfg.kernel.point_matrix(points)))
    return float(np.prod(np.sqrt(np.abs(diag))))


def cmd_kernel_eval(cfg: ModelConfig) -> tuple[dict, dict]:
    mat = cfg.kernel.point_matrix(cfg.points)
    tol = cfg.run["matsubara_tolerance"]
    worst = 0.0
    for mu, _ in cfg.measure.atoms:
        h = Dispersion(cfg.kind, mu)(np.zeros(1))
        for (ti, _), (tj, _) in combinations_with_replacement(cfg.points, 2):
            closed = covariance_scalar(float(h), ti - tj, cfg.circle)
            series = matsubara_covariance(float(h), ti - tj, cfg.circle.beta, resum_order=24, dps=150)
            worst = max(worst, abs(closed - series) / closed)
    results = {
        "kernel_matrix": [[_c(z) for z in row] for row in mat],
        "matsubara_max_rel_error": worst,
    }
    checks = {
        "hermitian": bool(np.allclose(mat, mat.conj().T, rtol=0, atol=1e-12 * np.max(np.abs(mat)))),
        "positive_diagonal": bool(np.all(np.real(np.diag(mat)) > 0)),
        "matsubara_crosscheck": worst < tol,
    }
    return results, checks


def cmd_green_eval(cfg: ModelConfig) -> tuple[dict, dict]:
    model = cfg.model
    multi = model.multitime(cfg.points)
    results = {"multitime": _c(multi)}
    values = [model.green(a) for a in cfg.arguments]
    results["arguments"] = [_c(v) for v in values]
    zero = model.green(Argument())
    checks = {
        "normalized": abs(zero - 1) < 1e-15,
        "bounded_by_one": all(abs(v) <= 1 + 1e-14 for v in values + [multi]),
    }
    if isinstance(model, Mixture):
        gen = generalized_free(cfg.measure, cfg.kind, cfg.circle)
        jensen = [model.green(a).real >= gen.green(a).real - 1e-15 for a in cfg.arguments]
        results["generalized_free"] = [_c(gen.green(a)) for a in cfg.arguments]
        checks["jensen"] = all(jensen)
    return results, checks


def cmd_schwinger(cfg: ModelConfig) -> tuple[dict, dict]:
    pts = cfg.points
    table = subset_moments(cfg.model, pts)
    full = table[frozenset(range(len(pts)))]
    results = {
        "moment": _c(full),
        "subset_moments": {",".join(map(str, sorted(k))): _c(v) for k, v in sorted(table.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))},
    }
    checks = {}
    if len(pts) <= 4:
        fd = moment_by_differentiation(cfg.model, pts, step=0.05, levels=4)
        scale = max(abs(full), 1e-3 * _point_scale(cfg, pts))
        err = abs(fd - full) / scale
        results["derivative_moment"] = _c(fd)
        results["derivative_rel_error"] = err
        checks["derivative_consistency"] = err < cfg.run["derivative_tolerance"]
    return results, checks


def _expect_non_quasi_free(cfg: ModelConfig) -> bool:
    return isinstance(cfg.model, Mixture) and len(set(cfg.measure.mus)) > 1


def cmd_cumulant(cfg: ModelConfig) -> tuple[dict, dict]:
    pts = cfg.points
    n = len(pts)
    if n > MAX_CUMULANT_ORDER:
        raise ConfigError(f"points: cumulants need at most {MAX_CUMULANT_ORDER} points, got {n}")
    tol = cfg.run["tolerance"]
    table = subset_moments(cfg.model, pts)
    value = truncate(table, n)
    results = {"order": n, "cumulant": _c(value)}
    witnesses = [abs(value) / max(_point_scale(cfg, pts), 1e-300)] if n > 2 else []
    if n >= 4:
        four = pts[:4]
        k4 = truncate(subset_moments(cfg.model, four), 4)
        results["fourth_cumulant"] = float(k4.real)
        witnesses.append(abs(k4) / max(_point_scale(cfg, four), 1e-300))
    verdict = "non_quasi_free" if any(w > tol for w in witnesses) else "quasi_free"
    results["verdict"] = verdict
    expected = "non_quasi_free" if _expect_non_quasi_free(cfg) and n >= 4 else "quasi_free"
    results["expected_verdict"] = expected
    return results, {"verdict_matches_theory": verdict == expected}


def _random_family(cfg: ModelConfig, rng, size: int, half: bool) -> list:
    names = sorted(cfg.test_functions)
    beta = cfg.circle.beta
    family = []
    for _ in range(size):
        terms = []
        for _ in range(int(rng.integers(1, 3))):
            f = cfg.test_functions[names[int(rng.integers(len(names)))]]
            m = int(rng.integers(1, 3))
            taus = rng.uniform(0, beta / 2, m) if half else rng.uniform(-beta / 2, beta / 2, m)
            terms.append((DeltaComb(taus, rng.normal(size=m)), f))
        family.append(Argument(tuple(terms)))
    return family


def cmd_audit_positivity(cfg: ModelConfig) -> tuple[dict, dict]:
    tol = cfg.run["tolerance"]
    rng = _rng(cfg, 1)
    reports = {"s_positivity": [], "reflection_positivity": [], "kernel_s": [], "kernel_r": []}
    for _ in range(int(cfg.run["n_families"])):
        fam = _random_family(cfg, rng, int(cfg.run["family_size"]), half=False)
        half = _random_family(cfg, rng, int(cfg.run["family_size"]), half=True)
        reports["s_positivity"].append(s_positivity(cfg.model, fam, tol))
        reports["reflection_positivity"].append(reflection_positivity(cfg.model, half, cfg.circle, tol))
        reports["kernel_s"].append(kernel_positivity(cfg.kernel, fam, tol))
        reports["kernel_r"].append(kernel_positivity(cfg.kernel, half, tol, reflect=True))
    f = cfg.points[0][1]
    control_family = Argument.sharp([(0.01 * i, f) for i in range(4)], cfg.circle)
    control = kernel_positivity(CorruptedKernel(cfg.kernel), [Argument((t,)) for t in control_family.terms], tol)
    results = {k: [r.to_record() for r in v] for k, v in reports.items()}
    results["negative_control"] = control.to_record()
    checks = {k: all(r.psd for r in v) for k, v in reports.items()}
    checks["negative_control_indefinite"] = control.verdict == "indefinite"
    return results, checks


def cmd_audit_invariance(cfg: ModelConfig) -> tuple[dict, dict]:
    rng = _rng(cfg, 2)
    shifts = [float(s) for s in cfg.run["shifts"]] + list(rng.uniform(-cfg.circle.beta, cfg.circle.beta, 5))
    rep = invariance_audit(cfg.model, cfg.points, shifts, cfg.circle, cfg.run["invariance_tolerance"])
    return rep.to_record(), {"invariance": rep.passed}


def cmd_sample_validate(cfg: ModelConfig) -> tuple[dict, dict]:
    N = int(cfg.run["samples"])
    seed = int(cfg.run["seed"])
    sig = float(cfg.run["mc_sigmas"])
    pts = cfg.points[:3]
    model = cfg.model
    if isinstance(model, Mixture):
        batch = sample_mixture(cfg.measure, cfg.kind, cfg.circle, pts, N, seed)
    elif model.mean is None:
        batch = sample_gaussian(model, pts, N, seed)
    else:
        raise ConfigError("model.mean: sample-validate supports centred models only")
    results, checks = {"N": N, "seed": seed, "sigmas": sig}, {}
    n = len(pts)
    chars = {}
    for label, c in (("e1", np.eye(n)[0]), ("ones", np.ones(n))):
        est = empirical_green(batch, c)
        exact = model.multitime([(t, ci * f) for (t, f), ci in zip(pts, c)])
        chars[label] = {"estimate": est.to_record(), "exact": _c(exact)}
        checks[f"characteristic_{label}"] = est.within(exact, sig)
    results["characteristic"] = chars
    moments = {}
    ok = True
    for order in range(1, 5):
        for idx in combinations_with_replacement(range(n), order):
            est = empirical_moment(batch, idx)
            exact = model.moment([pts[i] for i in idx])
            moments[",".join(map(str, idx))] = {"estimate": est.to_record(), "exact": _c(exact)}
            ok &= est.within(exact, sig)
    results["moments"] = moments
    checks["moments"] = bool(ok)
    k4 = k_statistic(batch, 0, 4)
    exact_k4 = truncate(subset_moments(model, [pts[0]] * 4), 4)
    results["k4"] = {"estimate": k4.to_record(), "exact": float(exact_k4.real)}
    checks["k4"] = k4.within(exact_k4, sig)
    if batch.atoms is not None:
        results["atom_frequencies"] = [float(np.mean(batch.atoms == a)) for a in range(len(cfg.measure.atoms))]
    return results, checks


HANDLERS = {
    "kernel-eval": cmd_kernel_eval,
    "green-eval": cmd_green_eval,
    "schwinger": cmd_schwinger,
    "cumulant": cmd_cumulant,
    "audit-positivity": cmd_audit_positivity,
    "audit-invariance": cmd_audit_invariance,
    "sample-validate": cmd_sample_validate,
}


def run(command: str, cfg: ModelConfig) -> dict:
    """Execute ``command`` and return the report mapping."""
    if command not in COMMANDS:
        raise ConfigError(f"command: unknown command {command!r}")
    names = [c for c in COMMANDS if c != "full-report"] if command == "full-report" else [command]
    results, checks = {}, {}
    for name in names:
        r, c = HANDLERS[name](cfg)
        results[name] = r
        checks.update({f"{name}.{k}": bool(v) for k, v in c.items()})
    tolerances = {k: cfg.run[k] for k in ("tolerance", "invariance_tolerance", "derivative_tolerance",
                                           "matsubara_tolerance", "mc_sigmas")}
    return {
        "schema": REPORT_SCHEMA,
        "command": command,
        "status": "pass" if all(checks.values()) else "fail",
        "checks": checks,
        "tolerances": tolerances,
        "results": results,
        "provenance": {
            "version": __version__,
            "config": cfg.raw,
            "run": cfg.run,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        },
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kmsgreen", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path, help="model config (JSON)")
    parser.add_argument("--out", type=Path, help="report path; stdout if omitted")
    parser.add_argument("--seed", type=int, help="override run.seed (unsigned 64-bit)")
    parser.add_argument("--tolerance", type=float, help="override run.tolerance")
    parser.add_argument("--samples", type=int, help="override run.samples")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed: must be an unsigned 64-bit integer")
            cfg.run["seed"] = args.seed
        if args.tolerance is not None:
            cfg.run["tolerance"] = args.tolerance
        if args.samples is not None:
            cfg.run["samples"] = args.samples
        report = run(args.command, cfg)
    except ConfigError as exc:
        print(f"error: ConfigError: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text = dumps(report)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if report["status"] == "pass" else 2


if __name__ == "__main__":
    sys.exit(main())
