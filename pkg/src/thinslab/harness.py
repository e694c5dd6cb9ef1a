"""Experiment harness: scenario registry, config resolution, artifact writers.

A scenario bundles a canned symbol (or one-way medium) with default grid,
study and gate settings.  ``run`` resolves configuration in three layers
(scenario defaults, then a flat key=value config file, then CLI overrides,
last writer wins), executes the experiment, and writes deterministic
artifacts into the output directory:

* ``convergence.csv`` / ``convergence.json``  - study errors and fit,
* ``norm_sweep.csv``                          - H^s slab norms over a thickness sweep,
* ``properties.xml``                          - JUnit-style property-suite summary,
* ``energy_partition.csv``, ``phase_errors.csv``, ``snapshot_*.tslb``
                                              - one-way demo artifacts,
* ``manifest.json``                           - config echo, version, timings, status.

Everything except the manifest (which carries wall-clock timings) is
byte-identical across runs with the same config, seed and build.  Exit
codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 an acceptance gate was violated.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, fields, replace
from xml.etree import ElementTree as ET

import numpy as np

from . import __version__
from . import ansatz, oneway, propagator, spectral, symbols
from .ansatz import ExactMultiplier, FineStep, Subdivision
from .oneway import ApertureConfig
from .propagator import Averaged, Frozen, NonConvergenceError, SlabSpec
from .spectral import Field, Grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_GATE = 4


class ConfigError(ValueError):
    """Bad scenario name, config key, or config value."""


class GateViolation(RuntimeError):
    """An acceptance gate failed; message lists the violations."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = ""
    output_dir: str = ""
    n_points: int = 256
    period: float = 2.0 * np.pi
    s: float = 1.0
    Z: float = 1.0
    Ns: tuple = (8, 16, 32, 64)
    variant: str = "frozen"
    reference: str = "auto"
    n_ref: int = 0               # 0 = auto (8x largest study N)
    seed: int = 0
    delta_max: float = propagator.DELTA_MAX_DEFAULT
    norm_points: int = 128
    quadrature_order: int = 0    # 0 = auto from the symbol's z-bandwidth
    compare_variants: bool = False
    damping_scale: float = 2.0
    tau: float = 32.0
    theta1_deg: float = 15.0
    theta2_deg: float = 50.0
    n_slabs: int = 64
    snapshot_every: int = 8
    modes: tuple = (0, 2, 5)


def _parse_int_tuple(raw: str) -> tuple:
    try:
        vals = tuple(int(p) for p in str(raw).replace(" ", "").split(",") if p != "")
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {raw!r}")
    if not vals:
        raise ConfigError(f"expected a non-empty integer list, got {raw!r}")
    return vals


def _parse_bool(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    low = str(raw).strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _coerce(name: str, raw):
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in kinds:
        raise ConfigError(f"unknown config key {name!r}")
    current = getattr(ExperimentConfig(), name)
    try:
        if isinstance(current, bool):
            return _parse_bool(raw)
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, tuple):
            return _parse_int_tuple(raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name!r}: {raw!r} ({exc})")


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; later keys win."""
    out = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = stripped.partition("=")
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    return out


def resolve_config(scenario: str, file_map: dict | None = None,
                   overrides: dict | None = None) -> ExperimentConfig:
    """Layer scenario defaults, config file, and CLI overrides (last wins)."""
    entry = get_scenario(scenario)
    cfg = ExperimentConfig(scenario=scenario, output_dir=f"thinslab-out/{scenario}")
    cfg = replace(cfg, **entry.defaults)
    for layer in (file_map or {}), (overrides or {}):
        coerced = {}
        for key, raw in layer.items():
            if key == "scenario":
                continue
            coerced[key] = _coerce(key, raw)
        cfg = replace(cfg, **coerced)
    if any(n < 1 for n in cfg.Ns) or list(cfg.Ns) != sorted(set(cfg.Ns)):
        raise ConfigError(f"Ns must be strictly increasing positive ints, got {cfg.Ns}")
    if cfg.variant not in ("frozen", "averaged"):
        raise ConfigError(f"variant must be frozen|averaged, got {cfg.variant!r}")
    return cfg


def config_echo(cfg: ExperimentConfig) -> dict:
    echo = {}
    for f in fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        echo[f.name] = list(v) if isinstance(v, tuple) else v
    return echo


# ---------------------------------------------------------------------------
# scenario registry


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str            # "evolution" | "oneway"
    description: str
    regularity: str
    defaults: dict = field(default_factory=dict)
    gates: dict = field(default_factory=dict)


_SCENARIOS: dict = {}


def _register(sc: Scenario):
    _SCENARIOS[sc.name] = sc


_register(Scenario(
    name="translation", kind="evolution",
    description="constant drift; averaged composition reproduces the exact multiplier",
    regularity="lipschitz",
    defaults={"variant": "averaged", "reference": "exact", "Ns": (1, 8, 64),
              "delta_max": 1.0},
    gates={"exact_tol": 1e-10}))

_register(Scenario(
    name="halfwave", kind="evolution",
    description="half-wave multiplier with constant absorption",
    regularity="lipschitz",
    defaults={"variant": "averaged", "reference": "exact", "Ns": (1, 8, 64),
              "delta_max": 1.0},
    gates={"exact_tol": 1e-10}))

_register(Scenario(
    name="damped", kind="evolution",
    description="pure damping multiplier; contractive on L2",
    regularity="lipschitz",
    defaults={"variant": "averaged", "reference": "exact", "Ns": (1, 8, 64),
              "delta_max": 1.0},
    gates={"exact_tol": 1e-10}))

_register(Scenario(
    name="varspeed", kind="evolution",
    description="laterally varying speed; first-order convergence expected",
    regularity="lipschitz",
    defaults={"variant": "frozen", "reference": "auto", "Ns": (8, 16, 32, 64, 128),
              "n_points": 256},
    gates={"slope_min": 0.45, "monotone_tol": 0.05}))

_register(Scenario(
    name="varspeed-z", kind="evolution",
    description="laterally varying speed with linear z drift",
    regularity="lipschitz",
    defaults={"variant": "frozen", "reference": "auto", "Ns": (8, 16, 32, 64),
              "n_points": 128},
    gates={"slope_min": 0.45, "monotone_tol": 0.05}))

_register(Scenario(
    name="damped-varspeed", kind="evolution",
    description="variable speed plus variable angular damping",
    regularity="lipschitz",
    defaults={"variant": "frozen", "reference": "auto", "Ns": (8, 16, 32, 64),
              "n_points": 128},
    gates={"slope_min": 0.45, "monotone_tol": 0.05}))

_register(Scenario(
    name="hoelder-z", kind="evolution",
    description="rough z modulation; slab averaging beats freezing",
    regularity="hoelder(0.5)",
    defaults={"variant": "frozen", "reference": "auto", "Ns": (8, 16, 32, 64),
              "n_points": 128, "n_ref": 1024, "compare_variants": True},
    gates={"slope_min": 0.2, "averaged_margin": 0.9}))

_register(Scenario(
    name="oneway-homogeneous", kind="oneway",
    description="one-way continuation in a constant medium; per-mode phase check",
    regularity="lipschitz",
    defaults={"damping_scale": 0.0, "n_points": 256, "n_slabs": 64},
    gates={"phase_tol": 1e-9}))

_register(Scenario(
    name="oneway-lens", kind="oneway",
    description="one-way continuation through a lateral lens with angular damping",
    regularity="lipschitz",
    defaults={"damping_scale": 2.0, "n_points": 256, "n_slabs": 64},
    gates={"suppression_min": 10.0, "preserve_tol": 0.05}))


def get_scenario(name: str) -> Scenario:
    try:
        return _SCENARIOS[name]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {name!r}; available: {', '.join(_SCENARIOS)}")


def list_scenarios() -> str:
    """Stable, deterministic table of registered scenarios."""
    rows = [("name", "kind", "z-regularity", "description")]
    for sc in _SCENARIOS.values():
        rows.append((sc.name, sc.kind, sc.regularity, sc.description))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(col.ljust(widths[j]) if j < 3 else col
                               for j, col in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths) + "  " + "-" * 11)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# writers


def write_junit(path, suite_name: str, cases) -> None:
    """cases: iterable of (name, ok, message); no timestamps, deterministic."""
    cases = list(cases)
    suite = ET.Element("testsuite", {
        "name": suite_name,
        "tests": str(len(cases)),
        "failures": str(sum(1 for _, ok, _ in cases if not ok)),
    })
    for name, ok, message in cases:
        case = ET.SubElement(suite, "testcase", {"classname": suite_name, "name": name})
        if not ok:
            ET.SubElement(case, "failure", {"message": message})
    tree = ET.ElementTree(suite)
    ET.indent(tree)
    tree.write(path, encoding="unicode", xml_declaration=True)
    with open(path, "a") as fh:
        fh.write("\n")


def _write_manifest(out_dir, cfg, status, error, timings, outputs) -> None:
    manifest = {
        "version": __version__,
        "scenario": cfg.scenario,
        "config": config_echo(cfg),
        "status": status,
        "error": error,
        "timings": {k: round(v, 6) for k, v in timings.items()},
        "outputs": sorted(outputs),
        "threads": ansatz._thread_count(),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# experiment pieces


def _variant_object(cfg: ExperimentConfig):
    if cfg.variant == "averaged":
        return Averaged(cfg.quadrature_order or None)
    return Frozen()


def _reference_object(cfg: ExperimentConfig, spec):
    ref = cfg.reference
    if ref == "auto":
        ref = "exact" if spec.x_independent else "finestep"
    if ref == "exact":
        return ExactMultiplier()
    if ref == "finestep" or ref.startswith("finestep:"):
        n_ref = cfg.n_ref
        if ref.startswith("finestep:"):
            n_ref = int(ref.split(":", 1)[1])
        if n_ref <= 0:
            n_ref = 8 * max(cfg.Ns)
        return FineStep(n_ref)
    raise ConfigError(f"unknown reference mode {cfg.reference!r}")


def norm_sweep(spec, grid: Grid, delta_exponents=range(4, 10), s_values=(0.0, 1.0),
               variant=Frozen(), seed: int = 0):
    """H^s operator norms of one slab over a thickness sweep.

    Returns rows (s, delta, norm, excess_rate) with excess_rate =
    (norm - 1)/delta, the quantity the stability estimate bounds.
    """
    rows = []
    for s in s_values:
        for k in delta_exponents:
            delta = 2.0 ** (-k)
            slab = SlabSpec(0.0, delta, spec, variant, delta_max=max(delta, 0.125))
            mat = propagator.assemble_matrix(slab, grid)
            norm = propagator.operator_norm_hs(mat, s, seed=seed)
            rows.append((s, delta, norm, (norm - 1.0) / delta))
    return rows


def _write_norm_sweep(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("s,delta,norm_hs,excess_rate\n")
        for s, d, n, r in rows:
            fh.write(f"{s:.17g},{d:.17g},{n:.17g},{r:.17g}\n")


def _property_cases(cfg: ExperimentConfig, spec, grid) -> list:
    """Cheap per-scenario property checks mirrored into properties.xml."""
    cases = []
    rng = np.random.default_rng(cfg.seed)
    u = Field(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    round_trip = spectral.inverse(spectral.forward(u))
    err = np.linalg.norm(round_trip.values - u.values) / np.linalg.norm(u.values)
    cases.append(("parseval-round-trip", err < 1e-12, f"relative error {err:.3e}"))

    probe_xi = np.linspace(-4.0, 4.0, 9)
    c1_vals = spec.c1(0.0, np.linspace(0.0, cfg.period, 7)[:, None], probe_xi[None, :])
    if np.any(np.asarray(c1_vals) != 0.0):
        def q(x, xi):
            return spec.c1(0.0, x, xi)
        rep = symbols.check_PL(q, L=2.0)
        cases.append(("damping-derivative-bound", rep.passed,
                      f"worst ratio {rep.worst_ratio:.3f} (limit {rep.c_max:g})"))
    ql = symbols.check_QL_family(lambda x, xi: symbols.smoothed_abs(xi)
                                 * np.ones(np.broadcast(x, xi).shape))
    cases.append(("exponential-family-uniform", ql.uniform,
                  "slab-exponential seminorms uniform in thickness"))
    return cases


def _check_gates(entry: Scenario, facts: dict) -> list:
    """Return list of violation strings for the scenario's gates."""
    bad = []
    g = entry.gates
    if "exact_tol" in g and facts.get("max_normalized_error") is not None:
        if facts["max_normalized_error"] >= g["exact_tol"]:
            bad.append(f"max normalized error {facts['max_normalized_error']:.3e} "
                       f"not below {g['exact_tol']:g}")
    if "slope_min" in g and facts.get("fitted_slope") is not None:
        if not (facts["fitted_slope"] >= g["slope_min"]):
            bad.append(f"fitted slope {facts['fitted_slope']:.3f} below {g['slope_min']:g}")
    if "monotone_tol" in g and facts.get("errors"):
        errs = facts["errors"]
        tol = g["monotone_tol"]
        for a, b in zip(errs, errs[1:]):
            if b > a * (1.0 + tol):
                bad.append(f"errors not decreasing within {tol:.0%}: {a:.3e} -> {b:.3e}")
                break
    if "averaged_margin" in g and facts.get("averaged_errors"):
        margin = g["averaged_margin"]
        for n, fe, ae in zip(facts["Ns"], facts["errors"], facts["averaged_errors"]):
            if not (ae <= margin * fe):
                bad.append(f"averaged error {ae:.3e} not below {margin:g}x frozen {fe:.3e} "
                           f"at N={n}")
    if "phase_tol" in g and facts.get("max_phase_error") is not None:
        if facts["max_phase_error"] >= g["phase_tol"]:
            bad.append(f"max phase error {facts['max_phase_error']:.3e} "
                       f"not below {g['phase_tol']:g}")
    if "suppression_min" in g and facts.get("suppression") is not None:
        if not (facts["suppression"] >= g["suppression_min"]):
            bad.append(f"outside-aperture suppression {facts['suppression']:.2f}x "
                       f"below {g['suppression_min']:g}x")
    if "preserve_tol" in g and facts.get("inside_change") is not None:
        if not (facts["inside_change"] <= g["preserve_tol"]):
            bad.append(f"inside-aperture energy changed by {facts['inside_change']:.2%}, "
                       f"more than {g['preserve_tol']:.0%}")
    return bad


def _run_evolution(cfg: ExperimentConfig, entry: Scenario, out, timings, outputs) -> dict:
    grid = Grid(cfg.n_points, cfg.period)
    spec = symbols.get_symbol(cfg.scenario, cfg.period)
    u0 = spectral.wave_packet(grid)
    variant = _variant_object(cfg)
    reference = _reference_object(cfg, spec)

    t0 = time.perf_counter()
    report = ansatz.convergence_study(spec, u0, cfg.s, cfg.Ns, variant, reference,
                                      Z=cfg.Z, delta_max=cfg.delta_max)
    facts = {
        "max_normalized_error": max(report.normalized_errors),
        "fitted_slope": None if report.exact else report.fitted_slope,
        "errors": list(report.normalized_errors),
        "Ns": list(report.Ns),
    }
    ansatz.write_report_csv(os.path.join(out, "convergence.csv"), report)
    ansatz.write_report_json(os.path.join(out, "convergence.json"), report,
                             config_echo(cfg))
    outputs += ["convergence.csv", "convergence.json"]

    if cfg.compare_variants:
        other = Averaged(cfg.quadrature_order or None) if cfg.variant == "frozen" else Frozen()
        report2 = ansatz.convergence_study(spec, u0, cfg.s, cfg.Ns, other, reference,
                                           Z=cfg.Z, delta_max=cfg.delta_max)
        name = "convergence_averaged" if cfg.variant == "frozen" else "convergence_frozen"
        ansatz.write_report_csv(os.path.join(out, name + ".csv"), report2)
        outputs.append(name + ".csv")
        if cfg.variant == "frozen":
            facts["averaged_errors"] = list(report2.normalized_errors)
    timings["convergence"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    norm_grid = Grid(min(cfg.norm_points, cfg.n_points), cfg.period)
    rows = norm_sweep(spec, norm_grid, seed=cfg.seed)
    _write_norm_sweep(os.path.join(out, "norm_sweep.csv"), rows)
    outputs.append("norm_sweep.csv")
    timings["norm_sweep"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cases = _property_cases(cfg, spec, grid)
    write_junit(os.path.join(out, "properties.xml"), "thinslab.properties", cases)
    outputs.append("properties.xml")
    timings["properties"] = time.perf_counter() - t0
    if any(not ok for _, ok, _ in cases):
        raise GateViolation("; ".join(f"property {n} failed: {m}"
                                      for n, ok, m in cases if not ok))
    return facts


def _oneway_parts(cfg: ExperimentConfig):
    grid = Grid(cfg.n_points, cfg.period)
    aperture = ApertureConfig(theta1=np.deg2rad(cfg.theta1_deg),
                              theta2=np.deg2rad(cfg.theta2_deg), tau=cfg.tau)
    if cfg.scenario == "oneway-lens":
        medium = oneway.lens_medium(period=cfg.period)
    else:
        medium = oneway.homogeneous_medium()
    return grid, medium, aperture


def _mixed_mode_datum(grid: Grid, medium, aperture) -> Field:
    """Inside-aperture packet plus one steep still-propagating mode."""
    n = grid.n_points
    k = np.arange(n) - n // 2
    scale = grid.period / (2.0 * np.pi)          # mode number per unit frequency
    coeffs = np.zeros(n, dtype=np.complex128)
    coeffs[(np.abs(k - 4) <= 6)] = np.exp(-((k[(np.abs(k - 4) <= 6)] - 4) ** 2) / 8.0)
    c_min = medium.c_bounds[0]
    c_max = medium.c_bounds[1]
    steep = int(np.floor(0.97 * abs(aperture.tau) * scale / c_max))
    lo = np.sin(aperture.theta2) * abs(aperture.tau) * scale / c_min
    if steep <= lo:
        raise oneway.BandLimitError(
            "no propagating mode lies strictly outside theta2 for this geometry")
    coeffs[n // 2 + steep] = 0.7
    return spectral.inverse(spectral.SpectralField(grid, coeffs))


def _run_oneway(cfg: ExperimentConfig, entry: Scenario, out, timings, outputs) -> dict:
    grid, medium, aperture = _oneway_parts(cfg)
    oneway.validate_medium(medium, grid.axis_points(), [0.0, cfg.Z])
    facts = {}

    t0 = time.perf_counter()
    if cfg.scenario == "oneway-homogeneous":
        # per-mode phase advance against the closed-form vertical wavenumber
        rows = []
        worst = 0.0
        for mode in cfg.modes:
            x = grid.axis_points()
            u0 = Field(grid, np.exp(1j * mode * (2.0 * np.pi / cfg.period) * x))
            uz = oneway.downward_continue(medium, aperture, u0, cfg.Z, cfg.n_slabs,
                                          damping_scale=cfg.damping_scale,
                                          delta_max=cfg.delta_max)
            xi = mode * 2.0 * np.pi / cfg.period
            expected = np.exp(1j * cfg.Z * np.sqrt(aperture.tau ** 2 - xi ** 2))
            got = uz.values / u0.values
            err = float(np.max(np.abs(got - expected)))
            rows.append((mode, err))
            worst = max(worst, err)
        with open(os.path.join(out, "phase_errors.csv"), "w", newline="") as fh:
            fh.write("mode,max_abs_error\n")
            for mode, err in rows:
                fh.write(f"{mode},{err:.17g}\n")
        outputs.append("phase_errors.csv")
        facts["max_phase_error"] = worst

    partition_rows = []
    snapshots = []
    u0 = _mixed_mode_datum(grid, medium, aperture)
    e0 = oneway.energy_partition(u0, medium, aperture)
    partition_rows.append((0.0,) + e0)
    spectral.write_field(os.path.join(out, "snapshot_0000.tslb"), u0)
    snapshots.append("snapshot_0000.tslb")

    def observe(k, zk, fld):
        partition_rows.append((zk,) + oneway.energy_partition(fld, medium, aperture))
        if k % cfg.snapshot_every == 0:
            name = f"snapshot_{k:04d}.tslb"
            spectral.write_field(os.path.join(out, name), fld)
            snapshots.append(name)

    uZ = oneway.downward_continue(medium, aperture, u0, cfg.Z, cfg.n_slabs,
                                  damping_scale=cfg.damping_scale,
                                  delta_max=cfg.delta_max, observer=observe)
    with open(os.path.join(out, "energy_partition.csv"), "w", newline="") as fh:
        fh.write("depth,energy_inside_theta1,energy_between,energy_outside_theta2\n")
        for row in partition_rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    outputs += ["energy_partition.csv"] + snapshots
    timings["continuation"] = time.perf_counter() - t0

    eZ = oneway.energy_partition(uZ, medium, aperture)
    if e0[2] > 0.0:
        facts["suppression"] = e0[2] / max(eZ[2], 1e-300)
    if e0[0] > 0.0:
        facts["inside_change"] = abs(eZ[0] / e0[0] - 1.0)
    cases = [("medium-bounds", True, "sampled speed/density within declared bounds")]
    write_junit(os.path.join(out, "properties.xml"), "thinslab.properties", cases)
    outputs.append("properties.xml")
    return facts


def run(cfg: ExperimentConfig) -> int:
    """Execute one scenario; always leaves a manifest in the output dir."""
    entry = get_scenario(cfg.scenario)
    out = cfg.output_dir
    try:
        os.makedirs(out, exist_ok=True)
        probe = os.path.join(out, ".write-probe")
        with open(probe, "w") as fh:
            fh.write("ok")
        os.remove(probe)
    except OSError as exc:
        raise ConfigError(f"output directory {out!r} is not writable: {exc}")

    timings = {}
    outputs = []
    status, error, code = "ok", None, EXIT_OK
    started = time.perf_counter()
    try:
        if entry.kind == "evolution":
            facts = _run_evolution(cfg, entry, out, timings, outputs)
        else:
            facts = _run_oneway(cfg, entry, out, timings, outputs)
        violations = _check_gates(entry, facts)
        if violations:
            raise GateViolation("; ".join(violations))
    except GateViolation as exc:
        status, error, code = "gate-violation", str(exc), EXIT_GATE
    except NonConvergenceError as exc:
        status, error, code = "non-convergence", str(exc), EXIT_NONCONVERGENCE
    except (ConfigError, propagator.ContractViolation, oneway.BandLimitError,
            oneway.MediumError, oneway.ApertureError) as exc:
        status, error, code = "config-error", str(exc), EXIT_CONFIG
    finally:
        timings["total"] = time.perf_counter() - started
        _write_manifest(out, cfg, status, error, timings, outputs)
    return code


# ---------------------------------------------------------------------------
# quick self-check


def quick_check(output_dir: str, seed: int = 0) -> int:
    """Fast library self-check; writes properties.xml + manifest, returns exit code."""
    cfg = ExperimentConfig(scenario="check", output_dir=output_dir, seed=seed)
    os.makedirs(output_dir, exist_ok=True)
    cases = []
    timings = {}
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    grid = Grid(64, 2.0 * np.pi)

    u = Field(grid, rng.standard_normal(64) + 1j * rng.standard_normal(64))
    rt = spectral.inverse(spectral.forward(u))
    err = np.linalg.norm(rt.values - u.values) / np.linalg.norm(u.values)
    cases.append(("parseval-round-trip", err < 1e-12, f"relative error {err:.3e}"))

    w = spectral.apply_weight(u, 1.5)
    iso = abs(spectral.sobolev_norm(w, -0.5) - spectral.sobolev_norm(u, 1.0))
    cases.append(("weight-isometry", iso < 1e-12 * spectral.sobolev_norm(u, 1.0),
                  f"defect {iso:.3e}"))

    spec = symbols.get_symbol("translation")
    u0 = spectral.wave_packet(grid)
    sub = Subdivision(1.0, 16)
    moved = ansatz.apply_ansatz(spec, sub, u0, variant=Averaged())
    exact = propagator.exact_multiplier_evolution(spec, 0.0, 1.0, u0)
    drift = np.linalg.norm(moved.values - exact.values) / np.linalg.norm(u0.values)
    cases.append(("multiplier-exactness", drift < 1e-10, f"relative error {drift:.3e}"))

    ok_all = True
    for trial in range(20):
        q, _ = symbols.random_nonneg_order1(np.random.default_rng(seed + trial))
        rep = symbols.check_PL(q, L=2.0)
        ok_all = ok_all and rep.passed
    cases.append(("nonneg-symbol-derivative-bound", ok_all,
                  "20 random nonnegative order-1 symbols within the L=2 bound"))

    ql = symbols.check_QL_family(lambda x, xi: symbols.smoothed_abs(xi)
                                 * np.ones(np.broadcast(x, xi).shape))
    cases.append(("exponential-family-uniform", ql.uniform,
                  "slab exponential stays bounded in the rough class"))

    write_junit(os.path.join(output_dir, "properties.xml"), "thinslab.check", cases)
    timings["total"] = time.perf_counter() - started
    failed = [n for n, ok, _ in cases if not ok]
    status = "ok" if not failed else "gate-violation"
    _write_manifest(output_dir, cfg, status,
                    None if not failed else f"failed: {', '.join(failed)}",
                    timings, ["properties.xml"])
    return EXIT_OK if not failed else EXIT_GATE
