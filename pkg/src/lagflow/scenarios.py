"""Scenario definitions, the batch runner and report emission.

Scenario files are flat ``key = value`` text with dotted sections; unknown
keys are rejected.  Built-in scenarios cover the convergence theorems on
all four catalog ambients plus a shrinking-circle negative control.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import families, monitors
from .deformations import deform
from .errors import (LagflowError, ParseError, ScaleViolation,
                     ValidationError)
from .flow import FlowConfig, run
from .geometry import geometry, closedness_residual, holonomy
from .monitors import ClassParams
from .spectral import classify_variation, laplace_apply, lowest_eigenpairs

_FIELDS = {
    "name": str, "description": str, "seed": int, "resolution": int,
    "ambient.kind": str, "ambient.n": int, "ambient.radius": float,
    "ambient.length": float, "ambient.scale": float,
    "family.name": str, "family.amplitude": float, "family.mode": int,
    "family.radius": float, "family.deform_s": float,
    "family.deform_mode1": int, "family.deform_mode2": int,
    "flow.cfl": float, "flow.t_max": float, "flow.max_steps": int,
    "flow.monitor_stride": int, "flow.snapshot_stride": int,
    "flow.defect_tol": float, "flow.eig_stride": int, "flow.resid_stride": int,
    "flow.collapse_floor": float, "flow.tol_holonomy": float,
    "flow.conv_tol": float, "flow.holonomy_gauge": bool,
    "class.family": str, "class.kappa": float, "class.r": float,
    "class.lambda": float, "class.epsilon": float, "class.delta": float,
    "expect.slope": float, "expect.slope_tol": float,
    "expect.slope_from_mode": bool, "expect.neutral": bool,
    "expect.converged": bool, "expect.essential": bool,
    "expect.final_max_h": float,
    "expect.singularity": str, "expect.window_lo": float,
    "expect.window_hi": float,
}

_REQUIRED = ("name", "ambient.kind", "family.name", "resolution")

_FAMILY_AMBIENTS = {
    "flat_line": "flat_torus", "flat_graph": "flat_torus",
    "flat_circle": "flat_torus", "sphere_circle": "round_sphere",
    "cylinder_core": "hyperbolic_cylinder",
    "clifford": "fubini_study_cp2", "clifford_deformed": "fubini_study_cp2",
}


@dataclass
class ScenarioConfig:
    values: dict
    source: str = ""

    def get(self, key, default=None):
        return self.values.get(key, default)

    def flow_config(self, n_intrinsic):
        kwargs = {}
        for key, attr in (("flow.cfl", "cfl"), ("flow.t_max", "t_max"),
                          ("flow.max_steps", "max_steps"),
                          ("flow.monitor_stride", "monitor_stride"),
                          ("flow.snapshot_stride", "snapshot_stride"),
                          ("flow.defect_tol", "defect_tol"),
                          ("flow.eig_stride", "eig_stride"),
                          ("flow.resid_stride", "resid_stride"),
                          ("flow.collapse_floor", "collapse_floor"),
                          ("flow.tol_holonomy", "tol_holonomy"),
                          ("flow.conv_tol", "conv_tol"),
                          ("flow.holonomy_gauge", "holonomy_gauge")):
            if key in self.values:
                kwargs[attr] = self.values[key]
        return FlowConfig(**kwargs)

    def class_params(self):
        if "class.kappa" not in self.values:
            return None, None
        params = ClassParams(self.values["class.kappa"], self.values["class.r"],
                             self.values["class.lambda"],
                             self.values["class.epsilon"],
                             self.values.get("class.delta"))
        return params, self.values.get("class.family", "A")


def _parse_value(key, raw, lineno):
    typ = _FIELDS[key]
    try:
        if typ is bool:
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ParseError(f"line {lineno}: cannot read {key!r} "
                         f"as {typ.__name__}: {raw!r}") from None


def parse_scenario_text(text, source="<string>"):
    """Parse and validate scenario text; unknown keys raise ParseError with
    a line diagnostic, constraint violations are collected into a single
    ValidationError."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _FIELDS:
            raise ParseError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ParseError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw, lineno)

    violations = []
    for key in _REQUIRED:
        if key not in values:
            violations.append(f"missing required key {key!r}")
    if values.get("resolution", 16) < 16:
        violations.append("resolution must be >= 16")
    fam = values.get("family.name")
    if fam is not None and fam not in _FAMILY_AMBIENTS:
        violations.append(f"unknown family {fam!r}")
    elif fam is not None and "ambient.kind" in values:
        want = _FAMILY_AMBIENTS[fam]
        if values["ambient.kind"] != want:
            violations.append(
                f"family {fam!r} lives in ambient {want!r}, "
                f"not {values['ambient.kind']!r}")
    for key in ("expect.slope_tol", "expect.final_max_h"):
        if key in values and values[key] <= 0:
            violations.append(f"{key} must be positive")
    if "expect.slope" in values and "expect.slope_tol" not in values:
        violations.append("expect.slope requires expect.slope_tol")
    if ("expect.singularity" in values
            and values["expect.singularity"] not in ("degenerate", "defect",
                                                     "any")):
        violations.append("expect.singularity must be degenerate|defect|any")
    if violations:
        raise ValidationError(violations)
    cfg = ScenarioConfig(values, source)
    cfg.flow_config(1)       # surface FlowConfig constraint violations early
    return cfg


def parse_scenario(path):
    with open(path) as fh:
        return parse_scenario_text(fh.read(), source=str(path))


# ----------------------------------------------------------------------
# Built-ins
# ----------------------------------------------------------------------

BUILTIN_SCENARIOS = {
    "s1_flat_torus": """\
# graph curve over the closed flat geodesic; exact mean curvature form,
# expected L2 decay rate 8 pi^2 (twice the first eigenvalue)
name = s1_flat_torus
description = flat torus graph perturbation, exact form, heat-rate decay
seed = 1234
resolution = 128
ambient.kind = flat_torus
ambient.n = 1
family.name = flat_graph
family.amplitude = 0.01
family.mode = 1
flow.cfl = 0.8
flow.t_max = 0.5
flow.monitor_stride = 20
flow.snapshot_stride = 4000
flow.eig_stride = 5
flow.resid_stride = 5
flow.defect_tol = 0.05
class.family = B
class.kappa = 1.0
class.r = 0.3
class.lambda = 1.0
class.epsilon = 1.0
class.delta = 19.739
expect.slope = -78.9568
expect.slope_tol = 0.10
expect.converged = true
""",
    "s2_great_circle": """\
# normal perturbation of the equator; mode >= 2 decays at the Jacobi rate
# 2 (m^2 - 1), mode 1 is the neutral rotation direction
name = s2_great_circle
description = perturbed great circle on the round sphere
seed = 1234
resolution = 128
ambient.kind = round_sphere
ambient.radius = 1.0
family.name = sphere_circle
family.amplitude = 0.01
family.mode = 2
flow.cfl = 0.8
flow.t_max = 2.0
flow.monitor_stride = 1
flow.snapshot_stride = 500
flow.eig_stride = 20
flow.resid_stride = 20
flow.defect_tol = 0.05
flow.tol_holonomy = 0.02
class.family = A
class.kappa = 1.0
class.r = 0.3
class.lambda = 1.0
class.epsilon = 1.0
expect.slope = -6.0
expect.slope_tol = 0.10
expect.converged = false
""",
    "s3_clifford_cp2": """\
# Clifford torus displaced along an essential hamiltonian direction.
# The early decay follows the displaced mode's eigenvalue.  The plain
# discrete flow then fails the convergence expectations for a structural
# reason: grid truncation seeds a non-exact (harmonic) component of the
# mean curvature form at O(du^2), and with Rbar > 0 that component grows
# like e^{(Rbar/2n) t} along the volume-unstable family of product tori,
# eventually collapsing the torus.  Exactness is precisely the hypothesis
# the convergence statements need; see s3_clifford_cp2_gauged for the
# flow pinned to the exact class.
name = s3_clifford_cp2
description = essentially-deformed Clifford torus in CP^2 (plain flow)
seed = 1234
resolution = 64
ambient.kind = fubini_study_cp2
ambient.scale = 1.0
family.name = clifford_deformed
family.deform_s = 0.02
family.deform_mode1 = 2
family.deform_mode2 = 0
flow.cfl = 0.5
flow.t_max = 0.8
flow.monitor_stride = 20
flow.snapshot_stride = 4000
flow.eig_stride = 10
flow.resid_stride = 30
flow.defect_tol = 0.08
flow.tol_holonomy = 0.05
class.family = A
class.kappa = 1.0
class.r = 0.3
class.lambda = 5.0
class.epsilon = 2.5
expect.slope_from_mode = true
expect.slope_tol = 0.15
expect.converged = true
expect.essential = true
expect.final_max_h = 1e-4
""",
    "s3_clifford_cp2_gauged": """\
# Same initial data with the flow velocity projected onto the exact part
# of the mean curvature form (the weighted mean, i.e. the discrete
# harmonic leak, is subtracted).  Demonstrates the convergence mechanism:
# decay at the displaced mode's rate down to the discretization floor of
# the minimal torus, with no collapse.
name = s3_clifford_cp2_gauged
description = deformed Clifford torus, flow gauged to the exact class
seed = 1234
resolution = 32
ambient.kind = fubini_study_cp2
ambient.scale = 1.0
family.name = clifford_deformed
family.deform_s = 0.02
family.deform_mode1 = 2
family.deform_mode2 = 0
flow.cfl = 0.5
flow.t_max = 0.8
flow.monitor_stride = 5
flow.snapshot_stride = 1500
flow.eig_stride = 20
flow.resid_stride = 40
flow.defect_tol = 0.08
flow.tol_holonomy = 0.2
flow.holonomy_gauge = true
class.family = A
class.kappa = 1.0
class.r = 0.3
class.lambda = 5.0
class.epsilon = 2.5
expect.slope_from_mode = true
expect.slope_tol = 0.15
expect.converged = false
expect.essential = true
expect.final_max_h = 0.06
""",
    "s4_hyperbolic_cylinder": """\
# wobble of the core geodesic of a hyperbolic cylinder (stand-in for
# negatively curved Kahler-Einstein surfaces); rate 2 ((2 pi m / L)^2 + 1)
name = s4_hyperbolic_cylinder
description = perturbed core geodesic, negative ambient curvature
seed = 1234
resolution = 128
ambient.kind = hyperbolic_cylinder
ambient.length = 6.283185307179586
family.name = cylinder_core
family.amplitude = 0.01
family.mode = 1
flow.cfl = 0.8
flow.t_max = 8.0
flow.monitor_stride = 1
flow.snapshot_stride = 1000
flow.eig_stride = 20
flow.resid_stride = 20
flow.defect_tol = 0.05
class.family = A
class.kappa = 1.0
class.r = 0.3
class.lambda = 1.0
class.epsilon = 1.0
expect.slope = -4.0
expect.slope_tol = 0.10
expect.converged = true
""",
    "s5_shrinking_circle": """\
# negative control: contractible circle, non-exact form, finite-time
# singularity at t = r0^2 / 2 = 0.02
name = s5_shrinking_circle
description = shrinking circle, finite-time singularity
seed = 1234
resolution = 64
ambient.kind = flat_torus
ambient.n = 1
family.name = flat_circle
family.radius = 0.2
flow.cfl = 0.9
flow.t_max = 1.0
flow.max_steps = 2000000
flow.monitor_stride = 200
flow.eig_stride = 50
flow.resid_stride = 1000000000
flow.defect_tol = 0.05
flow.collapse_floor = 0.01
expect.singularity = any
expect.window_lo = 0.018
expect.window_hi = 0.022
""",
}


def list_scenarios():
    """Names and descriptions of the built-in scenarios."""
    out = []
    for name, text in BUILTIN_SCENARIOS.items():
        cfg = parse_scenario_text(text, source=f"builtin:{name}")
        out.append({"name": name, "description": cfg.get("description", "")})
    return out


def load_scenario(name_or_path):
    if os.path.exists(name_or_path):
        return parse_scenario(name_or_path)
    if name_or_path in BUILTIN_SCENARIOS:
        return parse_scenario_text(BUILTIN_SCENARIOS[name_or_path],
                                   source=f"builtin:{name_or_path}")
    raise ParseError(f"no scenario file or built-in named {name_or_path!r}")


# ----------------------------------------------------------------------
# Initial data
# ----------------------------------------------------------------------

def build_initial(config):
    """Instantiate the initial immersion (and the deformation potential,
    when the family is a deformed one)."""
    N = config.get("resolution")
    fam = config.get("family.name")
    amp = config.get("family.amplitude", 0.0)
    mode = config.get("family.mode", 1)
    if fam == "flat_line":
        return families.flat_line(N), None
    if fam == "flat_graph":
        return families.flat_graph(N, amp, mode), None
    if fam == "flat_circle":
        return families.flat_circle(N, config.get("family.radius", 0.2)), None
    if fam == "sphere_circle":
        return families.sphere_circle(
            N, amp, mode, config.get("ambient.radius", 1.0)), None
    if fam == "cylinder_core":
        return families.cylinder_core(
            N, amp, mode, config.get("ambient.length", 2 * math.pi)), None
    if fam == "clifford":
        return families.clifford_torus(N, config.get("ambient.scale", 1.0)), None
    if fam == "clifford_deformed":
        base = families.clifford_torus(N, config.get("ambient.scale", 1.0))
        f = families.torus_mode_field(base.topology,
                                      config.get("family.deform_mode1", 2),
                                      config.get("family.deform_mode2", 0))
        s = config.get("family.deform_s", 0.02)
        return deform(base, f, s), f
    raise ValidationError([f"unknown family {fam!r}"])


# ----------------------------------------------------------------------
# Runner
# ----------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_snapshot_csv(path, imm, cache=None):
    """One row per node: parameter coordinates, chart coordinates, |H|,
    |A| and the symplectic defect."""
    cache = geometry(imm) if cache is None else cache
    topo = imm.topology
    n, d = topo.ndim, imm.space.real_dim
    mesh = [m.reshape(-1) for m in topo.mesh()]
    cols = ([f"u{a + 1}" for a in range(n)]
            + [f"x{A + 1}" for A in range(d)] + ["abs_h", "abs_a", "defect"])
    F = imm.flat_coords
    absh = np.sqrt(cache.abs_h2).reshape(-1)
    absa = np.sqrt(cache.abs_a2).reshape(-1)
    dft = np.max(np.abs(cache.defect.reshape(-1, n * n)), axis=1)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(F.shape[0]):
            row = ([m[i] for m in mesh] + list(F[i]) + [absh[i], absa[i], dft[i]])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def run_scenario(config, out_dir):
    """Execute a scenario end to end: flow, monitors, expectation audit.

    Writes trace.csv, checks.json, summary.json and snapshots/ under
    ``out_dir``; returns (exit_status, summary dict).  Exit status: 0 all
    expectations pass, 1 an expectation failed, 2 unexpected flow error.
    """
    os.makedirs(out_dir, exist_ok=True)
    snap_dir = os.path.join(out_dir, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    seed = config.get("seed", 0)

    imm0, potential = build_initial(config)
    space = imm0.space
    n = imm0.topology.ndim
    rbar = space.scalar_curvature
    flow_cfg = config.flow_config(n)

    checks = []
    expectations = []

    cache0 = geometry(imm0)
    params, class_family = config.class_params()
    lam1_0 = None
    exact0 = False
    try:
        spec0 = lowest_eigenpairs(cache0, 1, seed=seed)
        lam1_0 = spec0.lambda1
    except LagflowError:
        pass
    hol0 = holonomy(cache0)
    exact0 = (closedness_residual(cache0) <= flow_cfg.tol_closed
              and float(np.max(np.abs(hol0))) < flow_cfg.tol_holonomy)

    if params is not None:
        cm0 = monitors.class_membership(cache0, params, class_family,
                                        lambda1=lam1_0, seed=seed,
                                        tol_holonomy=flow_cfg.tol_holonomy)
        cm0["name"] = f"class_{class_family}[t=0]"
        checks.append(cm0)

    trace = run(imm0, flow_cfg)
    trace.write_csv(os.path.join(out_dir, "trace.csv"))

    # snapshots to disk (initial, periodic, final states)
    snap_states = [imm0] + [s[2] for s in trace.snapshots]
    for i, imm in enumerate(snap_states):
        try:
            write_snapshot_csv(os.path.join(snap_dir, f"snapshot_{i:04d}.csv"), imm)
        except LagflowError:
            pass

    # ---- expectations -------------------------------------------------
    def expect(name, ok, measured, wanted):
        expectations.append({"name": name, "pass": bool(ok),
                             "measured": _jsonable(measured),
                             "expected": _jsonable(wanted)})

    singular = config.get("expect.singularity")
    unexpected_error = False
    if singular:
        lo, hi = config.get("expect.window_lo", 0.0), config.get("expect.window_hi", np.inf)
        kinds = {"degenerate": ("DegenerateMetric",),
                 "defect": ("DefectBlowup",),
                 "any": ("DegenerateMetric", "DefectBlowup")}[singular]
        ok = (trace.status == "error" and trace.error_type in kinds
              and lo <= trace.t_final <= hi)
        expect("singularity", ok,
               {"status": trace.status, "error_type": trace.error_type,
                "t_final": trace.t_final},
               {"error_types": list(kinds), "window": [lo, hi]})
    elif trace.status == "error":
        # keep auditing the partial trace; the exit status reports the error
        unexpected_error = True

    if "expect.converged" in config.values:
        expect("converged", (trace.status == "converged") == config.get("expect.converged"),
               trace.status, {"converged": config.get("expect.converged")})

    if "expect.final_max_h" in config.values:
        final_h = trace.column("max_h")[-1]
        expect("final_max_h", final_h < config.get("expect.final_max_h"),
               final_h, {"below": config.get("expect.final_max_h")})

    slope_expected = None
    if config.get("expect.slope_from_mode") and potential is not None:
        w = cache0.node_weights
        f0 = potential - np.sum(w * potential) / np.sum(w)
        lap = laplace_apply(cache0, f0)
        lam_mode = -float(np.sum(w * f0 * lap) / np.sum(w * f0 * f0))
        slope_expected = -2.0 * (lam_mode - space.einstein_constant)
    elif "expect.slope" in config.values:
        slope_expected = config.get("expect.slope")

    fit = None
    if not singular:
        try:
            if config.get("expect.neutral"):
                # no decay expected: fit over the whole trace
                t_all = trace.column("t")
                fit = monitors.decay_rate_fit(
                    trace, window=(float(t_all[0]), float(t_all[-1])))
            else:
                fit = monitors.decay_rate_fit(trace)
        except LagflowError as exc:
            fit = {"error": str(exc)}
    if config.get("expect.neutral"):
        ok = fit is not None and "slope" in fit and abs(fit["slope"]) < 0.2
        expect("neutral_direction", ok, fit, {"abs_slope_below": 0.2})
    elif slope_expected is not None:
        tol = config.get("expect.slope_tol", 0.1)
        ok = (fit is not None and "slope" in fit
              and abs(fit["slope"] - slope_expected) <= tol * abs(slope_expected))
        expect("decay_slope", ok, fit,
               {"slope": slope_expected, "rel_tol": tol})

    if "expect.essential" in config.values and potential is not None:
        base = families.clifford_torus(config.get("resolution"),
                                       config.get("ambient.scale", 1.0))
        res = classify_variation(base, potential, k=8, cluster_rtol=5e-3,
                                 seed=seed)
        expect("essential", res["essential"] == config.get("expect.essential"),
               {"essential": res["essential"],
                "perp_fraction": res["perp_norm"] / res["norm"]},
               {"essential": config.get("expect.essential")})

    # ---- monitor suite on the trace -----------------------------------
    if not singular:
        checks.append(monitors.gronwall_check(trace, rbar, n, exact=False))
        if exact0:
            checks.append(monitors.gronwall_check(
                trace, rbar, n, exact=True,
                holonomy_tol=flow_cfg.tol_holonomy))
        checks.append(monitors.eigen_bound_check(
            trace, rbar, n, k0=space.curvature_bounds[0]))
    checks.append(monitors.volume_monotonic_check(trace))
    checks.append(monitors.volume_form_bound_check(trace, n))
    checks.append(monitors.short_time_doubling_check(trace))

    # ---- state-level suite on snapshot states -------------------------
    if not singular and not unexpected_error:
        states = [imm0]
        if trace.snapshots:
            states.append(trace.snapshots[len(trace.snapshots) // 2][2])
            states.append(trace.snapshots[-1][2])
        for tag, imm in zip(("initial", "middle", "final"), states):
            try:
                cache = geometry(imm)
            except LagflowError:
                continue
            r = params.r if params is not None else 0.3
            kappa_hat, _ = monitors.noncollapse_estimate(cache, r, seed=seed)
            try:
                c0 = monitors.c0_from_l2_check(cache, kappa_hat, r)
                c0["name"] = f"c0_from_l2[{tag}]"
                checks.append(c0)
            except ScaleViolation as exc:
                checks.append({"name": f"c0_from_l2[{tag}]", "pass": True,
                               "margin": float("inf"),
                               "witnesses": {"skipped": str(exc)}})
            vh = monitors.vector_field_inequality_check(cache, X=cache.hvec)
            vh["name"] = f"vector_field_H[{tag}]"
            checks.append(vh)
            if tag == "initial":
                vr = monitors.vector_field_inequality_check(
                    cache, trials=20, seed=seed)
                vr["name"] = "vector_field_random[initial]"
                checks.append(vr)
            if params is not None and tag != "initial":
                cm = monitors.class_membership(
                    cache, params, class_family, seed=seed,
                    tol_holonomy=flow_cfg.tol_holonomy)
                cm["name"] = f"class_{class_family}[{tag}]"
                checks.append(cm)

    summary = _summary(config, trace, expectations, checks, seed,
                       extra={"decay_fit": _jsonable(fit) if fit else None,
                              "lambda1_initial": lam1_0,
                              "exact_form": exact0,
                              "expected_slope": slope_expected})
    failed = [e for e in expectations if not e["pass"]]
    failed_checks = [c for c in checks if not c["pass"]]
    status = 0 if not failed and not failed_checks else 1
    if unexpected_error:
        status = 2
        summary["extra"]["unexpected_error"] = trace.error
    summary["exit_status"] = status
    _write_reports(out_dir, checks, summary)
    return status, summary


def _summary(config, trace, expectations, checks, seed, extra=None):
    return {
        "scenario": config.get("name"),
        "seed": seed,
        "config": dict(config.values),
        "ambient": {"kind": config.get("ambient.kind")},
        "flow": {"status": trace.status, "error": trace.error,
                 "error_type": trace.error_type,
                 "t_final": trace.t_final, "steps": trace.steps},
        "expectations": expectations,
        "checks_passed": sum(1 for c in checks if c["pass"]),
        "checks_failed": sum(1 for c in checks if not c["pass"]),
        "extra": _jsonable(extra or {}),
    }


def _write_reports(out_dir, checks, summary):
    with open(os.path.join(out_dir, "checks.json"), "w") as fh:
        json.dump(_jsonable(checks), fh, indent=1)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_jsonable(summary), fh, indent=1)
