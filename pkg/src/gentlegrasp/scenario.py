"""Scenario files: YAML with blocks ``object``, ``sensor``, ``estimator``,
``controller``, ``disturbances``, ``phase_schedule`` and ``timing``.

Presets ship inside the package; ``GENTLEGRASP_PRESET_DIR`` points the
loader at another directory.
"""
import os
from pathlib import Path

import yaml

from .contact import FlatPlane, HeightField, Sphere
from .controller import ControllerConfig, PhaseSchedule
from .exceptions import InvalidConfig, ParseError, ValidationError
from .particle_filter import EstimatorConfig
from .simulator import AccelProfile, LinearElastic, MassRamp, ObjectModel, Scenario, SensorModel, Timing

PRESET_ENV = "GENTLEGRASP_PRESET_DIR"
PRESETS = ("plastic_cup_pour", "soft_toy_shake")

_TOP_KEYS = {"name", "seed", "max_accel", "object", "sensor", "estimator", "controller",
             "disturbances", "phase_schedule", "timing", "schema_version"}
_OBJECT_KEYS = {"mass_profile", "true_mu_profile", "contact_stiffness", "contact_offset", "rigidity",
                "load_ramp_s", "slip_damping", "drop_threshold"}
_SENSOR_KEYS = {"grid", "element_area", "force_noise_std", "surface"}
_ESTIMATOR_KEYS = {"num_particles", "mu_min", "mu_max", "sigma_p", "sigma_o", "cf_target",
                   "resample_threshold_fraction", "rng_seed"}
_CONTROLLER_KEYS = {"cf_target", "k_p", "delta_cf", "f_n_threshold", "reach_increment", "gripper_limits", "max_step"}
_SCHEDULE_KEYS = {"lift", "hold", "replace", "unload", "release"}
_TIMING_KEYS = {"rate_hz", "duration_s"}


def _line_index(text):
    """Map dotted key paths to 1-based line numbers using the YAML node tree."""
    index = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return index

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                p = f"{path}.{key.value}" if path else str(key.value)
                index[p] = key.start_mark.line + 1
                walk(value, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                p = f"{path}[{i}]"
                index[p] = item.start_mark.line + 1
                walk(item, p)

    if root is not None:
        walk(root, "")
    return index


class _Reader:
    def __init__(self, lines, path):
        self.lines = lines
        self.path = path

    def fail(self, msg, field):
        line = self.lines.get(field)
        parent = field
        while line is None and "." in parent:
            parent = parent.rsplit(".", 1)[0]
            line = self.lines.get(parent)
        raise ParseError(msg, field=field, line=line, path=self.path)

    def block(self, data, key, allowed, required=False):
        if key not in data or data[key] is None:
            if required:
                self.fail("required block is missing", key)
            return {}
        block = data[key]
        if not isinstance(block, dict):
            self.fail("expected a mapping", key)
        self.check_keys(block, allowed, key)
        return block

    def check_keys(self, block, allowed, prefix):
        for k in block:
            if k not in allowed:
                self.fail("unknown field", f"{prefix}.{k}" if prefix else str(k))

    def number(self, block, key, prefix, cast=float):
        value = block[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"expected a number, got {value!r}", f"{prefix}.{key}")
        return cast(value)

    def numbers(self, block, prefix, keys, cast=float):
        return {k: self.number(block, k, prefix, cast) for k in keys if k in block}

    def points(self, block, key, prefix):
        value = block[key]
        field = f"{prefix}.{key}"
        if not isinstance(value, list) or not value:
            self.fail("expected a nonempty list of [t, value] pairs", field)
        out = []
        for i, pt in enumerate(value):
            if (not isinstance(pt, list) or len(pt) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pt)):
                self.fail(f"expected [t, value], got {pt!r}", f"{field}[{i}]")
            out.append([float(pt[0]), float(pt[1])])
        return out


def _surface(r, spec, prefix="sensor.surface"):
    if not isinstance(spec, dict) or len(spec) != 1:
        r.fail("expected one of {flat: ..., sphere: ..., height_field: ...}", prefix)
    (kind, params), = spec.items()
    params = params or {}
    try:
        if kind == "flat":
            r.check_keys(params, {"normal"}, f"{prefix}.flat")
            return FlatPlane(tuple(params.get("normal", (0.0, 0.0, 1.0))))
        if kind == "sphere":
            r.check_keys(params, {"center", "radius"}, f"{prefix}.sphere")
            return Sphere(tuple(params.get("center", (0.0, 0.0, 0.0))), float(params["radius"]))
        if kind == "height_field":
            r.check_keys(params, {"x", "y", "z"}, f"{prefix}.height_field")
            return HeightField(params["x"], params["y"], params["z"])
    except KeyError as e:
        r.fail("required field is missing", f"{prefix}.{kind}.{e.args[0]}")
    except (TypeError, ValueError) as e:
        raise ValidationError(str(e), f"{prefix}.{kind}")
    r.fail(f"unknown surface kind {kind!r}", prefix)


def scenario_from_dict(data, path=None, lines=None) -> Scenario:
    r = _Reader(lines or {}, path)
    if not isinstance(data, dict):
        raise ParseError("scenario must be a mapping at top level", path=path)
    r.check_keys(data, _TOP_KEYS, "")

    obj = r.block(data, "object", _OBJECT_KEYS, required=True)
    for key in ("mass_profile", "true_mu_profile"):
        if key not in obj:
            r.fail("required field is missing", f"object.{key}")
    obj_kwargs = r.numbers(obj, "object", ["contact_stiffness", "contact_offset", "load_ramp_s",
                                           "slip_damping", "drop_threshold"])
    rigidity = obj.get("rigidity", "rigid")
    if rigidity == "rigid" or rigidity is None:
        obj_kwargs["rigidity"] = None
    elif isinstance(rigidity, dict) and set(rigidity) == {"linear_elastic"}:
        inner = rigidity["linear_elastic"] or {}
        if "max_deflection" not in inner:
            r.fail("required field is missing", "object.rigidity.linear_elastic.max_deflection")
        obj_kwargs["rigidity"] = LinearElastic(float(inner["max_deflection"]))
    else:
        r.fail("expected 'rigid' or {linear_elastic: {max_deflection: ...}}", "object.rigidity")

    sensor = r.block(data, "sensor", _SENSOR_KEYS)
    sensor_kwargs = r.numbers(sensor, "sensor", ["element_area", "force_noise_std"])
    if "grid" in sensor:
        grid = sensor["grid"]
        if not (isinstance(grid, list) and len(grid) == 2 and all(isinstance(g, int) for g in grid)):
            r.fail("expected [rows, cols]", "sensor.grid")
        sensor_kwargs["rows"], sensor_kwargs["cols"] = grid
    if "surface" in sensor:
        sensor_kwargs["surface"] = _surface(r, sensor["surface"])

    est = r.block(data, "estimator", _ESTIMATOR_KEYS)
    est_kwargs = r.numbers(est, "estimator", ["mu_min", "mu_max", "sigma_p", "sigma_o", "cf_target",
                                              "resample_threshold_fraction"])
    est_kwargs.update(r.numbers(est, "estimator", ["num_particles", "rng_seed"], cast=int))

    ctl = r.block(data, "controller", _CONTROLLER_KEYS)
    ctl_kwargs = r.numbers(ctl, "controller", ["cf_target", "k_p", "delta_cf", "f_n_threshold",
                                               "reach_increment", "max_step"])
    if "gripper_limits" in ctl:
        lim = ctl["gripper_limits"]
        if not (isinstance(lim, list) and len(lim) == 2):
            r.fail("expected [x_min, x_max]", "controller.gripper_limits")
        ctl_kwargs["gripper_limits"] = tuple(float(v) for v in lim)

    sched = r.block(data, "phase_schedule", _SCHEDULE_KEYS)
    sched_kwargs = {k: (None if v is None else r.number(sched, k, "phase_schedule")) for k, v in sched.items()}
    timing = r.block(data, "timing", _TIMING_KEYS)
    timing_kwargs = r.numbers(timing, "timing", ["rate_hz", "duration_s"])

    disturbances = []
    raw = data.get("disturbances") or []
    if not isinstance(raw, list):
        r.fail("expected a list", "disturbances")
    for i, item in enumerate(raw):
        prefix = f"disturbances[{i}]"
        if not isinstance(item, dict) or len(item) != 1:
            r.fail("expected {mass_ramp: ...} or {accel_profile: ...}", prefix)
        (kind, params), = item.items()
        params = params or {}
        if kind == "mass_ramp":
            r.check_keys(params, {"start", "end", "added_mass"}, f"{prefix}.mass_ramp")
            for key in ("start", "end", "added_mass"):
                if key not in params:
                    r.fail("required field is missing", f"{prefix}.mass_ramp.{key}")
            disturbances.append(MassRamp(**r.numbers(params, f"{prefix}.mass_ramp", ["start", "end", "added_mass"])))
        elif kind == "accel_profile":
            r.check_keys(params, {"points", "axis"}, f"{prefix}.accel_profile")
            if "points" not in params:
                r.fail("required field is missing", f"{prefix}.accel_profile.points")
            disturbances.append(AccelProfile(r.points(params, "points", f"{prefix}.accel_profile"),
                                             str(params.get("axis", "z"))))
        else:
            r.fail(f"unknown disturbance kind {kind!r}", prefix)

    try:
        return Scenario(
            object=ObjectModel(
                mass_profile=r.points(obj, "mass_profile", "object"),
                true_mu_profile=r.points(obj, "true_mu_profile", "object"),
                **obj_kwargs,
            ),
            sensor=SensorModel(**sensor_kwargs),
            estimator=EstimatorConfig(**est_kwargs),
            controller=ControllerConfig(**ctl_kwargs),
            disturbances=disturbances,
            phase_schedule=PhaseSchedule(**sched_kwargs),
            timing=Timing(**timing_kwargs),
            name=str(data.get("name", Path(path).stem if path else "scenario")),
            seed=int(data.get("seed", 0)),
            max_accel=float(data.get("max_accel", 5.0)),
        )
    except InvalidConfig as e:
        raise ValidationError(str(e))


def loads_scenario(text, path=None) -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ParseError(f"invalid YAML: {getattr(e, 'problem', e)}", line=mark.line + 1 if mark else None,
                         path=path)
    return scenario_from_dict(data, path=path, lines=_line_index(text))


def preset_dir() -> Path:
    env = os.environ.get(PRESET_ENV)
    return Path(env) if env else Path(__file__).parent / "presets"


def resolve_scenario_path(name_or_path) -> Path:
    """Accept a file path, a preset name, or ``presets/<name>``."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    stem = p.name[:-5] if p.name.endswith(".yaml") else p.name
    candidate = preset_dir() / f"{stem}.yaml"
    if candidate.is_file():
        return candidate
    raise ParseError("no such scenario file or preset", path=name_or_path)


def load_scenario(name_or_path) -> Scenario:
    path = resolve_scenario_path(name_or_path)
    return loads_scenario(path.read_text(), path=path)


def load_preset(name) -> Scenario:
    return load_scenario(name)


def load_estimator_config(path) -> EstimatorConfig:
    """Read an estimator block from either a full scenario file or a bare YAML mapping."""
    path = Path(path)
    try:
        text = path.read_text()
        data = yaml.safe_load(text)
    except OSError as e:
        raise ParseError(str(e), path=path)
    except yaml.YAMLError as e:
        raise ParseError(f"invalid YAML: {e}", path=path)
    if not isinstance(data, dict):
        raise ParseError("expected a mapping", path=path)
    if "estimator" in data and isinstance(data["estimator"], dict):
        data = data["estimator"]
    r = _Reader(_line_index(text), path)
    r.check_keys(data, _ESTIMATOR_KEYS, "estimator")
    kwargs = r.numbers(data, "estimator", ["mu_min", "mu_max", "sigma_p", "sigma_o", "cf_target",
                                           "resample_threshold_fraction"])
    kwargs.update(r.numbers(data, "estimator", ["num_particles", "rng_seed"], cast=int))
    try:
        return EstimatorConfig(**kwargs)
    except InvalidConfig as e:
        raise ValidationError(str(e), "estimator")
