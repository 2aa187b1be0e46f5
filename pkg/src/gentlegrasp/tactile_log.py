"""Line-delimited tactile patch logs for offline replay.

Format (schema_version 1)::

    # {"schema_version": 1, "surface": {"flat": {"normal": [0.0, 0.0, 1.0]}}}
    t, x1, y1, z1, fx1, fy1, fz1, dA1, x2, y2, ...

One patch per line, comma separated; forces are tractions (N/mm^2), areas in
mm^2. The optional ``#`` header names the sensor surface used for element
normals; without it a flat z-up surface is assumed. Other ``#`` lines and
blank lines are ignored.
"""
import json

import numpy as np

from .contact import ContactPatch, FlatPlane, HeightField, Sphere
from .exceptions import EmptyLog, ParseError

SCHEMA_VERSION = 1
VALUES_PER_ELEMENT = 7


def surface_to_dict(surface):
    if isinstance(surface, FlatPlane):
        return {"flat": {"normal": list(surface.normal)}}
    if isinstance(surface, Sphere):
        return {"sphere": {"center": list(surface.center), "radius": surface.radius}}
    if isinstance(surface, HeightField):
        return {"height_field": {"x": surface.x.tolist(), "y": surface.y.tolist(), "z": surface.z.tolist()}}
    raise TypeError(f"unknown surface type {type(surface).__name__}")


def surface_from_dict(spec):
    (kind, p), = spec.items()
    if kind == "flat":
        return FlatPlane(tuple(p["normal"]))
    if kind == "sphere":
        return Sphere(tuple(p["center"]), p["radius"])
    if kind == "height_field":
        return HeightField(p["x"], p["y"], p["z"])
    raise ValueError(f"unknown surface kind {kind!r}")


def header_line(surface) -> str:
    return "# " + json.dumps({"schema_version": SCHEMA_VERSION, "surface": surface_to_dict(surface)})


def patch_line(t, patch: ContactPatch) -> str:
    flat = np.column_stack([patch.positions, patch.forces, patch.areas]).ravel()
    return ",".join([repr(float(t))] + [repr(float(v)) for v in flat])


class PatchLogWriter:
    """Append patches to an open text file; usable as a ``run_episode`` patch sink."""

    def __init__(self, fh, surface):
        self.fh = fh
        fh.write(header_line(surface) + "\n")

    def __call__(self, t, patch):
        self.fh.write(patch_line(t, patch) + "\n")


def parse_log(text, path=None):
    """Return a list of ``(t, ContactPatch)``; raises ParseError or EmptyLog."""
    surface = FlatPlane()
    out = []
    n_elements = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("{"):
                try:
                    meta = json.loads(body)
                    if meta.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
                        raise ParseError("unsupported schema_version", field="schema_version", line=lineno, path=path)
                    if "surface" in meta:
                        surface = surface_from_dict(meta["surface"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                    raise ParseError(f"bad header: {e}", line=lineno, path=path)
            continue
        try:
            values = np.array([float(v) for v in line.split(",")])
        except ValueError as e:
            raise ParseError(f"non-numeric value: {e}", line=lineno, path=path)
        body = values[1:]
        if len(body) == 0 or len(body) % VALUES_PER_ELEMENT:
            raise ParseError(
                f"expected t followed by groups of {VALUES_PER_ELEMENT} values, got {len(values)} values",
                line=lineno, path=path,
            )
        if not np.all(np.isfinite(values)):
            raise ParseError("non-finite value", line=lineno, path=path)
        elems = body.reshape(-1, VALUES_PER_ELEMENT)
        if n_elements is not None and len(elems) != n_elements:
            raise ParseError(f"element count changed from {n_elements} to {len(elems)}", line=lineno, path=path)
        n_elements = len(elems)
        try:
            patch = ContactPatch(elems[:, 0:3], elems[:, 3:6], elems[:, 6], surface)
        except ValueError as e:
            raise ParseError(str(e), line=lineno, path=path)
        out.append((float(values[0]), patch))
    if not out:
        raise EmptyLog(f"{path or 'log'}: no patch records")
    return out
