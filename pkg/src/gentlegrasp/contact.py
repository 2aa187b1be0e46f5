"""Tactile contact model: surface normals, force decomposition, MER resultants.

Forces are per-element tractions (N/mm^2) so that the area-weighted sums
come out in newtons. The resultants use magnitudes, so the sign of the
normal (outward from the sensor into the object) does not affect them.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .exceptions import DegenerateGradient, EmptyPatch, NoContact
from .validation import as_points, as_vector3, check_unit

NO_CONTACT_EPS = 1e-6  # N, below this the normal resultant counts as no contact
_GRAD_EPS = 1e-12


@dataclass(frozen=True)
class FlatPlane:
    normal: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(check_unit(self.normal).tolist()))


@dataclass(frozen=True)
class Sphere:
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(as_vector3(self.center, "center").tolist()))
        if not self.radius > 0:
            raise ValueError(f"sphere radius must be > 0, got {self.radius!r}")


@dataclass(frozen=True, eq=False)
class HeightField:
    """Surface z = h(x, y) sampled on a rectilinear grid, ``z[i, j] = h(x[i], y[j])``."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    _interp: tuple = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if z.shape != (x.size, y.size) or x.size < 2 or y.size < 2:
            raise ValueError(f"height grid shape {z.shape} does not match axes ({x.size}, {y.size})")
        dzdx, dzdy = np.gradient(z, x, y)
        opts = dict(method="linear", bounds_error=False, fill_value=None)
        interp = (
            RegularGridInterpolator((x, y), z, **opts),
            RegularGridInterpolator((x, y), dzdx, **opts),
            RegularGridInterpolator((x, y), dzdy, **opts),
        )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "_interp", interp)

    def height(self, xy):
        return self._interp[0](np.atleast_2d(xy))

    def slope(self, xy):
        xy = np.atleast_2d(xy)
        return self._interp[1](xy), self._interp[2](xy)


SurfaceDescriptor = Union[FlatPlane, Sphere, HeightField]


class SlipState(str, Enum):
    STICK = "stick"
    SLIP = "slip"


@dataclass(frozen=True)
class TactileElement:
    position: tuple
    force: tuple
    area: float

    def __post_init__(self):
        as_vector3(self.position, "position")
        as_vector3(self.force, "force")
        if not self.area > 0:
            raise ValueError(f"element area must be > 0, got {self.area!r}")


@dataclass(eq=False)
class ContactPatch:
    """A tactile frame: element positions (mm), tractions (N/mm^2) and areas (mm^2)."""

    positions: np.ndarray
    forces: np.ndarray
    areas: np.ndarray
    surface: SurfaceDescriptor = FlatPlane()
    normals: np.ndarray = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.forces = np.asarray(self.forces, dtype=float).reshape(-1, 3)
        self.areas = np.broadcast_to(np.asarray(self.areas, dtype=float), (len(self.positions),))
        if len(self.forces) != len(self.positions):
            raise ValueError("positions and forces must have the same number of elements")
        if np.any(self.areas <= 0):
            raise ValueError("element areas must be > 0")
        if self.normals is None and len(self.positions):
            self.normals = surface_normals(self.surface, self.positions)

    @classmethod
    def from_elements(cls, elements: Sequence[TactileElement], surface=FlatPlane()):
        if not elements:
            return cls(np.empty((0, 3)), np.empty((0, 3)), np.empty(0), surface)
        return cls(
            [e.position for e in elements],
            [e.force for e in elements],
            [e.area for e in elements],
            surface,
        )

    def __len__(self):
        return len(self.positions)


class MerForces(NamedTuple):
    normal: float
    tangential: float


def surface_normals(surface: SurfaceDescriptor, points) -> np.ndarray:
    """Unit normals of ``surface`` at each row of ``points``, shape (n, 3)."""
    points = as_points(points)
    if isinstance(surface, FlatPlane):
        return np.tile(np.asarray(surface.normal), (len(points), 1))
    if isinstance(surface, Sphere):
        grad = points - np.asarray(surface.center)
    elif isinstance(surface, HeightField):
        # S(x, y, z) = z - h(x, y)
        hx, hy = surface.slope(points[:, :2])
        grad = np.column_stack([-hx, -hy, np.ones(len(points))])
    else:
        raise TypeError(f"unknown surface type {type(surface).__name__}")
    norm = np.linalg.norm(grad, axis=1)
    if np.any(norm < _GRAD_EPS):
        bad = points[np.argmin(norm)]
        raise DegenerateGradient(f"surface gradient vanishes at {bad.tolist()}")
    return grad / norm[:, None]


def surface_normal(surface: SurfaceDescriptor, point) -> np.ndarray:
    return surface_normals(surface, point)[0]


def decompose_force(f, n):
    """Split ``f`` into components along and orthogonal to unit normal ``n``."""
    f = np.asarray(f, dtype=float)
    n = np.asarray(n, dtype=float)
    f_n = np.sum(f * n, axis=-1, keepdims=True) * n
    return f_n, f - f_n


def slip_state(f, n, mu) -> SlipState:
    """Coulomb test for one element. Stick requires mu*|f_n| > |f_t| strictly."""
    if not mu > 0:
        raise ValueError(f"friction coefficient must be > 0, got {mu!r}")
    f_n, f_t = decompose_force(as_vector3(f, "force"), check_unit(n))
    fn = float(np.linalg.norm(f_n))
    ft = float(np.linalg.norm(f_t))
    if fn == 0.0:
        return SlipState.STICK if ft == 0.0 else SlipState.SLIP
    return SlipState.STICK if mu * fn > ft else SlipState.SLIP


def element_magnitudes(patch: ContactPatch):
    """Per-element |f_n| and |f_t| (N/mm^2)."""
    along = np.einsum("ij,ij->i", patch.forces, patch.normals)
    tang = patch.forces - along[:, None] * patch.normals
    return np.abs(along), np.linalg.norm(tang, axis=1)


def mer_forces(patch: ContactPatch) -> MerForces:
    """Area-weighted sums of per-element normal and tangential magnitudes."""
    if len(patch) == 0:
        raise EmptyPatch("contact patch has no elements")
    normal_mag, tang_mag = element_magnitudes(patch)
    return MerForces(float(normal_mag @ patch.areas), float(tang_mag @ patch.areas))


def contact_coefficient(mer: MerForces, mu: float, clamp: bool = True) -> float:
    """Slip margin ``1 - F_t / (mu * F_n)``; clamped to [0, 1] unless ``clamp=False``."""
    if not mu > 0:
        raise ValueError(f"friction coefficient must be > 0, got {mu!r}")
    if not mer.normal > NO_CONTACT_EPS:
        raise NoContact(f"normal resultant {mer.normal!r} N is below {NO_CONTACT_EPS} N")
    cf = 1.0 - mer.tangential / (mu * mer.normal)
    if clamp:
        return min(1.0, max(0.0, cf))
    return cf
