"""Microphone and array geometry construction.

Three array builders: the 8-mic unidirectional small array (tetragonal
trapezohedron), the 64-mic composite array of eight small arrays, and the
64-mic rigid-sphere array on embedded spherical 7-design nodes. Geometries
serialize to a JSON format whose positions are decimal strings with 12
significant digits; builders quantize coordinates to the same precision so
files round-trip bit-identically.
"""

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .special import sh_row
from .utils import (
    cart2sph,
    format_significant,
    quantize_significant,
    rotation_matrix_z,
    unit,
)

SQRT_4PI = math.sqrt(4.0 * math.pi)

GEOMETRY_FORMAT_VERSION = 1

DEFAULT_SMALL_RADIUS = 0.015  # not stated in the source material; commercial
#                               2nd-order ambisonics mics are about this size
DEFAULT_RING_RADIUS = 0.145
DEFAULT_RING_HEIGHT = 0.025
DEFAULT_BETA = 0.5
DEFAULT_BAFFLE_RADIUS = 0.145


@dataclass(frozen=True)
class Microphone:
    """A directional microphone: position, directivity peak, SH directivity.

    ``dir_coeffs`` are the expansion coefficients c of the directivity
    pattern; the observation of a field with local coefficients a is
    conj(c) . a. Length must be a perfect square (order-complete).
    """

    position: np.ndarray
    orientation: np.ndarray
    dir_coeffs: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        ori = np.asarray(self.orientation, dtype=float)
        c = np.asarray(self.dir_coeffs, dtype=complex)
        if pos.shape != (3,) or ori.shape != (3,):
            raise ValueError("position and orientation must be 3-vectors")
        if not math.isclose(np.linalg.norm(ori), 1.0, rel_tol=1e-6):
            raise ValueError("orientation must be a unit vector")
        order = math.isqrt(c.size) - 1
        if (order + 1) ** 2 != c.size:
            raise ValueError("dir_coeffs length must be a perfect square")
        for a in (pos, ori, c):
            a.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", ori)
        object.__setattr__(self, "dir_coeffs", c)

    @property
    def directivity_order(self):
        return math.isqrt(self.dir_coeffs.size) - 1


@dataclass(frozen=True)
class RigidBaffle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (3,):
            raise ValueError("baffle center must be a 3-vector")
        if not self.radius > 0:
            raise ValueError("baffle radius must be positive")
        c.flags.writeable = False
        object.__setattr__(self, "center", c)


@dataclass(frozen=True)
class ArrayGeometry:
    mics: tuple
    baffle: RigidBaffle | None = None

    def __post_init__(self):
        object.__setattr__(self, "mics", tuple(self.mics))
        if self.baffle is not None:
            for mic in self.mics:
                r = np.linalg.norm(mic.position - self.baffle.center)
                if abs(r - self.baffle.radius) > 1e-9:
                    raise ValueError("all microphones must lie on the rigid baffle surface")

    @property
    def n_mics(self):
        return len(self.mics)

    def positions(self):
        return np.array([m.position for m in self.mics])

    def content_hash(self):
        import hashlib

        return hashlib.sha256(geometry_to_json(self).encode()).hexdigest()


def cardioid_coeffs(beta, orientation):
    """Directivity SH coefficients of beta + (1 - beta) <eta, orientation>.

    ``eta`` is the arrival direction of the incident wave (pointing from the
    microphone toward the source); beta = 1 is omnidirectional, beta = 1/2 a
    cardioid with a rear null. Returns length-4 complex vector
    [beta, c_1^-1, c_1^0, c_1^1] with
    c_1^m = (sqrt(4 pi) j / 3) (1 - beta) conj(Y_1^m(orientation)).
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    ori = unit(orientation)
    _, theta, phi = cart2sph(ori)
    first = (SQRT_4PI * 1j / 3.0) * (1.0 - beta) * np.conj(sh_row(1, theta, phi))
    return np.concatenate([[beta + 0.0j], first])


def _quantized(vec):
    return np.array([quantize_significant(x) for x in vec])


def _trapezohedron_vertices(radius):
    """Tetragonal trapezohedron: squares at z = +-r/sqrt(3), lower twisted 45 deg."""
    h = radius / math.sqrt(3.0)
    rho = radius * math.sqrt(2.0 / 3.0)
    verts = []
    for az in (45.0, 135.0, 225.0, 315.0):
        a = math.radians(az)
        verts.append([rho * math.cos(a), rho * math.sin(a), h])
    for az in (0.0, 90.0, 180.0, 270.0):
        a = math.radians(az)
        verts.append([rho * math.cos(a), rho * math.sin(a), -h])
    return np.array(verts)


def build_small_array(center=(0.0, 0.0, 0.0), yaw=0.0, radius=DEFAULT_SMALL_RADIUS, beta=DEFAULT_BETA):
    """8 outward-oriented cardioid mics on tetragonal-trapezohedron vertices."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float)
    rz = rotation_matrix_z(yaw)
    mics = []
    for v in _trapezohedron_vertices(radius):
        v = rz @ v
        ori = v / np.linalg.norm(v)
        mics.append(
            Microphone(
                position=_quantized(center + v),
                orientation=_quantized(ori),
                dir_coeffs=cardioid_coeffs(beta, ori),
            )
        )
    return ArrayGeometry(mics=tuple(mics))


def build_composite_array(
    center=(0.0, 0.0, 0.0),
    beta=DEFAULT_BETA,
    small_radius=DEFAULT_SMALL_RADIUS,
    ring_radius=DEFAULT_RING_RADIUS,
    ring_height=DEFAULT_RING_HEIGHT,
):
    """Composite array: 4 small arrays per ring at two heights, 64 mics total.

    Small arrays sit equiangularly (azimuths 0/90/180/270 at both heights) on
    the ring of ``ring_radius`` at z = +-ring_height, each yawed by its own
    azimuth so the whole geometry is covariant under 90-degree rotation.
    """
    center = np.asarray(center, dtype=float)
    mics = []
    for zsign in (+1.0, -1.0):
        for az_deg in (0.0, 90.0, 180.0, 270.0):
            az = math.radians(az_deg)
            sub_center = center + np.array(
                [ring_radius * math.cos(az), ring_radius * math.sin(az), zsign * ring_height]
            )
            sub = build_small_array(center=sub_center, yaw=az, radius=small_radius, beta=beta)
            mics.extend(sub.mics)
    return ArrayGeometry(mics=tuple(mics))


def tdesign_nodes():
    """Embedded 64-node spherical 7-design (unit vectors, shape (64, 3))."""
    with resources.files("binrender").joinpath("data/tdesign_t7_n64.json").open() as f:
        asset = json.load(f)
    nodes = np.array([[float(c) for c in row] for row in asset["nodes"]])
    return nodes / np.linalg.norm(nodes, axis=1)[:, None]


def build_rigid_sphere_array(center=(0.0, 0.0, 0.0), radius=DEFAULT_BAFFLE_RADIUS):
    """64 omnidirectional mics on a rigid sphere at spherical 7-design nodes."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float)
    omni = np.array([1.0 + 0.0j])
    mics = []
    for node in tdesign_nodes():
        mics.append(
            Microphone(
                position=_quantized(center + radius * node),
                orientation=_quantized(node),
                dir_coeffs=omni,
            )
        )
    baffle = RigidBaffle(center=_quantized(center), radius=quantize_significant(radius))
    return ArrayGeometry(mics=tuple(mics), baffle=baffle)


# ---------------------------------------------------------------------------
# Geometry JSON format
# ---------------------------------------------------------------------------

def _vec_strings(vec):
    return [format_significant(x) for x in vec]


def geometry_to_json(geom: ArrayGeometry) -> str:
    doc = {
        "format": "binrender-geometry",
        "version": GEOMETRY_FORMAT_VERSION,
        "mics": [
            {
                "pos": _vec_strings(m.position),
                "orient": _vec_strings(m.orientation),
                "dir_coeffs": [[c.real, c.imag] for c in m.dir_coeffs],
            }
            for m in geom.mics
        ],
    }
    if geom.baffle is not None:
        doc["baffle"] = {
            "type": "rigid_sphere",
            "center": _vec_strings(geom.baffle.center),
            "radius": format_significant(geom.baffle.radius),
        }
    return json.dumps(doc, indent=1, sort_keys=True)


def geometry_from_json(text: str) -> ArrayGeometry:
    doc = json.loads(text)
    if doc.get("format") != "binrender-geometry":
        raise ValueError("not a geometry document")
    if doc.get("version") != GEOMETRY_FORMAT_VERSION:
        raise ValueError(f"unsupported geometry format version {doc.get('version')}")
    mics = []
    for entry in doc["mics"]:
        if "dir_coeffs" in entry:
            coeffs = np.array([complex(re, im) for re, im in entry["dir_coeffs"]])
        elif "beta" in entry:
            coeffs = cardioid_coeffs(float(entry["beta"]), [float(x) for x in entry["orient"]])
        else:
            raise ValueError("microphone entry needs dir_coeffs or beta")
        mics.append(
            Microphone(
                position=np.array([float(x) for x in entry["pos"]]),
                orientation=np.array([float(x) for x in entry["orient"]]),
                dir_coeffs=coeffs,
            )
        )
    baffle = None
    if "baffle" in doc:
        b = doc["baffle"]
        if b.get("type") != "rigid_sphere":
            raise ValueError(f"unknown baffle type {b.get('type')}")
        baffle = RigidBaffle(
            center=np.array([float(x) for x in b["center"]]),
            radius=float(b["radius"]),
        )
    return ArrayGeometry(mics=tuple(mics), baffle=baffle)


def save_geometry(geom: ArrayGeometry, path):
    with open(path, "w") as f:
        f.write(geometry_to_json(geom))


def load_geometry(path) -> ArrayGeometry:
    with open(path) as f:
        return geometry_from_json(f.read())
