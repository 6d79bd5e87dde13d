"""Dome surface, the (A, B) chart, and the sensor layout cases.

The sensing surface is a spherical cap centred on the +z axis of a sphere
whose centre is the origin.  Chart coordinates (A, B) in
``[-h, h]**2`` are mapped onto the cap by an equal-area composite:

    square --(concentric map)--> unit disc --(Lambert-type map)--> cap

Both stages have a constant Jacobian, so equal chart cells cover equal
spherical areas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

QUARTER_PI = math.pi / 4.0

LINE_A_EQ_NEG_B = "line_a_eq_neg_b"
LINE_A_EQ_0 = "line_a_eq_0"
SYMMETRIES = (LINE_A_EQ_NEG_B, LINE_A_EQ_0)

CENTRAL_WITH_PLATFORM = "central_with_platform"
CENTRAL = "central"
RING = "ring"
LAYOUTS = (CENTRAL_WITH_PLATFORM, CENTRAL, RING)

# case id -> (layout, mounting angle in degrees)
CASE_TABLE = {
    1: (CENTRAL_WITH_PLATFORM, 25.0),
    2: (CENTRAL, 0.0),
    3: (CENTRAL, -25.0),
    4: (CENTRAL, 25.0),
    5: (RING, 15.0),
    6: (RING, 25.0),
    7: (RING, 30.0),
    8: (RING, 35.0),
    9: (RING, 40.0),
    10: (RING, 45.0),
}

SENSOR_COUNT = 5


class GeometryError(ValueError):
    """Raised for out-of-chart input or an unsolvable sensor placement."""


@dataclass(frozen=True)
class DomeSpec:
    sphere_radius: float = 27.0
    cap_half_aperture: float = 45.0
    chart_halfwidth: float = 15.0

    def __post_init__(self):
        if not self.sphere_radius > 0:
            raise GeometryError(f"sphere_radius must be > 0, got {self.sphere_radius}")
        if not 0 < self.cap_half_aperture <= 90:
            raise GeometryError(
                f"cap_half_aperture must be in (0, 90], got {self.cap_half_aperture}"
            )
        if not self.chart_halfwidth > 0:
            raise GeometryError(f"chart_halfwidth must be > 0, got {self.chart_halfwidth}")

    @property
    def max_polar(self) -> float:
        """Cap half aperture in radians."""
        return math.radians(self.cap_half_aperture)

    @property
    def one_minus_cos(self) -> float:
        # 2 sin^2(x/2) keeps precision for small apertures
        return 2.0 * math.sin(self.max_polar / 2.0) ** 2

    @property
    def cap_area(self) -> float:
        return 2.0 * math.pi * self.sphere_radius**2 * self.one_minus_cos

    @property
    def base_height(self) -> float:
        """z of the plane that closes the cap (the base plate)."""
        return self.sphere_radius * math.cos(self.max_polar)

    def to_json(self) -> dict:
        return {
            "radius_mm": self.sphere_radius,
            "aperture_deg": self.cap_half_aperture,
            "chart_halfwidth": self.chart_halfwidth,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DomeSpec":
        return cls(
            sphere_radius=float(data["radius_mm"]),
            cap_half_aperture=float(data["aperture_deg"]),
            chart_halfwidth=float(data["chart_halfwidth"]),
        )


@dataclass(frozen=True)
class SurfacePoint:
    a: float
    b: float
    position: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True)
class ChartGrid:
    per_axis_count: int
    locations: np.ndarray  # (n, 2), row-major: b varies fastest

    def __len__(self):
        return len(self.locations)

    @property
    def axis(self) -> np.ndarray:
        return np.unique(self.locations[:, 0])


# ---------------------------------------------------------------------------
# chart <-> disc <-> cap


def square_to_disc(u, v):
    """Concentric (Shirley-Chiu) map from ``[-1, 1]**2`` onto the unit disc.

    Area scales by the constant pi/4.  Vectorised over numpy arrays.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    au, av = np.abs(u), np.abs(v)
    wide = au > av
    safe_u = np.where(u == 0.0, 1.0, u)
    safe_v = np.where(v == 0.0, 1.0, v)
    r = np.where(wide, u, v)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        phi = np.where(wide, QUARTER_PI * (v / safe_u), 2.0 * QUARTER_PI - QUARTER_PI * (u / safe_v))
    x = r * np.cos(phi)
    y = r * np.sin(phi)
    origin = (au == 0.0) & (av == 0.0)
    return np.where(origin, 0.0, x), np.where(origin, 0.0, y)


def disc_to_square(x, y):
    """Inverse of :func:`square_to_disc`."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho = np.hypot(x, y)
    wide = np.abs(x) >= np.abs(y)
    safe_x = np.where(x == 0.0, 1.0, x)
    safe_y = np.where(y == 0.0, 1.0, y)
    u_w = np.copysign(rho, x)
    v_t = np.copysign(rho, y)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        v_w = u_w * np.arctan(y / safe_x) / QUARTER_PI
        u_t = v_t * np.arctan(x / safe_y) / QUARTER_PI
    u = np.where(wide, u_w, u_t)
    v = np.where(wide, v_w, v_t)
    origin = rho == 0.0
    return np.where(origin, 0.0, u), np.where(origin, 0.0, v)


def chart_to_xyz(a, b, dome: DomeSpec = DomeSpec()) -> np.ndarray:
    """Vectorised chart -> cap mapping without range checks.

    Returns an array of shape ``np.broadcast(a, b).shape + (3,)``.
    """
    h = dome.chart_halfwidth
    x_d, y_d = square_to_disc(np.asarray(a, dtype=float) / h, np.asarray(b, dtype=float) / h)
    raw = x_d * x_d + y_d * y_d
    # corners can round past the rim by an ulp
    shrink = np.where(raw > 1.0, 1.0 / np.sqrt(np.maximum(raw, 1.0)), 1.0)
    x_d, y_d = x_d * shrink, y_d * shrink
    rho2 = np.minimum(raw, 1.0)
    c = dome.one_minus_cos
    # sin(polar) = rho * sqrt(c (2 - rho^2 c)); the rho factor is carried by x_d, y_d
    lateral = np.sqrt(c * (2.0 - rho2 * c))
    R = dome.sphere_radius
    return np.stack([R * x_d * lateral, R * y_d * lateral, R * (1.0 - rho2 * c)], axis=-1)


def xyz_to_chart(points, dome: DomeSpec = DomeSpec()) -> np.ndarray:
    """Inverse of :func:`chart_to_xyz` for points on (or radially above) the cap.

    Points are first projected radially onto the sphere.  Polar angles past
    the rim are clamped to the rim.
    """
    p = np.asarray(points, dtype=float)
    norm = np.linalg.norm(p, axis=-1, keepdims=True)
    unit = p / norm
    # rho^2 = (1 - cos) / c = sin^2 / ((1 + cos) c), free of cancellation at the apex
    scale = 1.0 / np.sqrt((1.0 + unit[..., 2]) * dome.one_minus_cos)
    x_d = unit[..., 0] * scale
    y_d = unit[..., 1] * scale
    rho = np.hypot(x_d, y_d)
    shrink = np.where(rho > 1.0, 1.0 / np.maximum(rho, 1.0), 1.0)
    u, v = disc_to_square(x_d * shrink, y_d * shrink)
    return np.stack([u, v], axis=-1) * dome.chart_halfwidth


def polar_angle(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    return np.arctan2(np.hypot(p[..., 0], p[..., 1]), p[..., 2])


def check_in_chart(a: float, b: float, dome: DomeSpec) -> None:
    h = dome.chart_halfwidth
    for name, value in (("a", a), ("b", b)):
        if not math.isfinite(value) or abs(value) > h:
            raise GeometryError(f"chart coordinate {name}={value!r} outside [-{h}, {h}]")


def map_ab_to_surface(a: float, b: float, dome: DomeSpec = DomeSpec()) -> SurfacePoint:
    """Map one chart location onto the cap."""
    check_in_chart(a, b, dome)
    position = chart_to_xyz(a, b, dome)
    return SurfacePoint(
        a=float(a), b=float(b), position=position, normal=position / np.linalg.norm(position)
    )


def clamp_to_chart(ab, dome: DomeSpec = DomeSpec()):
    """Clamp chart pairs to the chart square; returns (clamped, was_clamped mask)."""
    ab = np.asarray(ab, dtype=float)
    h = dome.chart_halfwidth
    clipped = np.clip(ab, -h, h)
    return clipped, np.any(clipped != ab, axis=-1)


# ---------------------------------------------------------------------------
# sampling locations


def chart_axis(per_axis: int, halfwidth: float) -> np.ndarray:
    # exact sign symmetry: axis[i] == -axis[n - 1 - i]
    i = np.arange(per_axis, dtype=float)
    return halfwidth * (2.0 * i - (per_axis - 1)) / (per_axis - 1)


def make_training_grid(dome: DomeSpec = DomeSpec(), per_axis: int = 16) -> ChartGrid:
    if per_axis < 2:
        raise GeometryError(f"per_axis must be >= 2, got {per_axis}")
    axis = chart_axis(per_axis, dome.chart_halfwidth)
    aa, bb = np.meshgrid(axis, axis, indexing="ij")
    return ChartGrid(per_axis, np.column_stack([aa.ravel(), bb.ravel()]))


def make_test_locations(dome: DomeSpec = DomeSpec(), count: int = 100, seed: int = 0) -> np.ndarray:
    """``count`` chart pairs drawn uniformly from the chart square."""
    if count < 1:
        raise GeometryError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    h = dome.chart_halfwidth
    return rng.uniform(-h, h, size=(count, 2))


# ---------------------------------------------------------------------------
# symmetry


def reflect_ab(a, b, symmetry: str):
    if symmetry == LINE_A_EQ_NEG_B:
        return -np.asarray(b, dtype=float) + 0.0, -np.asarray(a, dtype=float) + 0.0
    if symmetry == LINE_A_EQ_0:
        return -np.asarray(a, dtype=float) + 0.0, np.asarray(b, dtype=float) + 0.0
    raise GeometryError(f"unknown symmetry {symmetry!r}")


def reflect_xyz(points, symmetry: str) -> np.ndarray:
    """3D reflection matching :func:`reflect_ab` under the chart mapping."""
    p = np.asarray(points, dtype=float)
    if symmetry == LINE_A_EQ_NEG_B:
        return np.stack([-p[..., 1], -p[..., 0], p[..., 2]], axis=-1)
    if symmetry == LINE_A_EQ_0:
        return np.stack([-p[..., 0], p[..., 1], p[..., 2]], axis=-1)
    raise GeometryError(f"unknown symmetry {symmetry!r}")


def side_of_line(ab, symmetry: str) -> np.ndarray:
    """-1, 0 or +1 for each chart pair relative to the symmetry line."""
    ab = np.asarray(ab, dtype=float)
    if symmetry == LINE_A_EQ_NEG_B:
        return np.sign(ab[..., 0] + ab[..., 1])
    if symmetry == LINE_A_EQ_0:
        return np.sign(ab[..., 0])
    raise GeometryError(f"unknown symmetry {symmetry!r}")


def symmetry_line(symmetry: str, dome: DomeSpec, step_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Equally spaced chart points along the symmetry line.

    Returns ``(s, ab)`` where ``s`` is the signed position along the line in
    chart units of the free coordinate.
    """
    s = np.linspace(-dome.chart_halfwidth, dome.chart_halfwidth, step_count)
    if symmetry == LINE_A_EQ_NEG_B:
        return s, np.column_stack([s, -s])
    if symmetry == LINE_A_EQ_0:
        return s, np.column_stack([np.zeros_like(s), s])
    raise GeometryError(f"unknown symmetry {symmetry!r}")


# ---------------------------------------------------------------------------
# sensor layouts


@dataclass(frozen=True)
class PlacementParams:
    """Free parameters of the sensor construction (lengths in mm).

    sensor_height: sampling-point height above the base plane.
    surface_standoff: distance along each peripheral sensor's normal to the cap.
    central_recess: how far the central sensor of a positive-angle central
        layout sits below ``sensor_height`` when it has no platform.
    """

    sensor_height: float = 1.0
    surface_standoff: float = 2.0
    central_recess: float = 0.5


@dataclass(frozen=True)
class SensorConfig:
    case_id: int | str
    layout: str
    mounting_angle: float
    positions: np.ndarray  # (5, 3) mm
    normals: np.ndarray  # (5, 3) unit
    symmetry: str | None
    mirror_permutation: tuple[int, ...] | None
    surface_standoff: float
    sensor_count: int = field(default=SENSOR_COUNT)

    def to_json(self) -> dict:
        return {
            "case": self.case_id,
            "layout": self.layout,
            "mounting_angle_deg": self.mounting_angle,
            "surface_standoff_mm": self.surface_standoff,
            "sensors": [
                {"position_mm": [float(c) for c in p], "normal": [float(c) for c in n]}
                for p, n in zip(self.positions, self.normals)
            ],
            "symmetry": self.symmetry,
            "mirror_permutation": (
                None if self.mirror_permutation is None else list(self.mirror_permutation)
            ),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SensorConfig":
        try:
            sensors = data["sensors"]
            positions = np.array([s["position_mm"] for s in sensors], dtype=float)
            normals = np.array([s["normal"] for s in sensors], dtype=float)
            perm = data.get("mirror_permutation")
            config = cls(
                case_id=data["case"],
                layout=data["layout"],
                mounting_angle=float(data["mounting_angle_deg"]),
                positions=positions,
                normals=normals,
                symmetry=data.get("symmetry"),
                mirror_permutation=None if perm is None else tuple(int(i) for i in perm),
                surface_standoff=float(data["surface_standoff_mm"]),
            )
        except (KeyError, TypeError) as exc:
            raise GeometryError(f"malformed sensor config: {exc}") from exc
        validate_config(config)
        return config


def validate_config(config: SensorConfig) -> None:
    if config.positions.shape != (SENSOR_COUNT, 3) or config.normals.shape != (SENSOR_COUNT, 3):
        raise GeometryError(f"config needs exactly {SENSOR_COUNT} sensors with 3D vectors")
    if not np.allclose(np.linalg.norm(config.normals, axis=1), 1.0, atol=1e-9):
        raise GeometryError("sensor normals must be unit vectors")
    if config.layout not in LAYOUTS:
        raise GeometryError(f"unknown layout {config.layout!r}")
    if config.symmetry is not None and config.symmetry not in SYMMETRIES:
        raise GeometryError(f"unknown symmetry {config.symmetry!r}")
    perm = config.mirror_permutation
    if perm is not None:
        if sorted(perm) != list(range(SENSOR_COUNT)):
            raise GeometryError(f"mirror_permutation {perm} is not a permutation")
        if any(perm[perm[i]] != i for i in range(SENSOR_COUNT)):
            raise GeometryError(f"mirror_permutation {perm} is not an involution")


def ray_to_cap(origin, direction, dome: DomeSpec) -> float:
    """Distance along ``direction`` from an interior ``origin`` to the sphere.

    Returns ``inf`` when the ray leaves through the base plane instead of
    the cap.
    """
    s = np.asarray(origin, dtype=float)
    n = np.asarray(direction, dtype=float)
    R = dome.sphere_radius
    sn = float(s @ n)
    disc = sn * sn - (float(s @ s) - R * R)
    t = -sn + math.sqrt(max(disc, 0.0))
    hit = s + t * n
    if hit[2] < dome.base_height - 1e-9:
        return math.inf
    return t


def inside_volume(point, dome: DomeSpec) -> bool:
    p = np.asarray(point, dtype=float)
    return bool(np.linalg.norm(p) < dome.sphere_radius and p[2] > dome.base_height)


def _tilted_normal(azimuth: float, mounting_angle: float) -> np.ndarray:
    # positive angle tips the normal toward the dome axis
    th = math.radians(mounting_angle)
    return np.array(
        [-math.sin(th) * math.cos(azimuth), -math.sin(th) * math.sin(azimuth), math.cos(th)]
    )


def solve_radial_distance(
    azimuth: float,
    mounting_angle: float,
    z: float,
    standoff: float,
    dome: DomeSpec,
    *,
    label: str = "",
) -> float:
    """Radial distance at which a sensor at height ``z`` sees the cap at ``standoff``.

    Bisection on ``[0, r_max)`` where ``r_max`` puts the sampling point on
    the sphere.  The standoff goes to zero at ``r_max``.
    """
    normal = _tilted_normal(azimuth, mounting_angle)
    R = dome.sphere_radius
    r_max = math.sqrt(R * R - z * z)
    direction = np.array([math.cos(azimuth), math.sin(azimuth), 0.0])

    def excess(r):
        s = r * direction + np.array([0.0, 0.0, z])
        return ray_to_cap(s, normal, dome) - standoff

    lo, hi = 0.0, r_max * (1.0 - 1e-12)
    f_lo = excess(lo)
    if not f_lo > 0:
        raise GeometryError(
            f"{label}: standoff {standoff} mm unreachable (at the axis the cap is "
            f"{f_lo + standoff:.3f} mm away)"
        )
    if excess(hi) > 0:
        raise GeometryError(f"{label}: no radial distance reaches standoff {standoff} mm")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def _layout_azimuths(layout: str) -> np.ndarray:
    if layout == RING:
        return np.radians(90.0 + 72.0 * np.arange(5))
    return np.radians(90.0 * np.arange(4))


def build_case(
    case_id: int,
    dome: DomeSpec = DomeSpec(),
    placement: PlacementParams = PlacementParams(),
) -> SensorConfig:
    """Construct one of the ten numbered layouts.

    Central layouts put sensor 0 on the axis facing straight up and four
    peripheral sensors at azimuths 0, 90, 180, 270 degrees.  Ring layouts
    put all five sensors at azimuths 90 + 72k degrees.  Every tilted sensor
    is pushed out radially until its normal ray meets the cap at
    ``placement.surface_standoff``.
    """
    if case_id not in CASE_TABLE:
        raise GeometryError(f"case_id must be in 1..10, got {case_id!r}")
    layout, angle = CASE_TABLE[case_id]
    z_s = dome.base_height + placement.sensor_height
    if z_s >= dome.sphere_radius:
        raise GeometryError(f"case {case_id}: sensor plane above the cap apex")

    positions, normals = [], []
    if layout != RING:
        z_c = z_s
        if layout == CENTRAL and angle > 0:
            z_c = z_s - placement.central_recess
        centre = np.array([0.0, 0.0, z_c])
        if not inside_volume(centre, dome):
            raise GeometryError(f"case {case_id}, sensor 0: sampling point outside the dome volume")
        positions.append(centre)
        normals.append(np.array([0.0, 0.0, 1.0]))
        symmetry = LINE_A_EQ_NEG_B
    else:
        symmetry = LINE_A_EQ_0

    for k, az in enumerate(_layout_azimuths(layout)):
        index = len(positions)
        label = f"case {case_id}, sensor {index}"
        r = solve_radial_distance(az, angle, z_s, placement.surface_standoff, dome, label=label)
        p = np.array([r * math.cos(az), r * math.sin(az), z_s])
        if not inside_volume(p, dome):
            raise GeometryError(f"{label}: sampling point outside the dome volume")
        positions.append(p)
        normals.append(_tilted_normal(az, angle))

    config = SensorConfig(
        case_id=case_id,
        layout=layout,
        mounting_angle=angle,
        positions=np.array(positions),
        normals=np.array(normals),
        symmetry=symmetry,
        mirror_permutation=None,
        surface_standoff=placement.surface_standoff,
    )
    perm = sensor_mirror_permutation(config)
    config = SensorConfig(**{**config.__dict__, "mirror_permutation": perm})
    validate_config(config)
    return config


def sensor_mirror_permutation(config: SensorConfig, tol: float = 1e-9) -> tuple[int, ...]:
    """Sensor index map induced by the configuration's reflection.

    ``perm[j]`` is the sensor that sensor ``j`` lands on when the whole
    layout is reflected about the symmetry plane.
    """
    if config.symmetry is None:
        raise GeometryError(f"case {config.case_id}: configuration declares no symmetry")
    ref_pos = reflect_xyz(config.positions, config.symmetry)
    ref_nrm = reflect_xyz(config.normals, config.symmetry)
    perm = []
    for j in range(len(config.positions)):
        mismatch = np.linalg.norm(config.positions - ref_pos[j], axis=1) + np.linalg.norm(
            config.normals - ref_nrm[j], axis=1
        )
        k = int(np.argmin(mismatch))
        if mismatch[k] > tol * max(1.0, float(np.abs(config.positions).max())):
            raise GeometryError(
                f"case {config.case_id}: sensor {j} has no mirror image under {config.symmetry}"
            )
        perm.append(k)
    if sorted(perm) != list(range(len(perm))):
        raise GeometryError(f"case {config.case_id}: reflection does not permute the sensors")
    return tuple(perm)


def surface_projection(positions, dome: DomeSpec = DomeSpec()) -> np.ndarray:
    """Points on the sphere radially above the given interior points."""
    p = np.atleast_2d(np.asarray(positions, dtype=float))
    return dome.sphere_radius * p / np.linalg.norm(p, axis=1, keepdims=True)


def chart_of(points: Sequence, dome: DomeSpec = DomeSpec()) -> np.ndarray:
    return xyz_to_chart(np.atleast_2d(np.asarray(points, dtype=float)), dome)
