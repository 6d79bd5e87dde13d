"""Analytic stand-in for the elastic forward model.

Each sensor responds to an indentation at surface point ``p`` and depth
``d`` as

    gain * (d / d_max)**depth_exponent
         * max(0, n . u)**angular_exponent
         * exp(-|p - s| / decay_length)
         * edge(p)
    + noise

with ``s`` the sampling point, ``n`` its normal, ``u`` the unit vector from
``s`` to ``p`` and ``edge`` a linear ramp that kills the response at the
cap rim.  It is a qualitative model, not a calibrated one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .geometry import (
    DomeSpec,
    GeometryError,
    SensorConfig,
    SurfacePoint,
    chart_to_xyz,
    polar_angle,
    reflect_ab,
    side_of_line,
    symmetry_line,
)

TRAIN_STREAM = 0
TEST_STREAM = 1


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SurrogateParams:
    gain: float = 1000.0
    depth_exponent: float = 1.2
    angular_exponent: float = 2.0
    decay_length: float = 10.0
    edge_width: float = 5.0
    noise_sigma: float = 5.0
    max_depth: float = 3.0

    def __post_init__(self):
        checks = [
            ("gain", self.gain > 0),
            ("depth_exponent", self.depth_exponent > 0),
            ("angular_exponent", self.angular_exponent >= 0),
            ("decay_length", self.decay_length > 0),
            ("edge_width", self.edge_width >= 0),
            ("noise_sigma", self.noise_sigma >= 0),
            ("max_depth", self.max_depth > 0),
        ]
        for name, ok in checks:
            if not ok:
                raise SimulationError(f"invalid surrogate parameter {name}={getattr(self, name)!r}")


@dataclass(frozen=True)
class Sample:
    a: float
    b: float
    depth: float
    contact: bool
    readings: np.ndarray


@dataclass
class Dataset:
    """Column-oriented indentation records.

    One row per measurement: chart location, depth, contact flag and the
    five channel readings.
    """

    ab: np.ndarray
    depth: np.ndarray
    contact: np.ndarray
    readings: np.ndarray
    config_ref: object = None
    provenance: str = "surrogate"
    tared: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ab = np.asarray(self.ab, dtype=float).reshape(-1, 2)
        self.depth = np.asarray(self.depth, dtype=float).reshape(-1)
        self.contact = np.asarray(self.contact, dtype=bool).reshape(-1)
        self.readings = np.asarray(self.readings, dtype=float).reshape(-1, 5)
        n = len(self.ab)
        if n == 0:
            raise SimulationError("empty dataset")
        if not (len(self.depth) == len(self.contact) == len(self.readings) == n):
            raise SimulationError("dataset columns have different lengths")
        if np.any(self.depth < 0):
            raise SimulationError("negative depth in dataset")
        if np.any(~self.contact & (self.depth != 0)):
            raise SimulationError("non-touch rows must have zero depth")
        if not np.all(np.isfinite(self.readings)):
            raise SimulationError("non-finite readings in dataset")

    def __len__(self):
        return len(self.ab)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    @property
    def samples(self) -> list[Sample]:
        return [
            Sample(float(a), float(b), float(d), bool(c), r.copy())
            for (a, b), d, c, r in zip(self.ab, self.depth, self.contact, self.readings)
        ]

    def subset(self, mask) -> "Dataset":
        return Dataset(
            self.ab[mask],
            self.depth[mask],
            self.contact[mask],
            self.readings[mask],
            self.config_ref,
            self.provenance,
            self.tared,
            dict(self.meta),
        )

    def training_rows(self, min_depth: float = 0.5) -> "Dataset":
        """Contact rows deep enough to carry location signal."""
        return self.subset(self.contact & (self.depth >= min_depth))

    def canonical_order(self) -> np.ndarray:
        """Row order sorted by (contact, a, b, depth)."""
        return np.lexsort((self.depth, self.ab[:, 1], self.ab[:, 0], self.contact))


# ---------------------------------------------------------------------------


def _edge_factor(points, dome: DomeSpec, edge_width_deg: float) -> np.ndarray:
    if edge_width_deg == 0:
        return np.ones(np.shape(points)[:-1])
    margin = np.degrees(dome.max_polar - polar_angle(points))
    return np.clip(margin / edge_width_deg, 0.0, 1.0)


def response(
    config: SensorConfig,
    points,
    depths,
    params: SurrogateParams = SurrogateParams(),
    dome: DomeSpec = DomeSpec(),
) -> np.ndarray:
    """Noise-free readings for many indentations at once, shape (n, 5)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.broadcast_to(np.asarray(depths, dtype=float), p.shape[:1])
    if np.any(d < 0) or np.any(d > params.max_depth):
        raise SimulationError(f"depth outside [0, {params.max_depth}] mm")
    diff = p[:, None, :] - config.positions[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    cos = np.einsum("njk,jk->nj", diff, config.normals) / dist
    align = np.maximum(cos, 0.0) ** params.angular_exponent
    depth_term = (d / params.max_depth) ** params.depth_exponent
    edge = _edge_factor(p, dome, params.edge_width)
    return (
        params.gain
        * depth_term[:, None]
        * align
        * np.exp(-dist / params.decay_length)
        * edge[:, None]
    )


def channel_noise(seed: int, stream: int, index: int, sigma: float) -> np.ndarray:
    """Gaussian noise for one row, keyed by (seed, stream, row index).

    Keying on the row index instead of drawing from one shared generator
    keeps the values independent of generation order.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, stream, index]))
    return sigma * rng.standard_normal(5)


def simulate_readings(
    config: SensorConfig,
    point: SurfacePoint,
    depth: float,
    params: SurrogateParams = SurrogateParams(),
    noise_seed: int | None = None,
    dome: DomeSpec = DomeSpec(),
) -> np.ndarray:
    """Five readings for a single indentation; noise only when a seed is given."""
    if not 0 <= depth <= params.max_depth:
        raise SimulationError(f"depth {depth} outside [0, {params.max_depth}] mm")
    r = response(config, point.position[None, :], [depth], params, dome)[0]
    if noise_seed is not None and params.noise_sigma > 0:
        r = r + channel_noise(noise_seed, 0, 0, params.noise_sigma)
    return r


def generate_dataset(
    config: SensorConfig,
    dome: DomeSpec,
    locations,
    depths,
    params: SurrogateParams = SurrogateParams(),
    seed: int = 0,
    mirror: bool = False,
    *,
    noise: bool = True,
    stream: int = TRAIN_STREAM,
) -> Dataset:
    """Simulate a full indentation protocol.

    For every location: one non-touch row, then one contact row per depth.
    With ``mirror`` only locations on or below the symmetry line are
    simulated; the rest are copied from their reflection with channels
    permuted, noise included.
    """
    locations = np.asarray(getattr(locations, "locations", locations), dtype=float).reshape(-1, 2)
    depths = np.asarray(depths, dtype=float).reshape(-1)
    if len(depths) == 0:
        raise SimulationError("depth schedule is empty")
    if np.any(depths < 0) or np.any(depths > params.max_depth):
        raise SimulationError(f"depth schedule outside [0, {params.max_depth}] mm")
    if len(locations) == 0:
        raise SimulationError("no locations to simulate")
    h = dome.chart_halfwidth
    if np.any(np.abs(locations) > h):
        raise GeometryError(f"locations outside the chart [-{h}, {h}]")

    per_loc = 1 + len(depths)
    n_loc = len(locations)
    ab = np.repeat(locations, per_loc, axis=0)
    depth = np.tile(np.concatenate([[0.0], depths]), n_loc)
    contact = np.tile(np.concatenate([[False], np.ones(len(depths), bool)]), n_loc)

    source = np.arange(n_loc)
    permute = np.zeros(n_loc, dtype=bool)
    if mirror:
        if config.symmetry is None or config.mirror_permutation is None:
            raise SimulationError(f"case {config.case_id}: mirroring needs a symmetric configuration")
        source, permute = _mirror_sources(locations, config.symmetry)

    # simulate only the rows whose location is its own source
    simulated = np.flatnonzero(source == np.arange(n_loc))
    readings = np.empty((n_loc * per_loc, 5))
    sim_rows = (simulated[:, None] * per_loc + np.arange(per_loc)).ravel()
    points = chart_to_xyz(ab[sim_rows, 0], ab[sim_rows, 1], dome)
    readings[sim_rows] = response(config, points, depth[sim_rows] * contact[sim_rows], params, dome)
    if noise and params.noise_sigma > 0:
        for row in sim_rows:
            readings[row] += channel_noise(seed, stream, int(row), params.noise_sigma)

    if mirror:
        perm = np.asarray(config.mirror_permutation)
        for loc in np.flatnonzero(permute):
            src = source[loc] * per_loc + np.arange(per_loc)
            dst = loc * per_loc + np.arange(per_loc)
            readings[dst] = readings[src][:, perm]

    return Dataset(
        ab,
        depth,
        contact,
        readings,
        config_ref=config.case_id,
        provenance="surrogate",
        meta={"seed": seed, "stream": stream, "mirror": bool(mirror), "noise": bool(noise)},
    )


def _mirror_sources(locations: np.ndarray, symmetry: str):
    """For each location, the index of the simulated location that supplies it."""
    n = len(locations)
    side = side_of_line(locations, symmetry)
    ra, rb = reflect_ab(locations[:, 0], locations[:, 1], symmetry)
    index = {(float(a), float(b)): i for i, (a, b) in enumerate(locations)}
    source = np.arange(n)
    permute = np.zeros(n, dtype=bool)
    for i in np.flatnonzero(side > 0):
        j = index.get((float(ra[i]), float(rb[i])))
        if j is not None:
            source[i] = j
            permute[i] = True
    return source, permute


def sweep_symmetry_line(
    config: SensorConfig,
    dome: DomeSpec,
    params: SurrogateParams = SurrogateParams(),
    depth: float = 3.0,
    step_count: int = 31,
) -> np.ndarray:
    """Noise-free readings along the symmetry line.

    Returns an array with columns ``s, r1..r5``.
    """
    if step_count < 2:
        raise SimulationError(f"step_count must be >= 2, got {step_count}")
    if config.symmetry is None:
        raise SimulationError(f"case {config.case_id}: configuration declares no symmetry line")
    s, ab = symmetry_line(config.symmetry, dome, step_count)
    points = chart_to_xyz(ab[:, 0], ab[:, 1], dome)
    r = response(config, points, np.full(step_count, depth), params, dome)
    return np.column_stack([s, r])
