"""Uniform rectangular array steering vectors and beam codebooks."""

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


class DuplicateAngle(ValueError):
    pass


@dataclass(frozen=True)
class ArrayShape:
    n_x: int
    n_y: int
    spacing_over_lambda: float = 0.5

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError(f"invalid array shape {self.n_x}x{self.n_y}")

    @property
    def n(self):
        return self.n_x * self.n_y


@dataclass(frozen=True)
class SteeringAngles:
    """Azimuth and elevation in radians; azimuth is wrapped into [0, 2*pi)."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        az = float(self.azimuth) % TWO_PI
        object.__setattr__(self, "azimuth", 0.0 if az >= TWO_PI else az)
        object.__setattr__(self, "elevation", float(self.elevation))

    @classmethod
    def from_degrees(cls, azimuth_deg, elevation_deg):
        return cls(np.deg2rad(azimuth_deg), np.deg2rad(elevation_deg))


def _axis_vector(n, spacing, direction_cosine):
    k = np.arange(n)
    return np.exp(-1j * TWO_PI * spacing * direction_cosine * k) / np.sqrt(n)


def steering_vector(angles, shape):
    """Unit-norm URA response ``f_X kron f_Y`` for the given steering angles.

    The x-axis progression uses ``cos(az) sin(el)`` and the y-axis
    progression ``sin(az) sin(el)``, each normalized by the square root of
    its element count.
    """
    sin_el = np.sin(angles.elevation)
    f_x = _axis_vector(shape.n_x, shape.spacing_over_lambda,
                       np.cos(angles.azimuth) * sin_el)
    f_y = _axis_vector(shape.n_y, shape.spacing_over_lambda,
                       np.sin(angles.azimuth) * sin_el)
    return np.outer(f_x, f_y).ravel()


# Channel array responses follow exactly the same formula.
array_response = steering_vector


def steering_matrix(azimuths, elevations, shape):
    """Vectorized steering vectors: one row per (azimuth, elevation) pair."""
    az = np.asarray(azimuths, dtype=float)
    el = np.asarray(elevations, dtype=float)
    sin_el = np.sin(el)
    kx = np.arange(shape.n_x)
    ky = np.arange(shape.n_y)
    c = -1j * TWO_PI * shape.spacing_over_lambda
    fx = np.exp(c * (np.cos(az) * sin_el)[:, None] * kx) / np.sqrt(shape.n_x)
    fy = np.exp(c * (np.sin(az) * sin_el)[:, None] * ky) / np.sqrt(shape.n_y)
    return (fx[:, :, None] * fy[:, None, :]).reshape(az.size, -1)


@dataclass(frozen=True)
class Codebook:
    """Ordered beam codebook, elevation-major then azimuth ascending.

    ``vectors`` has one unit-norm steering vector per row; index ``i`` of
    ``angles`` describes row ``i``. Indices are 0-based.
    """

    angles: tuple
    vectors: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.angles)

    def __getitem__(self, index):
        return self.vectors[index]

    @property
    def azimuths_deg(self):
        return np.array([np.rad2deg(a.azimuth) for a in self.angles])

    @property
    def elevations_deg(self):
        return np.array([np.rad2deg(a.elevation) for a in self.angles])


def build_codebook(azimuths, elevations, shape):
    """Codebook over the Cartesian grid of azimuths and elevations (radians)."""
    azimuths = [float(a) for a in azimuths]
    elevations = [float(e) for e in elevations]
    if not azimuths or not elevations:
        raise ValueError("angle lists must be non-empty")
    for name, vals in (("azimuth", np.mod(azimuths, TWO_PI)),
                       ("elevation", elevations)):
        if len(np.unique(np.round(vals, 12))) != len(vals):
            raise DuplicateAngle(f"duplicate {name} in codebook grid")
    angles = tuple(SteeringAngles(az, el)
                   for el in sorted(elevations) for az in sorted(np.mod(azimuths, TWO_PI)))
    vectors = steering_matrix([a.azimuth for a in angles],
                              [a.elevation for a in angles], shape)
    vectors.setflags(write=False)
    return Codebook(angles, vectors)


def build_codebook_deg(azimuths_deg, elevations_deg, shape):
    return build_codebook(np.deg2rad(azimuths_deg), np.deg2rad(elevations_deg), shape)
