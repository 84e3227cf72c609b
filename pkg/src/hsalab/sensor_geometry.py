"""Virtual depth sensor: rigid transform, box crop and orthographic height maps.

A channel orientation is a signed permutation matrix ``Rc`` whose columns are
the image ``u`` axis, the image ``v`` axis and the viewing direction ``w``,
all expressed in the sensor frame.  Pixel ``(i, j)`` covers the i-th of
``n_x`` equal slices of ``u`` and the j-th of ``n_y`` slices of ``v``; bins
are half-open ``[lo, hi)`` except the last one, which is closed.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

# looking down the volume's z axis; u = x, v = -y, w = -z
TOP_DOWN = np.diag([1.0, -1.0, -1.0])

REFERENCES = ("near_face", "origin")


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9) or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation must be orthonormal with determinant +1")
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def compose(self, other: "Pose") -> "Pose":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Map points by this rigid motion: p -> R p + t."""
        return as_cloud(points) @ self.rotation.T + self.translation


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_pose(rng: np.random.Generator, scale: float = 1.0) -> Pose:
    return Pose(random_rotation(rng), rng.uniform(-scale, scale, size=3))


def as_cloud(points) -> np.ndarray:
    C = np.asarray(points, dtype=float)
    if C.size == 0:
        return C.reshape(0, 3)
    if C.ndim != 2 or C.shape[1] != 3:
        raise ValueError(f"point cloud must have shape (n, 3), got {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("point cloud has non-finite coordinates")
    return C


def as_volume(z) -> np.ndarray:
    z = np.asarray(z, dtype=float).reshape(3)
    if not np.all(z > 0):
        raise ValueError(f"volume extents must be positive, got {z}")
    return z


def trans(T: Pose, C) -> np.ndarray:
    """Express world points in the frame of pose ``T``: p -> R^T (p - t)."""
    return (as_cloud(C) - T.translation) @ T.rotation


def trans_inverse(T: Pose, C) -> np.ndarray:
    return as_cloud(C) @ T.rotation.T + T.translation


def crop(C, z) -> np.ndarray:
    """Points inside the closed box |p_i| <= z_i / 2, order preserved."""
    C = as_cloud(C)
    half = as_volume(z) / 2.0
    return C[np.all(np.abs(C) <= half, axis=1)]


def _check_orientation(Rc) -> np.ndarray:
    Rc = np.asarray(Rc, dtype=float).reshape(3, 3)
    is_perm = np.all(np.isin(Rc, (-1.0, 0.0, 1.0))) and np.all(np.abs(Rc).sum(axis=0) == 1) \
        and np.all(np.abs(Rc).sum(axis=1) == 1)
    if not is_perm or round(np.linalg.det(Rc)) != 1:
        raise ValueError("channel orientation must be a proper signed permutation matrix")
    return Rc


def channel_extents(z, Rc) -> np.ndarray:
    """Volume extents along the channel's (u, v, w) axes."""
    return np.abs(_check_orientation(Rc).T) @ as_volume(z)


def pixel_edges(extent: float, n: int) -> np.ndarray:
    return -extent / 2.0 + extent * np.arange(n + 1) / n


@dataclass
class HeightMap:
    data: np.ndarray  # (n_ch, n_x, n_y)
    volume: np.ndarray
    orientations: list = field(default_factory=list)
    background: np.ndarray = None  # per channel
    reference: str = "near_face"

    @property
    def shape(self):
        return self.data.shape

    def save_binary(self, path) -> None:
        n_ch, n_x, n_y = self.data.shape
        with open(path, "wb") as fh:
            fh.write(struct.pack("<4s3I3f", b"HMAP", n_ch, n_x, n_y, *self.volume))
            fh.write(np.ascontiguousarray(self.data, dtype="<f4").tobytes())

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["channel", "i", "j", "value"])
            for (c, i, j), v in np.ndenumerate(self.data):
                w.writerow([c, i, j, repr(float(v))])


def load_binary(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a height map file back as ``(data float32, volume extents)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, n_ch, n_x, n_y, *vol = struct.unpack_from("<4s3I3f", raw)
    if magic != b"HMAP":
        raise ValueError("not a height map file")
    offset = struct.calcsize("<4s3I3f")
    data = np.frombuffer(raw, dtype="<f4", offset=offset).reshape(n_ch, n_x, n_y)
    return data, np.array(vol)


def _distances(q_w: np.ndarray, extent_w: float, reference: str) -> np.ndarray:
    if reference == "near_face":
        return q_w + extent_w / 2.0
    return q_w


def proj(C, z, resolution=(32, 32), orientations=None, reference: str = "near_face") -> HeightMap:
    """Orthographic nearest-distance projection of an already cropped cloud."""
    if reference not in REFERENCES:
        raise ValueError(f"reference must be one of {REFERENCES}")
    C = as_cloud(C)
    z = as_volume(z)
    n_x, n_y = (int(r) for r in resolution)
    if n_x < 1 or n_y < 1:
        raise ValueError("resolution must be positive")
    orientations = [TOP_DOWN] if orientations is None else [_check_orientation(R) for R in orientations]
    data = np.empty((len(orientations), n_x, n_y))
    background = np.empty(len(orientations))
    for c, Rc in enumerate(orientations):
        eu, ev, ew = channel_extents(z, Rc)
        background[c] = ew
        img = np.full((n_x, n_y), ew)
        if len(C):
            Q = C @ Rc
            i = np.minimum(np.searchsorted(pixel_edges(eu, n_x), Q[:, 0], side="right") - 1, n_x - 1)
            j = np.minimum(np.searchsorted(pixel_edges(ev, n_y), Q[:, 1], side="right") - 1, n_y - 1)
            i = np.maximum(i, 0)
            j = np.maximum(j, 0)
            np.minimum.at(img, (i, j), _distances(Q[:, 2], ew, reference))
        data[c] = img
    return HeightMap(data, z, list(orientations), background, reference)


def proj_reference(C, z, resolution=(32, 32), orientations=None, reference: str = "near_face") -> np.ndarray:
    """Per-pixel scan over all points; O(points x pixels)."""
    C = as_cloud(C)
    z = as_volume(z)
    n_x, n_y = resolution
    orientations = [TOP_DOWN] if orientations is None else orientations
    out = np.empty((len(orientations), n_x, n_y))
    for c, Rc in enumerate(orientations):
        Rc = np.asarray(Rc, dtype=float)
        eu, ev, ew = channel_extents(z, Rc)
        eu_edges, ev_edges = pixel_edges(eu, n_x), pixel_edges(ev, n_y)
        Q = C @ Rc
        for i in range(n_x):
            lo, hi = eu_edges[i], eu_edges[i + 1]
            in_u = (Q[:, 0] >= lo) & ((Q[:, 0] < hi) | ((i == n_x - 1) & (Q[:, 0] <= hi)))
            for j in range(n_y):
                lo, hi = ev_edges[j], ev_edges[j + 1]
                in_v = (Q[:, 1] >= lo) & ((Q[:, 1] < hi) | ((j == n_y - 1) & (Q[:, 1] <= hi)))
                sel = Q[in_u & in_v, 2]
                best = ew
                for w in sel:
                    d = w + ew / 2.0 if reference == "near_face" else w
                    if d < best:
                        best = d
                out[c, i, j] = best
    return out


def sense(C, T: Pose, z, resolution=(32, 32), orientations=None, reference: str = "near_face") -> HeightMap:
    """Height map seen by a sensor at pose ``T`` with volume ``z``."""
    return proj(crop(trans(T, C), z), z, resolution, orientations, reference)
