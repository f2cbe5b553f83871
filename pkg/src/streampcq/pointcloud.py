"""Point cloud attribute input and the reference texture-complexity oracle.

Reference texture complexity is only computable when the pristine cloud is
at hand; it anchors the calibration stage that teaches the model to
recover complexity from bitstream features alone.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import EmptyCloud, TooFewPoints

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def rgb_to_luma(colors) -> np.ndarray:
    c = np.asarray(colors, dtype=float)
    if c.ndim == 1:  # already a single channel
        return c
    if c.shape[1] < 3:
        raise ValueError(f"expected RGB columns, got shape {c.shape}")
    return c[:, :3] @ _LUMA


def compute_reference_tc(attributes, positions, k: int = 16) -> float:
    """Mean local luma spread over k-nearest-neighbor neighborhoods.

    Each point contributes one neighborhood: itself plus its k-1 nearest
    neighbors.  The statistic is the sample (n-1) standard deviation of
    luma within the neighborhood, averaged over all points.  Neighborhoods
    play the role image blocks play on a pixel grid; k is a tuning knob,
    not a sharp threshold.
    """
    positions = np.asarray(positions, dtype=float)
    luma = rgb_to_luma(attributes)
    n = len(luma)
    if n == 0:
        raise EmptyCloud("cannot compute texture complexity of an empty cloud")
    if positions.shape[0] != n:
        raise ValueError("attributes and positions disagree on point count")
    if n < k:
        raise TooFewPoints(f"need at least k={k} points, got {n}")
    if k < 2:
        raise ValueError("neighborhood size k must be at least 2")

    tree = cKDTree(positions)
    _, idx = tree.query(positions, k=k)
    neighborhoods = luma[idx]  # (n, k)
    stds = neighborhoods.std(axis=1, ddof=1)
    return float(stds.mean())


def read_ply(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read an ASCII PLY file, returning (positions, rgb) arrays.

    Supports 'format ascii 1.0' vertex elements with at least x, y, z,
    red, green, blue properties, in any property order.
    """
    path = Path(path)
    with open(path, encoding="ascii", errors="replace") as fh:
        magic = fh.readline().strip()
        if magic != "ply":
            raise ValueError(f"{path}: not a PLY file")
        fmt = None
        n_vertices = None
        properties: list[str] = []
        in_vertex_element = False
        for line in fh:
            tokens = line.split()
            if not tokens:
                continue
            if tokens[0] == "format":
                fmt = tokens[1]
            elif tokens[0] == "element":
                in_vertex_element = tokens[1] == "vertex"
                if in_vertex_element:
                    n_vertices = int(tokens[2])
            elif tokens[0] == "property" and in_vertex_element:
                properties.append(tokens[-1])
            elif tokens[0] == "end_header":
                break
        if fmt != "ascii":
            raise ValueError(f"{path}: only ASCII PLY is supported, got format {fmt!r}")
        if n_vertices is None:
            raise ValueError(f"{path}: no vertex element in header")
        needed = ("x", "y", "z", "red", "green", "blue")
        missing = [p for p in needed if p not in properties]
        if missing:
            raise ValueError(f"{path}: vertex element lacks properties {missing}")

        data = np.loadtxt(fh, dtype=float, max_rows=n_vertices, ndmin=2)
    if data.shape[0] != n_vertices:
        raise ValueError(
            f"{path}: header promises {n_vertices} vertices, found {data.shape[0]}"
        )
    cols = {name: i for i, name in enumerate(properties)}
    positions = data[:, [cols["x"], cols["y"], cols["z"]]]
    rgb = data[:, [cols["red"], cols["green"], cols["blue"]]]
    return positions, rgb
