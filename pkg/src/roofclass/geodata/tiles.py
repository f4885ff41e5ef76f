"""Random square survey tiles over a projected extent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from roofclass.errors import RoofClassError

DEFAULT_TILE_SIDE = 500.0


@dataclass(frozen=True)
class TileSpec:
    """One square survey tile; origin is the (min-x, min-y) corner."""

    origin: tuple[float, float]
    side: float = DEFAULT_TILE_SIDE
    seed: int = 0

    def bounds(self) -> tuple[float, float, float, float]:
        x, y = self.origin
        return (x, y, x + self.side, y + self.side)


def sample_tiles(
    extent: tuple[float, float, float, float],
    n: int,
    side: float = DEFAULT_TILE_SIDE,
    seed: int = 0,
    avoid_overlap: bool = False,
    max_attempts: int = 100_000,
) -> list[TileSpec]:
    """Draw n tile origins uniformly so each tile lies within the extent.

    Tiles may overlap by default (survey sampling is silent on exclusion);
    avoid_overlap switches to rejection sampling against the tiles drawn
    so far and raises if the extent cannot host n disjoint tiles within
    max_attempts draws. Deterministic for a fixed seed.
    """
    xmin, ymin, xmax, ymax = map(float, extent)
    if not (xmax > xmin and ymax > ymin):
        raise RoofClassError(f"degenerate extent {extent}")
    if side <= 0:
        raise RoofClassError(f"tile side must be positive, got {side}")
    if n < 1:
        raise RoofClassError(f"tile count must be >= 1, got {n}")
    span_x = xmax - xmin - side
    span_y = ymax - ymin - side
    if span_x < 0 or span_y < 0:
        raise RoofClassError(
            f"extent {xmax - xmin:.1f} x {ymax - ymin:.1f} m is smaller than one {side:.1f} m tile"
        )

    rng = np.random.default_rng(seed)
    tiles: list[TileSpec] = []
    attempts = 0
    while len(tiles) < n:
        attempts += 1
        if attempts > max_attempts:
            raise RoofClassError(
                f"could not place {n} non-overlapping {side} m tiles after {max_attempts} draws"
            )
        ox = xmin + rng.random() * span_x
        oy = ymin + rng.random() * span_y
        if avoid_overlap and any(
            abs(ox - t.origin[0]) < side and abs(oy - t.origin[1]) < side for t in tiles
        ):
            continue
        tiles.append(TileSpec(origin=(ox, oy), side=side, seed=seed))
    return tiles
