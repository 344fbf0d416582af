"""Synthetic deployments of detectors and the lost tag.

Detectors live in a square of side ``side``; two parties hear each other when
they are at most ``R`` apart (closed disk, no wraparound at the edges).
Radius queries go through a uniform grid whose cells are ``R`` wide, so a
query only inspects the 3x3 block of cells around the query point.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._rng import draw_u64
from .config import SimConfig
from .protocol import InvalidParameter, Pseudonym, TagId

__all__ = ["Location", "DummyElection", "Deployment", "deploy", "FORMAT_HEADER"]

FORMAT_HEADER = "# crowdfind-deployment v1"


class Location(NamedTuple):
    x: float
    y: float

    def distance(self, other: "Location") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class DummyElection:
    """Detectors acting as dummy tags for one broadcaster in one round."""

    round: int
    broadcaster: int
    members: tuple[int, ...]
    pseudonyms: tuple[Pseudonym, ...]

    def __len__(self):
        return len(self.members)


class _Grid:
    def __init__(self, points: np.ndarray, cell: float):
        self.cell = cell
        self.points = points
        self.cells: dict[tuple[int, int], np.ndarray] = {}
        buckets = defaultdict(list)
        for i, (cx, cy) in enumerate(np.floor(points / cell).astype(np.int64)):
            buckets[(int(cx), int(cy))].append(i)
        for key, idx in buckets.items():
            self.cells[key] = np.array(idx, dtype=np.int64)

    def within(self, x: float, y: float, radius: float) -> np.ndarray:
        cx, cy = int(math.floor(x / self.cell)), int(math.floor(y / self.cell))
        found = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                idx = self.cells.get((cx + dx, cy + dy))
                if idx is None:
                    continue
                d2 = (self.points[idx, 0] - x) ** 2 + (self.points[idx, 1] - y) ** 2
                found.append(idx[d2 <= radius * radius])
        if not found:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(found))


@dataclass(frozen=True, eq=False)
class Deployment:
    """Detector positions, the lost tag (absent in false-positive mode) and a grid index."""

    positions: np.ndarray
    side: float
    R: float
    zone_size: float = 250.0
    lost_tag: tuple[TagId, Location] | None = None
    _grid: _Grid = field(init=False, repr=False)
    _neighbors: list = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.side <= 0 or self.R <= 0 or self.zone_size <= 0:
            raise InvalidParameter("side, R and zone_size must be positive")
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "_grid", _Grid(pos, self.R))

    @property
    def C(self) -> int:
        return int(self.positions.shape[0])

    def location(self, d: int) -> Location:
        self._check(d)
        x, y = self.positions[d]
        return Location(float(x), float(y))

    def _check(self, d: int) -> None:
        if not 0 <= d < self.C:
            raise IndexError(f"detector index {d} out of range [0, {self.C})")

    def neighbors(self, d: int) -> frozenset[int]:
        """Detectors within distance ``R`` of detector ``d`` (``d`` excluded)."""
        return frozenset(int(i) for i in self.neighbor_array(d))

    def neighbor_array(self, d: int) -> np.ndarray:
        self._check(d)
        if self._neighbors is not None:
            return self._neighbors[d]
        x, y = self.positions[d]
        idx = self._grid.within(x, y, self.R)
        return idx[idx != d]

    def neighbor_table(self) -> list[np.ndarray]:
        """Sorted neighbor arrays for every detector (computed once)."""
        if self._neighbors is None:
            table = [self.neighbor_array(d) for d in range(self.C)]
            object.__setattr__(self, "_neighbors", table)
        return self._neighbors

    def covering_detectors(self, loc: Location | tuple[float, float] | None = None) -> frozenset[int]:
        """Detectors within ``R`` of ``loc`` (default: the lost tag; empty if it is absent)."""
        if loc is None:
            if self.lost_tag is None:
                return frozenset()
            loc = self.lost_tag[1]
        return frozenset(int(i) for i in self._grid.within(loc[0], loc[1], self.R))

    def elect_dummies(self, round: int, broadcaster: int, q: float, rng: np.random.Generator) -> DummyElection:
        """Each neighbor of ``broadcaster`` joins independently with probability ``q``."""
        if not 0.0 <= q <= 1.0:
            raise InvalidParameter(f"q must be in [0, 1], got {q}")
        nbrs = self.neighbor_array(broadcaster)
        chosen = nbrs[rng.random(nbrs.size) < q]
        pseudo = draw_u64(rng, chosen.size)
        return DummyElection(
            round,
            broadcaster,
            tuple(int(i) for i in chosen),
            tuple(Pseudonym(int(p)) for p in pseudo),
        )

    def elect_round(self, round: int, q: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All broadcasters' elections for one round in a single pass.

        Returns parallel arrays ``(broadcaster, member, pseudonym)``.  Draws are
        made broadcaster by broadcaster in index order, neighbors in ascending
        order, so the result only depends on the deployment and ``rng``.
        """
        if not 0.0 <= q <= 1.0:
            raise InvalidParameter(f"q must be in [0, 1], got {q}")
        table = self.neighbor_table()
        counts = np.fromiter((a.size for a in table), dtype=np.int64, count=self.C)
        members = np.concatenate(table) if self.C else np.empty(0, dtype=np.int64)
        owners = np.repeat(np.arange(self.C, dtype=np.int64), counts)
        keep = rng.random(members.size) < q
        owners, members = owners[keep], members[keep]
        return owners, members, draw_u64(rng, members.size)

    def zone_of(self, d: int) -> tuple[int, int]:
        """Coarse grid cell of detector ``d``: all the provider knows about its position."""
        x, y = self.location(d)
        return (math.floor(x / self.zone_size), math.floor(y / self.zone_size))

    def zones(self) -> list[tuple[int, int]]:
        return [self.zone_of(d) for d in range(self.C)]

    # -- flat text format: one detector per line "index,x,y" ------------------

    def to_text(self) -> str:
        lines = [FORMAT_HEADER, f"# side={self.side!r} R={self.R!r} zone_size={self.zone_size!r}"]
        if self.lost_tag is None:
            lines.append("# lost_tag=none")
        else:
            tid, loc = self.lost_tag
            lines.append(f"# lost_tag={int(tid)},{loc.x!r},{loc.y!r}")
        lines.extend(f"{i},{x!r},{y!r}" for i, (x, y) in enumerate(self.positions.tolist()))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Deployment":
        meta: dict[str, str] = {}
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        meta[key] = val
                continue
            idx, x, y = line.split(",")
            rows.append((int(idx), float(x), float(y)))
        rows.sort()
        if [r[0] for r in rows] != list(range(len(rows))):
            raise ValueError("detector indices must be 0..C-1")
        lost = None
        if meta.get("lost_tag", "none") != "none":
            tid, x, y = meta["lost_tag"].split(",")
            lost = (TagId(int(tid)), Location(float(x), float(y)))
        return cls(
            np.array([(x, y) for _, x, y in rows], dtype=float).reshape(-1, 2),
            float(meta["side"]),
            float(meta["R"]),
            float(meta.get("zone_size", 250.0)),
            lost,
        )


def deploy(config: SimConfig, rng: np.random.Generator) -> Deployment:
    """Place detectors and the lost tag uniformly in the square.

    ``placement="poisson"`` draws the detector count from Poisson(C) first,
    giving a homogeneous spatial Poisson process of intensity ``C / side^2``.
    """
    if config.C < 1 or config.side <= 0 or config.R <= 0:
        raise InvalidParameter("C, side and R must be positive")
    n = int(rng.poisson(config.C)) if config.placement == "poisson" else config.C
    positions = rng.uniform(0.0, config.side, size=(n, 2))
    lost = None
    if not config.fp_mode:
        x, y = rng.uniform(0.0, config.side, size=2)
        lost = (TagId(draw_u64(rng)), Location(float(x), float(y)))
    return Deployment(positions, config.side, config.R, config.zone_size, lost)
