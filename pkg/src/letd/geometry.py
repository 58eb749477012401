"""Problem data, grids, overlapping decompositions, and forcing assembly.

Interior nodes of the unit-spaced index line are numbered 1..n; node 0
and node n+1 carry physical Dirichlet data.  An overlapping layout with
p pieces starts from break indices b_i = i (n + 1) / p and widens each
internal break into an overlap strip: piece i owns interior nodes
lo_i..hi_i with

    lo_1 = 1,            lo_i = b_{i-1} + 1 - c_left   (i > 1),
    hi_p = n,            hi_i = b_i - 1 + c_right      (i < p),

so adjacent pieces share 2c - 1 nodes when both sides widen by c cells.
Each piece reads one value per internal edge: its left neighbor's value
at node lo_i - 1 and/or its right neighbor's at node hi_i + 1.  Those
read nodes must be interior and owned by the neighbor; that is exactly
the feasibility bound on c checked at construction.

Forcing assembly folds the Dirichlet boundary closure into the source
term: F_j = f(x_j, t) plus (nu / h^2) times the bordering value at the
first and last owned node (physical data or a neighbor's trace).  In 2d
the same happens along all four edges of a subrectangle; with a
tensor-product layout every edge is either entirely physical or
entirely interior, so no edge mixes the two cases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np

__all__ = [
    "Problem1D",
    "Problem2D",
    "Grid1D",
    "Grid2D",
    "Piece1D",
    "Subrect2D",
    "Interface",
    "Decomposition1D",
    "Decomposition2D",
    "make_grid_1d",
    "make_grid_2d",
    "decompose_1d",
    "decompose_2d",
    "assemble_forcing",
    "assemble_forcing_2d",
]

Scalar2 = Callable[[float, float], float]


def _check_consistency(pairs, what: str) -> None:
    for got, want, where in pairs:
        tol = 1e-12 * (1.0 + abs(want))
        if not abs(got - want) <= tol:
            raise ValueError(
                f"{what} disagrees with the exact solution at {where}: "
                f"{got!r} vs {want!r}"
            )


@dataclass(frozen=True)
class Problem1D:
    """Diffusion problem u_t = nu u_xx + f on [origin, origin + length].

    boundary_left/right give the Dirichlet values at the two ends as
    functions of t; initial gives u at t = 0.  All callables must accept
    numpy arrays in their spatial argument.  When an exact solution is
    supplied, the boundary and initial data are checked against it at a
    few sample points on construction.
    """

    nu: float
    length: float
    horizon: float
    source: Scalar2  # f(x, t)
    boundary_left: Callable[[float], float]
    boundary_right: Callable[[float], float]
    initial: Callable[[float], float]
    exact: Optional[Scalar2] = None  # u(x, t)
    origin: float = 0.0

    def __post_init__(self) -> None:
        if self.nu <= 0 or self.length <= 0 or self.horizon <= 0:
            raise ValueError("nu, length and horizon must be positive")
        if self.exact is None:
            return
        ts = np.linspace(0.0, self.horizon, 5)
        xs = self.origin + self.length * np.linspace(0.0, 1.0, 7)
        _check_consistency(
            [(float(self.boundary_left(t)), float(self.exact(self.origin, t)), f"t={t}") for t in ts],
            "left boundary data",
        )
        _check_consistency(
            [
                (float(self.boundary_right(t)), float(self.exact(self.origin + self.length, t)), f"t={t}")
                for t in ts
            ],
            "right boundary data",
        )
        _check_consistency(
            [(float(self.initial(x)), float(self.exact(x, 0.0)), f"x={x}") for x in xs],
            "initial data",
        )


@dataclass(frozen=True)
class Problem2D:
    """Diffusion problem u_t = nu (u_xx + u_yy) + f on a rectangle.

    boundary(x, y, t) is evaluated only on the rectangle's edges;
    initial(x, y) at t = 0.  Spatial callables must broadcast over
    numpy arrays.
    """

    nu: float
    lengths: tuple[float, float]
    horizon: float
    source: Callable[[float, float, float], float]  # f(x, y, t)
    boundary: Callable[[float, float, float], float]
    initial: Scalar2
    exact: Optional[Callable[[float, float, float], float]] = None
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.nu <= 0 or min(self.lengths) <= 0 or self.horizon <= 0:
            raise ValueError("nu, lengths and horizon must be positive")
        if self.exact is None:
            return
        ox, oy = self.origin
        lx, ly = self.lengths
        ts = np.linspace(0.0, self.horizon, 3)
        pairs = []
        for t in ts:
            for x, y in [(ox, oy + 0.3 * ly), (ox + lx, oy + 0.7 * ly), (ox + 0.4 * lx, oy), (ox + 0.6 * lx, oy + ly)]:
                pairs.append((float(self.boundary(x, y, t)), float(self.exact(x, y, t)), f"({x},{y},{t})"))
        _check_consistency(pairs, "boundary data")
        xs = ox + lx * np.linspace(0.1, 0.9, 4)
        ys = oy + ly * np.linspace(0.1, 0.9, 4)
        _check_consistency(
            [(float(self.initial(x, y)), float(self.exact(x, y, 0.0)), f"({x},{y})") for x, y in zip(xs, ys)],
            "initial data",
        )


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid with n interior nodes; h = length / (n + 1)."""

    n: int
    length: float
    origin: float = 0.0

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ValueError(f"need n >= 3 interior nodes, got {self.n}")
        if self.length <= 0:
            raise ValueError("length must be positive")

    @property
    def h(self) -> float:
        return self.length / (self.n + 1)

    def x(self, j) -> np.ndarray:
        """Coordinates of interior node index/indices j (1-based)."""
        return self.origin + np.asarray(j) * self.h

    def interior(self) -> np.ndarray:
        return self.x(np.arange(1, self.n + 1))


@dataclass(frozen=True)
class Grid2D:
    x: Grid1D
    y: Grid1D


def make_grid_1d(n: int, length: float, origin: float = 0.0) -> Grid1D:
    return Grid1D(n=n, length=length, origin=origin)


def make_grid_2d(nx: int, ny: int, lengths: tuple[float, float], origin=(0.0, 0.0)) -> Grid2D:
    return Grid2D(
        x=Grid1D(n=nx, length=lengths[0], origin=origin[0]),
        y=Grid1D(n=ny, length=lengths[1], origin=origin[1]),
    )


@dataclass(frozen=True)
class Piece1D:
    """One owned index range lo..hi (1-based, inclusive) of a 1d layout."""

    lo: int
    hi: int

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def local(self, node: int) -> int:
        """0-based local index of a global interior node this piece owns."""
        if not self.lo <= node <= self.hi:
            raise ValueError(f"node {node} not owned by piece {self.lo}..{self.hi}")
        return node - self.lo


@dataclass(frozen=True)
class Interface:
    """One directed trace dependency: `reader` needs `owner`'s values.

    nodes: the global node index (1d) or node-range descriptor (2d folded
    into owner_take/reader edge) at which the owner's solution is read.
    """

    index: int
    owner: int
    reader: int
    side: Literal["left", "right", "bottom", "top"]  # which edge of the reader
    size: int


@dataclass(frozen=True)
class Decomposition1D:
    """Overlapping 1d layout: pieces plus directed interface table.

    For two pieces the classical overlap fractions are
    alpha = N_alpha / (n + 1), beta = N_beta / (n + 1) where N_alpha is
    piece 2's left read node and N_beta piece 1's right read node.
    """

    n: int
    p: int
    delta_cells: int
    pieces: tuple[Piece1D, ...]
    interfaces: tuple[Interface, ...]
    # read node (global) per interface, aligned with `interfaces`
    read_nodes: tuple[int, ...]

    def overlap_fractions(self) -> tuple[float, float]:
        if self.p != 2:
            raise ValueError("overlap fractions are defined for two pieces")
        n_alpha = self.pieces[1].lo - 1
        n_beta = self.pieces[0].hi + 1
        return n_alpha / (self.n + 1), n_beta / (self.n + 1)


@dataclass(frozen=True)
class Subrect2D:
    """Owned node rectangle [xlo..xhi] x [ylo..yhi] of a 2d layout."""

    ix: int
    iy: int
    xpiece: Piece1D
    ypiece: Piece1D

    @property
    def shape(self) -> tuple[int, int]:
        return (self.xpiece.size, self.ypiece.size)


@dataclass(frozen=True)
class Decomposition2D:
    nx: int
    ny: int
    px: int
    py: int
    overlap_cells: int
    convention: str
    subrects: tuple[Subrect2D, ...]
    interfaces: tuple[Interface, ...]
    # per interface: (read x-range, read y-range) as 1-based inclusive tuples
    read_ranges: tuple[tuple[tuple[int, int], tuple[int, int]], ...]


def _axis_pieces(n: int, p: int, widen_left: int, widen_right: int) -> list[Piece1D]:
    """Split 1..n at break indices b_i = i(n+1)/p, widening internal breaks.

    The piece left of a break extends widen_right cells past it; the piece
    right of the break starts widen_left cells before it.  Break indices
    are rounded when (n + 1) is not divisible by p.
    """
    if p < 1:
        raise ValueError(f"piece count must be >= 1, got {p}")
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    breaks = [round(i * (n + 1) / p) for i in range(p + 1)]
    if len(set(breaks)) != p + 1:
        raise ValueError(f"grid with n={n} is too coarse for {p} pieces")
    pieces = []
    for i in range(1, p + 1):
        lo = 1 if i == 1 else breaks[i - 1] + 1 - widen_left
        hi = n if i == p else breaks[i] - 1 + widen_right
        pieces.append(Piece1D(lo=lo, hi=hi))
    # Feasibility: every read node must be interior and owned by exactly
    # the adjacent neighbor, which also keeps overlaps from swallowing a
    # whole piece.
    for i, piece in enumerate(pieces):
        if i > 0:
            node = piece.lo - 1
            nb = pieces[i - 1]
            if not (1 <= node and nb.lo <= node <= nb.hi):
                raise ValueError(
                    f"overlap too wide: piece {i + 1} reads node {node}, "
                    f"not owned by its left neighbor {nb.lo}..{nb.hi}"
                )
        if i < p - 1:
            node = piece.hi + 1
            nb = pieces[i + 1]
            if not (node <= n and nb.lo <= node <= nb.hi):
                raise ValueError(
                    f"overlap too wide: piece {i + 1} reads node {node}, "
                    f"not owned by its right neighbor {nb.lo}..{nb.hi}"
                )
        if i > 0 and pieces[i - 1].hi + 1 <= piece.lo - 1:
            raise ValueError("pieces do not overlap; widen the overlap strip")
    return pieces


def decompose_1d(grid: Grid1D, p: int, delta_cells: int) -> Decomposition1D:
    """Overlapping layout of p pieces, each internal break widened by
    delta_cells on both sides (overlap width 2 * delta_cells * h).

    p = 1 yields the trivial single-piece layout with no interfaces.
    """
    if p >= 2 and delta_cells < 1:
        raise ValueError(f"overlap must be at least one cell, got {delta_cells}")
    pieces = _axis_pieces(grid.n, p, delta_cells, delta_cells)
    interfaces: list[Interface] = []
    read_nodes: list[int] = []
    for i, piece in enumerate(pieces):
        if i > 0:
            interfaces.append(
                Interface(index=len(interfaces), owner=i - 1, reader=i, side="left", size=1)
            )
            read_nodes.append(piece.lo - 1)
        if i < p - 1:
            interfaces.append(
                Interface(index=len(interfaces), owner=i + 1, reader=i, side="right", size=1)
            )
            read_nodes.append(piece.hi + 1)
    return Decomposition1D(
        n=grid.n,
        p=p,
        delta_cells=delta_cells if p >= 2 else 0,
        pieces=tuple(pieces),
        interfaces=tuple(interfaces),
        read_nodes=tuple(read_nodes),
    )


def decompose_2d(
    nx: int,
    ny: int,
    px: int,
    py: int,
    overlap_cells: int,
    convention: Literal["half", "full"] = "full",
) -> Decomposition2D:
    """Tensor-product overlapping layout of px-by-py subrectangles.

    convention "half": each side of an internal break widens by
    overlap_cells (strip width 2 * overlap_cells cells).  convention
    "full": the strip is overlap_cells wide in total, split as evenly as
    the parity allows.
    """
    if convention == "half":
        wl = wr = overlap_cells
    elif convention == "full":
        wl, wr = overlap_cells // 2, overlap_cells - overlap_cells // 2
    else:
        raise ValueError(f"unknown overlap convention {convention!r}")
    if (px >= 2 or py >= 2) and min(wl, wr) < 0:
        raise ValueError("overlap must be nonnegative")
    xpieces = _axis_pieces(nx, px, wl, wr)
    ypieces = _axis_pieces(ny, py, wl, wr)

    subrects = []
    for i in range(px):  # x-major enumeration
        for j in range(py):
            subrects.append(Subrect2D(ix=i, iy=j, xpiece=xpieces[i], ypiece=ypieces[j]))

    def rect_index(i: int, j: int) -> int:
        return i * py + j

    interfaces: list[Interface] = []
    read_ranges: list[tuple[tuple[int, int], tuple[int, int]]] = []
    for r_id, r in enumerate(subrects):
        xs, ys = r.xpiece, r.ypiece
        if r.ix > 0:
            interfaces.append(
                Interface(index=len(interfaces), owner=rect_index(r.ix - 1, r.iy),
                          reader=r_id, side="left", size=ys.size)
            )
            read_ranges.append(((xs.lo - 1, xs.lo - 1), (ys.lo, ys.hi)))
        if r.ix < px - 1:
            interfaces.append(
                Interface(index=len(interfaces), owner=rect_index(r.ix + 1, r.iy),
                          reader=r_id, side="right", size=ys.size)
            )
            read_ranges.append(((xs.hi + 1, xs.hi + 1), (ys.lo, ys.hi)))
        if r.iy > 0:
            interfaces.append(
                Interface(index=len(interfaces), owner=rect_index(r.ix, r.iy - 1),
                          reader=r_id, side="bottom", size=xs.size)
            )
            read_ranges.append(((xs.lo, xs.hi), (ys.lo - 1, ys.lo - 1)))
        if r.iy < py - 1:
            interfaces.append(
                Interface(index=len(interfaces), owner=rect_index(r.ix, r.iy + 1),
                          reader=r_id, side="top", size=xs.size)
            )
            read_ranges.append(((xs.lo, xs.hi), (ys.hi + 1, ys.hi + 1)))
    # Every read range must fall inside the owner's rectangle.
    for itf, (xr, yr) in zip(interfaces, read_ranges):
        owner = subrects[itf.owner]
        if not (owner.xpiece.lo <= xr[0] and xr[1] <= owner.xpiece.hi
                and owner.ypiece.lo <= yr[0] and yr[1] <= owner.ypiece.hi):
            raise ValueError(
                f"overlap too wide: subrect {itf.reader} reads x{xr} y{yr}, "
                f"outside its neighbor's owned rectangle"
            )
    return Decomposition2D(
        nx=nx, ny=ny, px=px, py=py,
        overlap_cells=overlap_cells if (px >= 2 or py >= 2) else 0,
        convention=convention,
        subrects=tuple(subrects),
        interfaces=tuple(interfaces),
        read_ranges=tuple(read_ranges),
    )


def assemble_forcing(
    problem: Problem1D,
    grid: Grid1D,
    lo: int,
    hi: int,
    t: float,
    left_value: float,
    right_value: float,
) -> np.ndarray:
    """Source samples f(x_j, t) for j = lo..hi with the Dirichlet closure
    (nu / h^2) * bordering value folded into the first and last entry."""
    x = grid.x(np.arange(lo, hi + 1))
    f = np.asarray(problem.source(x, t), dtype=float)
    if f.ndim == 0:
        f = np.full(hi - lo + 1, float(f))
    f = f.copy()
    w = problem.nu / grid.h**2
    f[0] += w * left_value
    f[-1] += w * right_value
    return f


def assemble_forcing_2d(
    problem: Problem2D,
    grid: Grid2D,
    rect: Subrect2D,
    t: float,
    left: np.ndarray,
    right: np.ndarray,
    bottom: np.ndarray,
    top: np.ndarray,
) -> np.ndarray:
    """Source field on a subrectangle with all four Dirichlet edge closures.

    left/right have one value per owned y-node; bottom/top one per owned
    x-node.  Corners receive contributions from both adjacent edges, as
    the five-point stencil requires.
    """
    xs = grid.x.x(np.arange(rect.xpiece.lo, rect.xpiece.hi + 1))
    ys = grid.y.x(np.arange(rect.ypiece.lo, rect.ypiece.hi + 1))
    f = np.asarray(problem.source(xs[:, None], ys[None, :], t), dtype=float)
    if f.ndim == 0:
        f = np.full(rect.shape, float(f))
    f = np.broadcast_to(f, rect.shape).copy()
    nx_loc, ny_loc = rect.shape
    for name, vec, want in (("left", left, ny_loc), ("right", right, ny_loc),
                            ("bottom", bottom, nx_loc), ("top", top, nx_loc)):
        if np.asarray(vec).shape != (want,):
            raise ValueError(f"{name} edge data must have shape ({want},)")
    wx = problem.nu / grid.x.h**2
    wy = problem.nu / grid.y.h**2
    f[0, :] += wx * np.asarray(left, dtype=float)
    f[-1, :] += wx * np.asarray(right, dtype=float)
    f[:, 0] += wy * np.asarray(bottom, dtype=float)
    f[:, -1] += wy * np.asarray(top, dtype=float)
    return f
