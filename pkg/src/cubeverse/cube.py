"""Sticker-level n-cube states and half-turn-metric move generators.

Facelets are numbered face by face in the order U, R, F, D, L, B and
row-major inside each face, read as the face appears on the usual net:

* U seen from above, back edge on top, L on the left
* R, F, L, B seen from outside, U on top
* D seen from below, F edge on top, L on the left

A state is stored as a permutation: ``state.perm[i]`` is the home index
of the facelet currently sitting at position ``i``. Colors are
``perm // n**2`` (0..5 for U, R, F, D, L, B).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

FACES = "URFDLB"
COLOR_CHARS = "URFDLB"

# outward normal of each face in (x, y, z); x to R, y to U, z to F
_NORMALS = {
    "U": (0, 1, 0),
    "R": (1, 0, 0),
    "F": (0, 0, 1),
    "D": (0, -1, 0),
    "L": (-1, 0, 0),
    "B": (0, 0, -1),
}

MAX_EXACT_N = 4
MAX_METADATA_N = 7


class CubeError(ValueError):
    """Raised for unsupported cube sizes and move/spec mismatches."""


class Metric(str, Enum):
    HTM = "HTM"


@dataclass(frozen=True)
class CubeSpec:
    """Size, metric and rotation convention of a cube.

    ``fixed_reference`` only changes anything for n=2: the DLB corner is
    pinned and the generating set drops the D, L and B turns.
    """

    n: int = 3
    metric: Metric = Metric.HTM
    fixed_reference: bool = True

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise CubeError(f"cube size must be an integer >= 2, got {self.n!r}")
        if self.n > MAX_METADATA_N:
            raise CubeError(f"cube size {self.n} is above the supported maximum {MAX_METADATA_N}")
        object.__setattr__(self, "metric", Metric(self.metric))

    @property
    def exact(self) -> bool:
        return self.n <= MAX_EXACT_N

    @property
    def n_facelets(self) -> int:
        return 6 * self.n * self.n

    def require_exact(self):
        if not self.exact:
            raise CubeError(
                f"n={self.n} has no exact state representation (supported: 2..{MAX_EXACT_N})"
            )


@dataclass(frozen=True, order=True)
class Move:
    """A clockwise layer turn by ``power`` quarter turns (1, 2 or 3).

    ``layer`` counts from the named face, 1 being the outer layer.
    """

    face: str
    layer: int = 1
    power: int = 1

    def __post_init__(self):
        if self.face not in FACES:
            raise CubeError(f"unknown face {self.face!r}")
        if self.power not in (1, 2, 3):
            raise CubeError(f"power must be 1, 2 or 3, got {self.power}")
        if self.layer < 1:
            raise CubeError(f"layer must be >= 1, got {self.layer}")

    def inverse(self) -> "Move":
        return Move(self.face, self.layer, (4 - self.power) % 4)

    @property
    def axis(self) -> int:
        return FACES.index(self.face) % 3

    def __str__(self):
        prefix = "" if self.layer == 1 else str(self.layer)
        suffix = {1: "", 2: "2", 3: "'"}[self.power]
        return f"{prefix}{self.face}{suffix}"


_MOVE_RE = re.compile(r"^(\d*)([URFDLB])(2|'|)$")


def parse_move(token: str) -> Move:
    """Parse Singmaster notation: ``U``, ``U'``, ``U2``, ``2U``, ``2U'``."""
    m = _MOVE_RE.match(token.strip())
    if not m:
        raise CubeError(f"cannot parse move {token!r}")
    layer = int(m.group(1)) if m.group(1) else 1
    power = {"": 1, "2": 2, "'": 3}[m.group(3)]
    return Move(m.group(2), layer, power)


def parse_sequence(text: str) -> tuple[Move, ...]:
    return tuple(parse_move(tok) for tok in text.split())


def format_sequence(moves) -> str:
    return " ".join(str(m) for m in moves)


@lru_cache(maxsize=None)
def _facelet_geometry(n: int):
    """Doubled integer positions and normals of every facelet, in index order."""
    coords = [2 * i - (n - 1) for i in range(n)]
    top_down = coords[::-1]
    pos = []
    nrm = []
    half = n  # doubled half-width: facelets sit on the plane at +-n
    for face in FACES:
        for row in range(n):
            for col in range(n):
                if face == "U":
                    p = (coords[col], half, coords[row])
                elif face == "D":
                    p = (coords[col], -half, top_down[row])
                elif face == "F":
                    p = (coords[col], top_down[row], half)
                elif face == "B":
                    p = (top_down[col], top_down[row], -half)
                elif face == "R":
                    p = (half, top_down[row], top_down[col])
                else:  # L
                    p = (-half, top_down[row], coords[col])
                pos.append(p)
                nrm.append(_NORMALS[face])
    return np.array(pos, dtype=np.int64), np.array(nrm, dtype=np.int64)


def _rotate_clockwise(v: np.ndarray, axis: np.ndarray) -> np.ndarray:
    # quarter turn clockwise seen from the tip of ``axis``: v -> -(axis x v) + axis (axis . v)
    return -np.cross(axis, v) + np.outer(v @ axis, axis)


@lru_cache(maxsize=None)
def move_permutation(n: int, move: Move) -> np.ndarray:
    """Index permutation ``p`` such that ``new = old[p]`` applies ``move``."""
    if move.layer > n // 2 and not (n == 2 and move.layer == 1):
        raise CubeError(f"layer {move.layer} is not a turnable layer of the {n}-cube")
    pos, nrm = _facelet_geometry(n)
    axis = np.array(_NORMALS[move.face], dtype=np.int64)
    # the turning layer holds cubies whose doubled coordinate along axis is this value
    depth = (n - 1) - 2 * (move.layer - 1)
    cubie = pos - nrm  # step inward from the sticker plane to the cubie centre
    in_layer = (cubie @ axis) == depth
    index_of = {(tuple(p), tuple(q)): i for i, (p, q) in enumerate(zip(pos, nrm))}
    perm = np.arange(len(pos))
    new_pos = pos.copy()
    new_nrm = nrm.copy()
    for _ in range(move.power):
        new_pos[in_layer] = _rotate_clockwise(new_pos[in_layer], axis)
        new_nrm[in_layer] = _rotate_clockwise(new_nrm[in_layer], axis)
    for i in np.flatnonzero(in_layer):
        j = index_of[(tuple(new_pos[i]), tuple(new_nrm[i]))]
        perm[j] = i
    perm.setflags(write=False)
    return perm


def generators(spec: CubeSpec) -> list[Move]:
    """Full HTM generating set for ``spec``.

    n=2 with a fixed reference corner: U, R, F in three powers (9 moves).
    Otherwise every face and every layer down to ``n // 2`` (18 for n=3,
    36 for n=4).
    """
    spec.require_exact()
    if spec.n == 2:
        faces = "URF" if spec.fixed_reference else FACES
        return [Move(f, 1, p) for f in faces for p in (1, 2, 3)]
    return [
        Move(f, layer, p)
        for f in FACES
        for layer in range(1, spec.n // 2 + 1)
        for p in (1, 2, 3)
    ]


@lru_cache(maxsize=None)
def generator_table(spec: CubeSpec) -> np.ndarray:
    """Stacked permutations of ``generators(spec)``, shape (n_moves, 6 n^2)."""
    table = np.stack([move_permutation(spec.n, m) for m in generators(spec)])
    table = table.astype(np.intp)
    table.setflags(write=False)
    return table


@dataclass(frozen=True, eq=False)
class CubeState:
    """Immutable cube configuration."""

    spec: CubeSpec
    perm: np.ndarray = field(repr=False)

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.uint8 if self.spec.n_facelets <= 256 else np.uint16)
        if perm.shape != (self.spec.n_facelets,):
            raise CubeError(f"expected {self.spec.n_facelets} facelets, got shape {perm.shape}")
        if perm.flags.writeable:
            perm = perm.copy()
            perm.setflags(write=False)
        object.__setattr__(self, "perm", perm)

    @classmethod
    def solved(cls, spec: CubeSpec) -> "CubeState":
        spec.require_exact()
        return cls(spec, np.arange(spec.n_facelets))

    @property
    def stickers(self) -> np.ndarray:
        return self.perm // (self.spec.n * self.spec.n)

    def facelet_string(self) -> str:
        return "".join(COLOR_CHARS[c] for c in self.stickers)

    def __eq__(self, other):
        if not isinstance(other, CubeState):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.perm, other.perm)

    def __hash__(self):
        return hash((self.spec, self.perm.tobytes()))


def _check_move(spec: CubeSpec, move: Move):
    if spec.n == 2 and spec.fixed_reference and move.face not in "URF":
        raise CubeError(f"move {move} would disturb the fixed DLB reference corner")
    if move.layer > max(1, spec.n // 2):
        raise CubeError(f"move {move} is not a generator of the {spec.n}-cube")


def apply(state: CubeState, move: Move) -> CubeState:
    _check_move(state.spec, move)
    return CubeState(state.spec, state.perm[move_permutation(state.spec.n, move)])


def apply_sequence(state: CubeState, moves) -> CubeState:
    perm = state.perm
    for move in moves:
        _check_move(state.spec, move)
        perm = perm[move_permutation(state.spec.n, move)]
    return CubeState(state.spec, perm)


def scramble(state: CubeState, k: int, seed: int) -> tuple[CubeState, tuple[Move, ...]]:
    """Random ``k``-move scramble; no two consecutive moves turn the same face layer."""
    if k < 0:
        raise CubeError("scramble length must be >= 0")
    gens = generators(state.spec)
    rng = np.random.default_rng(seed)
    moves = []
    for _ in range(k):
        while True:
            m = gens[rng.integers(len(gens))]
            if not moves or (m.face, m.layer) != (moves[-1].face, moves[-1].layer):
                break
        moves.append(m)
    return apply_sequence(state, moves), tuple(moves)


def is_solved(state: CubeState) -> bool:
    """True when every face shows a single color."""
    faces = state.stickers.reshape(6, -1)
    return bool(np.all(faces == faces[:, :1]))


def from_facelet_string(spec: CubeSpec, text: str) -> CubeState:
    """Rebuild a state from its color string.

    Only defined where colors pin down the permutation (n=2 and n=3); for
    n=4 the indistinguishable centre and wing stickers make it ambiguous.
    """
    if spec.n > 3:
        raise CubeError("facelet strings identify states only for n <= 3")
    if len(text) != spec.n_facelets or set(text) - set(COLOR_CHARS):
        raise CubeError("malformed facelet string")
    colors = np.array([COLOR_CHARS.index(c) for c in text])
    if np.any(np.bincount(colors, minlength=6) != spec.n * spec.n):
        raise CubeError("facelet string does not hold n^2 stickers of each color")
    home = _cubie_homes(spec.n)
    solved_colors = np.arange(spec.n_facelets) // (spec.n * spec.n)
    perm = np.empty(spec.n_facelets, dtype=np.int64)
    for group in home:
        # find the home cubie whose color tuple matches, respecting cyclic order
        here = tuple(colors[group])
        for other in home:
            want = tuple(solved_colors[other])
            if sorted(want) != sorted(here) or len(other) != len(group):
                continue
            for shift in range(len(group)):
                if tuple(np.roll(want, shift)) == here:
                    perm[group] = np.roll(other, shift)
                    break
            else:
                continue
            break
        else:
            raise CubeError("facelet string holds a cubie that does not exist")
    state = CubeState(spec, perm)
    if state.facelet_string() != text:
        raise CubeError("facelet string is not a valid cube state")
    return state


@lru_cache(maxsize=None)
def _cubie_homes(n: int):
    """Facelet index groups sharing a cubie, in clockwise order for corners."""
    pos, nrm = _facelet_geometry(n)
    cubie = pos - nrm
    groups: dict[tuple, list[int]] = {}
    for i, c in enumerate(map(tuple, cubie)):
        groups.setdefault(c, []).append(i)
    out = []
    for c, idx in groups.items():
        if len(idx) == 3:
            idx = _clockwise(idx, nrm)
        out.append(np.array(idx))
    return out


def _clockwise(idx, nrm):
    ud = [i for i in idx if nrm[i][1] != 0][0]
    b, c = [i for i in idx if i != ud]
    if np.dot(nrm[ud], np.cross(nrm[b], nrm[c])) > 0:
        b, c = c, b
    return [ud, b, c]
