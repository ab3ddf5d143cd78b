"""Packed coordinates for the 2-cube with the DLB corner pinned.

A state is the pair (corner permutation index in [0, 7!), twist index in
[0, 3^6)), flattened to ``perm * 729 + twist``. The seven free corners
sit in positions URF, UFL, ULB, UBR, DFR, DLF, DRB; the twist of the
last one is implied by the mod-3 sum rule.
"""
from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np

from .cube import CubeSpec, CubeState, _cubie_homes, _facelet_geometry, generator_table

N_PERM = factorial(7)
N_TWIST = 3**6
N_STATES = N_PERM * N_TWIST

SPEC = CubeSpec(2, fixed_reference=True)

# corner positions by doubled cubie coordinate, Kociemba order minus DBL
_CORNER_AT = [
    (1, 1, 1),  # URF
    (-1, 1, 1),  # UFL
    (-1, 1, -1),  # ULB
    (1, 1, -1),  # UBR
    (1, -1, 1),  # DFR
    (-1, -1, 1),  # DLF
    (1, -1, -1),  # DRB
]


@lru_cache(maxsize=None)
def _corner_facelets() -> np.ndarray:
    """(7, 3) facelet indices per free corner position, U/D sticker first, clockwise."""
    pos, nrm = _facelet_geometry(2)
    by_cubie = {tuple((pos - nrm)[g[0]]): g for g in _cubie_homes(2)}
    return np.array([by_cubie[c] for c in _CORNER_AT])


def _perm_rank(p) -> int:
    """Lehmer rank of a permutation of range(len(p))."""
    rank = 0
    items = list(range(len(p)))
    for x in p:
        i = items.index(x)
        rank = rank * len(items) + i
        items.pop(i)
    return rank


def _perm_unrank(rank: int, k: int = 7) -> list[int]:
    digits = []
    for base in range(1, k + 1):
        digits.append(rank % base)
        rank //= base
    items = list(range(k))
    return [items.pop(d) for d in reversed(digits)]


def encode(state: CubeState) -> int:
    """Packed index of a 2-cube state (fixed-reference spec only)."""
    if state.spec != SPEC:
        raise ValueError("packed coordinates need CubeSpec(2, fixed_reference=True)")
    cf = _corner_facelets()
    home = state.perm[cf]  # home facelet at each sticker slot
    owner = {int(f): c for c in range(7) for f in cf[c]}
    perm = []
    twist = []
    for pos in range(7):
        cubie = owner[int(home[pos, 0])]
        perm.append(cubie)
        # twist = slot holding the cubie's U/D sticker
        ud_home = int(cf[cubie, 0])
        twist.append(int(np.flatnonzero(home[pos] == ud_home)[0]))
    t = 0
    for o in twist[:6]:
        t = t * 3 + o
    return _perm_rank(perm) * N_TWIST + t


def decode(index: int) -> CubeState:
    if not 0 <= index < N_STATES:
        raise ValueError(f"packed index {index} out of range")
    p, t = divmod(int(index), N_TWIST)
    perm = _perm_unrank(p)
    twist = []
    for _ in range(6):
        twist.append(t % 3)
        t //= 3
    twist = twist[::-1]
    twist.append((-sum(twist)) % 3)
    cf = _corner_facelets()
    out = np.arange(SPEC.n_facelets)
    for pos in range(7):
        cubie = perm[pos]
        for k in range(3):
            out[cf[pos, (k + twist[pos]) % 3]] = cf[cubie, k]
    return CubeState(SPEC, out)


@lru_cache(maxsize=None)
def move_tables() -> tuple[np.ndarray, np.ndarray]:
    """(perm_move, twist_move) of shapes (5040, 9) and (729, 9), int32.

    Twist transitions do not depend on which cubies are where, so the two
    coordinates move independently.
    """
    gens = generator_table(SPEC)
    perm_move = np.empty((N_PERM, len(gens)), dtype=np.int32)
    twist_move = np.empty((N_TWIST, len(gens)), dtype=np.int32)
    for p in range(N_PERM):
        s = decode(p * N_TWIST).perm
        for m, g in enumerate(gens):
            perm_move[p, m] = encode(CubeState(SPEC, s[g])) // N_TWIST
    for t in range(N_TWIST):
        s = decode(t).perm
        for m, g in enumerate(gens):
            twist_move[t, m] = encode(CubeState(SPEC, s[g])) % N_TWIST
    perm_move.setflags(write=False)
    twist_move.setflags(write=False)
    return perm_move, twist_move


def neighbors(index: np.ndarray) -> np.ndarray:
    """Packed neighbours of each index, shape (len(index), 9)."""
    perm_move, twist_move = move_tables()
    index = np.asarray(index, dtype=np.int64)
    p, t = np.divmod(index, N_TWIST)
    return perm_move[p].astype(np.int64) * N_TWIST + twist_move[t]
