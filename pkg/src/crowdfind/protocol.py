"""Deterministic protocol primitives.

The keyed slot hash, framed slotted ALOHA frames (full and position-selected),
and an in-process model of sealed locations.  Everything here is a pure
function of its arguments; randomness is always passed in explicitly.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Iterable, NewType, Sequence

import numpy as np

__all__ = [
    "InvalidParameter",
    "ProtocolError",
    "TagId",
    "Pseudonym",
    "HashFamily",
    "hash_slot",
    "reply_slots",
    "FrameVector",
    "PollRequest",
    "run_frame",
    "run_selected_frame",
    "batch_frames",
    "OwnerKey",
    "PublicKey",
    "SealedLocation",
    "seal_location",
    "open_location",
]

TagId = NewType("TagId", int)
Pseudonym = NewType("Pseudonym", int)

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class InvalidParameter(ValueError):
    """A parameter is outside its documented domain."""


class ProtocolError(RuntimeError):
    """Messages exchanged between parties are inconsistent."""


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps by design
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def _u64(values) -> np.ndarray:
    if isinstance(values, np.ndarray) and values.dtype == np.uint64:
        return np.atleast_1d(values)
    arr = [int(v) & _MASK64 for v in np.atleast_1d(np.asarray(values, dtype=object))]
    return np.array(arr, dtype=np.uint64)


def _check_frame_len(f: int) -> None:
    if int(f) < 1:
        raise InvalidParameter(f"frame length f must be >= 1, got {f}")


@dataclass(frozen=True)
class HashFamily:
    """``k`` publicly known slot hashes ``h_1..h_k``.

    Realized as one keyed 64-bit mixer with the hash index folded into the
    key, reduced modulo the frame length.
    """

    k: int
    domain_seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParameter(f"hash count k must be >= 1, got {self.k}")

    def _keys(self, round_seed: int, alphas: np.ndarray) -> np.ndarray:
        seed = np.uint64(int(round_seed) & _MASK64)
        dom = np.uint64(int(self.domain_seed) & _MASK64)
        with np.errstate(over="ignore"):
            return _mix64(_mix64(seed ^ (alphas * _GOLDEN)) ^ dom)

    def slots(self, ids, round_seed: int, f: int) -> np.ndarray:
        """Slot matrix of shape ``(len(ids), k)``; column ``a`` holds ``h_{a+1}``."""
        _check_frame_len(f)
        ids = _u64(ids)
        keys = self._keys(round_seed, np.arange(1, self.k + 1, dtype=np.uint64))
        with np.errstate(over="ignore"):
            h = _mix64(ids[:, None] ^ keys[None, :])
            h = _mix64(h + keys[None, :])
        return (h % np.uint64(f)).astype(np.int64)

    def slot(self, tag_id: int, round_seed: int, alpha: int, f: int) -> int:
        _check_frame_len(f)
        if not 1 <= alpha <= self.k:
            raise InvalidParameter(f"hash index alpha must be in [1, {self.k}], got {alpha}")
        keys = self._keys(round_seed, np.array([alpha], dtype=np.uint64))
        ids = _u64([tag_id])
        with np.errstate(over="ignore"):
            h = _mix64(_mix64(ids ^ keys) + keys)
        return int(h[0] % np.uint64(f))


@functools.lru_cache(maxsize=64)
def _family(k: int) -> HashFamily:
    # hash functions are public: every party uses the same family for a given k
    return HashFamily(k)


def hash_slot(tag_id: int, round_seed: int, alpha: int, f: int, k: int | None = None) -> int:
    """Slot ``h_alpha(id || round_seed) mod f``.

    ``k`` only bounds the admissible ``alpha``; the value of ``h_alpha`` does not
    depend on how many hashes the family has.
    """
    return _family(k if k is not None else max(int(alpha), 1)).slot(tag_id, round_seed, alpha, f)


def reply_slots(tag_id: int, round_seed: int, f: int, k: int) -> frozenset[int]:
    """Distinct slots a tag answers in one frame."""
    return frozenset(int(s) for s in _family(k).slots([tag_id], round_seed, f)[0])


@dataclass(frozen=True, eq=False)
class FrameVector:
    """Occupancy bits of one frame: bit ``y`` is 1 iff some tag replied in slot ``y``."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool).ravel()
        if bits.size == 0:
            raise InvalidParameter("a frame vector needs at least one slot")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def length(self) -> int:
        return int(self.bits.size)

    def ones(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __len__(self):
        return self.length

    def __getitem__(self, idx):
        return self.bits[idx]

    def __or__(self, other: "FrameVector") -> "FrameVector":
        if other.length != self.length:
            raise ProtocolError("cannot OR frames of different length")
        return FrameVector(self.bits | other.bits)

    def __eq__(self, other):
        if not isinstance(other, FrameVector):
            return NotImplemented
        return self.length == other.length and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash(self.bits.tobytes())

    def __repr__(self):
        return f"FrameVector({''.join('1' if b else '0' for b in self.bits)})"


@dataclass(frozen=True)
class PollRequest:
    """A polling request ``<r_x, f[, d_0..d_{w-1}]>``."""

    round_seed: int
    frame_len: int
    positions: tuple[int, ...] | None = None

    def __post_init__(self):
        _check_frame_len(self.frame_len)
        if self.positions is None:
            return
        pos = tuple(int(p) for p in self.positions)
        if not pos:
            raise InvalidParameter("positions must not be empty")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise InvalidParameter("positions must be strictly increasing")
        if pos[0] < 0 or pos[-1] >= self.frame_len:
            raise InvalidParameter(f"positions must lie in [0, {self.frame_len - 1}]")
        object.__setattr__(self, "positions", pos)

    @property
    def omega(self) -> int:
        return self.frame_len if self.positions is None else len(self.positions)


def _distinct_mask(slots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort each row and flag the first occurrence of every slot value."""
    s = np.sort(slots, axis=1)
    first = np.ones_like(s, dtype=bool)
    first[:, 1:] = s[:, 1:] != s[:, :-1]
    return s, first


def batch_frames(
    owners: np.ndarray,
    tag_ids,
    round_seed: int,
    n_frames: int,
    f: int,
    k: int,
    positions: Sequence[int] | None = None,
) -> tuple[np.ndarray, int, int]:
    """Run many frames at once.

    Tag ``tag_ids[j]`` replies inside frame ``owners[j]``.  Returns the bit
    matrix of shape ``(n_frames, f)`` (or ``(n_frames, len(positions))``), the
    number of one-bit responses emitted (one per distinct tag/slot pair that is
    polled), and the number of hash evaluations performed (``k`` per tag).
    """
    _check_frame_len(f)
    owners = np.asarray(owners, dtype=np.int64)
    width = f if positions is None else len(positions)
    bits = np.zeros((n_frames, width), dtype=bool)
    if owners.size == 0:
        return bits, 0, 0
    slots = _family(k).slots(tag_ids, round_seed, f)
    s, first = _distinct_mask(slots)
    rows = np.broadcast_to(owners[:, None], s.shape)
    if positions is None:
        bits[rows, s] = True
        return bits, int(first.sum()), int(slots.size)
    lut = np.full(f, -1, dtype=np.int64)
    lut[np.asarray(positions, dtype=np.int64)] = np.arange(width)
    idx = lut[s]
    hit = idx >= 0
    bits[rows[hit], idx[hit]] = True
    return bits, int((hit & first).sum()), int(slots.size)


def run_frame(tag_ids: Iterable[int], round_seed: int, f: int, k: int) -> tuple[FrameVector, int]:
    """Full frame of length ``f`` heard by one detector; returns (frame, responses)."""
    ids = list(tag_ids)
    bits, responses, _ = batch_frames(np.zeros(len(ids), dtype=np.int64), ids, round_seed, 1, f, k)
    return FrameVector(bits[0]), responses


def run_selected_frame(tag_ids: Iterable[int], request: PollRequest, k: int) -> tuple[FrameVector, int]:
    """Frame restricted to ``request.positions``; bit ``y`` reports slot ``positions[y]``."""
    if request.positions is None:
        raise InvalidParameter("selected polling needs explicit positions")
    ids = list(tag_ids)
    bits, responses, _ = batch_frames(
        np.zeros(len(ids), dtype=np.int64), ids, request.round_seed, 1,
        request.frame_len, k, request.positions,
    )
    return FrameVector(bits[0]), responses


# -- sealed locations ---------------------------------------------------------

_key_counter = itertools.count(1)


class PublicKey:
    """Encryption handle; anyone may seal with it, nobody can open with it."""

    __slots__ = ("key_id", "__vault")

    def __init__(self, key_id: int, vault: dict):
        self.key_id = key_id
        self.__vault = vault

    def _deposit(self, token: object, payload: tuple) -> None:
        self.__vault[token] = payload

    def __repr__(self):
        return f"PublicKey(id={self.key_id})"


class OwnerKey:
    """The object owner's private key.  Only this object can open sealed locations."""

    __slots__ = ("__vault", "public")

    def __init__(self):
        self.__vault: dict = {}
        self.public = PublicKey(next(_key_counter), self.__vault)

    @property
    def key_id(self) -> int:
        return self.public.key_id

    def _open(self, sealed: "SealedLocation") -> tuple:
        if sealed.key_id != self.key_id:
            raise PermissionError("sealed for a different key")
        return self.__vault[sealed._token]

    def __repr__(self):
        return f"OwnerKey(id={self.key_id})"


@dataclass(frozen=True, eq=False)
class SealedLocation:
    """Opaque ciphertext stand-in.  Carries no payload, only a key id and a token."""

    key_id: int
    _token: object = field(default_factory=object, repr=False)


def seal_location(location, pseudonym: int, public_key: PublicKey) -> SealedLocation:
    sealed = SealedLocation(public_key.key_id)
    public_key._deposit(sealed._token, (Pseudonym(int(pseudonym)), location))
    return sealed


def open_location(sealed: SealedLocation, owner_key: OwnerKey) -> tuple:
    """Return ``(pseudonym, location)``; only the matching owner key can do this."""
    return owner_key._open(sealed)
