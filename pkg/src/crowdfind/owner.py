"""The object owner's side of both polling schemes.

The owner is the only party that knows the lost tag's id.  Each round it
receives one bit vector per detector and drops every candidate that shows an
empty slot where the lost tag would have answered.  In the advanced scheme it
additionally decides how many real positions to poll, so that a detector
covering the tag keeps seeing a ones-frequency that passes a chi-squared test
against the dummy-only rate.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.special import erfc

from ._rng import draw_u64
from .protocol import (
    FrameVector,
    InvalidParameter,
    OwnerKey,
    ProtocolError,
    PublicKey,
    SealedLocation,
    TagId,
    open_location,
    reply_slots,
)
from .world import Location

__all__ = [
    "ObjectRequest",
    "initial_request",
    "request_digest",
    "OwnerState",
    "new_owner_state",
    "basic_round",
    "advanced_round",
    "PositionPlan",
    "plan_positions",
    "gamma_for_detector",
    "dummy_one_prob",
    "initial_ones",
    "chi_square_stat",
    "chi_square_p_value",
    "check_termination",
    "Retrieval",
    "retrieve_locations",
    "LocationEstimate",
    "estimate_location",
]


# -- pre-polling --------------------------------------------------------------


def request_digest(tag_id: int, nonce: int) -> bytes:
    """``H(id || r)``: 64-bit BLAKE2b digest."""
    msg = int(tag_id).to_bytes(8, "big") + int(nonce).to_bytes(8, "big")
    return hashlib.blake2b(msg, digest_size=8).digest()


@dataclass(frozen=True)
class ObjectRequest:
    digest: bytes
    nonce: int
    public_key: PublicKey
    target_area: object = None

    def matches(self, tag_id: int) -> bool:
        """What a tag evaluates on hearing the query."""
        return request_digest(tag_id, self.nonce) == self.digest


def initial_request(lost_id: TagId, owner_key: OwnerKey, rng: np.random.Generator, target_area=None) -> ObjectRequest:
    nonce = draw_u64(rng)
    return ObjectRequest(request_digest(lost_id, nonce), nonce, owner_key.public, target_area)


# -- polling state ------------------------------------------------------------


@dataclass(frozen=True)
class OwnerState:
    """Owner's private view after ``round`` completed polling rounds."""

    lost_id: TagId
    candidates: frozenset[int]
    scheme: str = "basic"
    round: int = 0
    stall: int = 0
    ones_prev: Mapping[int, int] = field(default_factory=dict)
    eliminated: frozenset[int] = frozenset()
    clamped_rounds: int = 0


def new_owner_state(lost_id: TagId, n_detectors: int, scheme: str = "basic") -> OwnerState:
    if scheme not in ("basic", "advanced"):
        raise InvalidParameter(f"unknown scheme {scheme!r}")
    return OwnerState(TagId(int(lost_id)), frozenset(range(n_detectors)), scheme)


def _frame_matrix(frames, width: int, n_detectors: int | None = None) -> np.ndarray:
    if isinstance(frames, np.ndarray):
        mat = frames.astype(bool, copy=False)
    elif isinstance(frames, Mapping):
        n = n_detectors if n_detectors is not None else max(frames) + 1
        mat = np.zeros((n, width), dtype=bool)
        for d, fv in frames.items():
            bits = fv.bits if isinstance(fv, FrameVector) else np.asarray(fv, dtype=bool)
            if bits.size != width:
                raise ProtocolError(f"frame of detector {d} has length {bits.size}, expected {width}")
            mat[d] = bits
        return mat
    else:
        mat = np.array([fv.bits if isinstance(fv, FrameVector) else fv for fv in frames], dtype=bool)
    if mat.ndim != 2 or mat.shape[1] != width:
        raise ProtocolError(f"frames must have length {width}, got shape {mat.shape}")
    return mat


def _advance(state: OwnerState, survivors: frozenset[int], **changes) -> OwnerState:
    unchanged = survivors == state.candidates
    return dataclasses.replace(
        state,
        candidates=survivors,
        round=state.round + 1,
        stall=state.stall + 1 if unchanged else 0,
        eliminated=state.candidates - survivors,
        **changes,
    )


def basic_round(state: OwnerState, frames, round_seed: int, f: int, k: int) -> OwnerState:
    """Drop every candidate whose ``f``-bit vector is empty at one of the lost tag's slots."""
    mat = _frame_matrix(frames, f)
    slots = np.array(sorted(reply_slots(state.lost_id, round_seed, f, k)), dtype=np.int64)
    cands = np.array(sorted(state.candidates), dtype=np.int64)
    if cands.size and cands.max() >= mat.shape[0]:
        raise ProtocolError("missing frames for some candidates")
    keep = mat[np.ix_(cands, slots)].all(axis=1) if cands.size else np.zeros(0, dtype=bool)
    return _advance(state, frozenset(int(i) for i in cands[keep]))


# -- chi-squared gate ---------------------------------------------------------


def chi_square_stat(p_ob: float, p1_prime: float, n: float = 1.0) -> float:
    """Pearson statistic for a two-cell (one/zero) table.

    With ``n = 1`` this is the statistic on frequencies; with ``n`` equal to the
    number of observed bits it is the usual count-based Pearson statistic.
    """
    if not 0.0 < p1_prime < 1.0:
        raise InvalidParameter(f"expected one-probability must be in (0, 1), got {p1_prime}")
    if not 0.0 <= p_ob <= 1.0:
        raise InvalidParameter(f"observed frequency must be in [0, 1], got {p_ob}")
    d = p_ob - p1_prime
    return n * (d * d / p1_prime + d * d / (1.0 - p1_prime))


def chi_square_p_value(p_ob: float, p1_prime: float, n: float = 1.0) -> float:
    """Upper tail of chi-squared with one degree of freedom: ``erfc(sqrt(chi2 / 2))``."""
    return float(erfc(math.sqrt(chi_square_stat(p_ob, p1_prime, n) / 2.0)))


def dummy_one_prob(f: int, k: int, q: float, c: float) -> float:
    """Probability a polled bit is one for a detector hearing only dummies."""
    return 1.0 - (1.0 - 1.0 / f) ** (c * q * k)


def initial_ones(f: int, k: int, q: float, c: float, omega: int) -> int:
    """Seed value for the previous-round ones count before round 1."""
    return math.ceil(dummy_one_prob(f, k, q, c) * omega)


def gamma_for_detector(
    ones_prev: int,
    *,
    f: int,
    k: int,
    q: float,
    c: float,
    omega: int,
    p_thre: float,
    n: float = 1.0,
) -> int:
    """Largest real-position count a covering detector could absorb unnoticed.

    Walks ``gamma = 0, 1, ...`` while the projected two-round ones-frequency
    still passes the gate; stops at ``min(k, omega)``.  Returns ``-1`` when
    even ``gamma = 0`` fails and ``0`` when the gate is never entered
    (``p_thre >= 1``).  Without any dummy traffic (or with a frame so short
    that every slot is busy) the gate is undefined and the cap is returned.
    """
    p1p = dummy_one_prob(f, k, q, c)
    cap = min(k, omega)
    if not 0.0 < p1p < 1.0:
        return cap
    gamma, p_val = 0, 1.0
    while p_val > p_thre:
        p_hat = p1p * (omega - gamma) / omega + gamma / omega
        p_ob = (p_hat * omega + ones_prev) / (2 * omega)
        p_val = chi_square_p_value(p_ob, p1p, n)
        if p_val > p_thre:
            if gamma >= cap:
                break
            gamma += 1
        else:
            gamma -= 1
    return gamma


@dataclass(frozen=True)
class PositionPlan:
    """The ``omega`` polled positions of one advanced round."""

    gamma: int
    real_positions: tuple[int, ...]
    dummy_positions: tuple[int, ...]
    positions: tuple[int, ...]
    clamped: bool = False
    gamma_raw: int = 0

    @property
    def real_index(self) -> np.ndarray:
        """Indices into ``positions`` (and thus into the ω-bit vectors) of real positions."""
        real = set(self.real_positions)
        return np.array([y for y, p in enumerate(self.positions) if p in real], dtype=np.int64)


def plan_positions(
    state: OwnerState,
    round_seed: int,
    rng: np.random.Generator,
    *,
    f: int,
    k: int,
    omega: int,
    q: float,
    c: float,
    p_thre: float,
    chi2_mode: str = "counts",
) -> PositionPlan:
    if omega > f:
        raise InvalidParameter(f"omega={omega} exceeds f={f}")
    n = 2 * omega if chi2_mode == "counts" else 1.0
    b0 = initial_ones(f, k, q, c, omega)
    gamma = min(k, omega)
    cache: dict[int, int] = {}
    for i in state.candidates:
        b = state.ones_prev.get(i, b0) if state.round else b0
        if b not in cache:
            cache[b] = gamma_for_detector(b, f=f, k=k, q=q, c=c, omega=omega, p_thre=p_thre, n=n)
        gamma = min(gamma, cache[b])
    raw = gamma
    real_all = sorted(reply_slots(state.lost_id, round_seed, f, k))
    gamma = max(1, min(gamma, k, omega, len(real_all)))
    real = rng.choice(real_all, size=gamma, replace=False)
    pool = np.setdiff1d(np.arange(f), real_all)
    n_dummy = omega - gamma
    if n_dummy > pool.size:
        # fewer non-real slots than needed only when omega is close to f
        pool = np.setdiff1d(np.arange(f), real)
    dummy = rng.choice(pool, size=n_dummy, replace=False)
    return PositionPlan(
        gamma,
        tuple(sorted(int(p) for p in real)),
        tuple(sorted(int(p) for p in dummy)),
        tuple(sorted(int(p) for p in np.concatenate([real, dummy]))),
        clamped=gamma != raw,
        gamma_raw=raw,
    )


def advanced_round(state: OwnerState, frames, plan: PositionPlan) -> OwnerState:
    """Eliminate on the real positions only; remember each survivor's ones count."""
    omega = len(plan.positions)
    mat = _frame_matrix(frames, omega)
    cands = np.array(sorted(state.candidates), dtype=np.int64)
    if cands.size and cands.max() >= mat.shape[0]:
        raise ProtocolError("missing frames for some candidates")
    sub = mat[cands] if cands.size else np.zeros((0, omega), dtype=bool)
    keep = sub[:, plan.real_index].all(axis=1)
    ones = sub.sum(axis=1)
    survivors = frozenset(int(i) for i in cands[keep])
    return _advance(
        state,
        survivors,
        ones_prev={int(i): int(b) for i, b, kp in zip(cands, ones, keep) if kp},
        clamped_rounds=state.clamped_rounds + int(plan.clamped),
    )


def check_termination(state: OwnerState, tau: int) -> bool:
    """True once at most one candidate is left or the set stalled for ``tau`` rounds."""
    if tau < 2:
        raise InvalidParameter(f"tau must be >= 2, got {tau}")
    return len(state.candidates) <= 1 or state.stall >= tau


# -- retrieval and estimate ---------------------------------------------------


@dataclass(frozen=True)
class Retrieval:
    requested: tuple[int, ...]  # all the provider gets to see
    opened: Mapping[int, tuple]  # detector -> (pseudonym, Location)


def retrieve_locations(
    state: OwnerState,
    lam: int,
    sealed: Mapping[int, SealedLocation],
    owner_key: OwnerKey,
    rng: np.random.Generator,
) -> Retrieval:
    """Fetch ``lam`` sealed locations: every candidate plus uniformly drawn decoys.

    ``sealed`` is either a plain mapping or a provider exposing ``sealed`` and
    ``serve(indices)``; in the latter case the provider logs the request set.
    """
    n_cand = len(state.candidates)
    if lam < n_cand:
        raise InvalidParameter(f"lam={lam} is smaller than the {n_cand} remaining candidates")
    store = sealed.sealed if hasattr(sealed, "serve") else sealed
    excluded = np.array(sorted(set(store) - state.candidates), dtype=np.int64)
    n_decoys = lam - n_cand
    if n_decoys > excluded.size:
        raise InvalidParameter(f"lam={lam} exceeds the {len(store)} detectors available")
    decoys = rng.choice(excluded, size=n_decoys, replace=False) if n_decoys else []
    requested = tuple(sorted(set(state.candidates) | {int(d) for d in decoys}))
    entries = sealed.serve(requested) if hasattr(sealed, "serve") else {d: store[d] for d in requested}
    return Retrieval(requested, {d: open_location(entries[d], owner_key) for d in requested})


@dataclass(frozen=True)
class LocationEstimate:
    center: Location
    radius: float

    def contains(self, loc) -> bool:
        return math.hypot(loc[0] - self.center.x, loc[1] - self.center.y) <= self.radius


def estimate_location(locations: Iterable, R: float) -> LocationEstimate | None:
    """Centroid of the candidate locations and a disk covering every candidate's range.

    Returns ``None`` when there is nothing to estimate from.
    """
    pts = np.array([tuple(p) for p in locations], dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        return None
    cx, cy = pts.mean(axis=0)
    spread = float(np.max(np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)))
    return LocationEstimate(Location(float(cx), float(cy)), R + spread)
