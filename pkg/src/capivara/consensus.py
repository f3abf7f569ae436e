"""Per-block decision logic: popularity blend, forger draw, admission caps.

The popularity update blends 30% of a trail's previous share with 70% of
its share of the interval's confirmed downloads, then normalizes back to
percentages, so every snapshot with at least one trail sums to 100. The
forger draw is seeded from the parent block hash and the height, making
it recomputable by any validator.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .crypto import Digest, hash_bytes
from .model import Identity, MAX_NEW_TRAILS_PER_BLOCK, MAX_PACKAGES_PER_BLOCK, PackageRecord
from .trails import TrailRegistry

PREVIOUS_WEIGHT = 0.3
CURRENT_WEIGHT = 0.7
TOP_TRAILS = 4


class ConsensusError(ValueError):
    pass


def update_popularity(
    prev: dict[str, float], interval_downloads: dict[str, int]
) -> dict[str, float]:
    """Blend previous shares with interval download shares (per-trail
    raw = 0.3*(pp/100)*t + 0.7*cp, normalized to percentages).

    A zero-download interval leaves the snapshot unchanged; trails absent
    from `prev` enter with a previous share of 0.
    """
    if any(count < 0 for count in interval_downloads.values()):
        raise ConsensusError("negative download count")
    total = sum(interval_downloads.values())
    if total == 0:
        return dict(prev)
    names = sorted(set(prev) | set(interval_downloads))
    raw = {
        name: PREVIOUS_WEIGHT * (prev.get(name, 0.0) / 100.0) * total
        + CURRENT_WEIGHT * interval_downloads.get(name, 0)
        for name in names
    }
    raw_total = sum(raw[name] for name in names)
    return {name: 100.0 * raw[name] / raw_total for name in names}


@dataclass(frozen=True)
class ForgerDraw:
    seed: Digest
    top_trails: tuple[str, ...]
    candidates: tuple[tuple[Identity, str], ...]  # (member, trail represented)
    forger: Identity
    forger_trail: str


def draw_seed(prev_block_hash: Digest, height: int) -> Digest:
    return hash_bytes(bytes.fromhex(prev_block_hash) + height.to_bytes(8, "big"))


def select_forgers(
    snapshot: dict[str, float],
    registry: TrailRegistry,
    prev_block_hash: Digest,
    height: int,
) -> ForgerDraw:
    """Pick the top-4 active trails by popularity (ties by name), one
    member per trail uniformly, then the forger uniformly among them."""
    eligible = [t for t in registry.active_trails() if t.members]
    if not eligible:
        raise ConsensusError("no active trail with members")
    eligible.sort(key=lambda t: (-snapshot.get(t.name, 0.0), t.name))
    top = eligible[:TOP_TRAILS]

    seed = draw_seed(prev_block_hash, height)
    rng = random.Random(int(seed, 16))
    candidates: list[tuple[Identity, str]] = []
    for trail in top:
        members = sorted(trail.members.values(), key=lambda m: (m.name, m.public_key))
        candidates.append((members[rng.randrange(len(members))], trail.name))
    forger, forger_trail = candidates[rng.randrange(len(candidates))]
    return ForgerDraw(
        seed=seed,
        top_trails=tuple(t.name for t in top),
        candidates=tuple(candidates),
        forger=forger,
        forger_trail=forger_trail,
    )


def publisher_preference(
    identity: Identity, snapshot: dict[str, float], registry: TrailRegistry
) -> float:
    """Sum of the popularity of each active trail the identity belongs to."""
    return sum(snapshot.get(name, 0.0) for name in registry.member_trails(identity))


def admit_packages(
    pending: list[PackageRecord],
    snapshot: dict[str, float],
    registry: TrailRegistry,
    limit: int = MAX_PACKAGES_PER_BLOCK,
) -> tuple[list[PackageRecord], list[PackageRecord]]:
    """Admit up to `limit` records by (preference desc, submit time asc,
    name asc); the rest stay pending for the next block."""
    ranked = sorted(
        pending,
        key=lambda record: (
            -publisher_preference(record.publisher, snapshot, registry),
            record.submitted_at,
            record.recipe.name,
        ),
    )
    return ranked[:limit], ranked[limit:]


@dataclass(frozen=True)
class TrailRequest:
    trail_name: str
    requester: Identity
    requested_at: int


def admit_trail_requests(
    pending: list[TrailRequest],
    snapshot: dict[str, float],
    registry: TrailRegistry,
    limit: int = MAX_NEW_TRAILS_PER_BLOCK,
) -> tuple[list[TrailRequest], list[TrailRequest]]:
    """Same preference ordering as packages, tie-broken by (request time,
    trail name); at most `limit` new trails per block."""
    ranked = sorted(
        pending,
        key=lambda request: (
            -publisher_preference(request.requester, snapshot, registry),
            request.requested_at,
            request.trail_name,
        ),
    )
    return ranked[:limit], ranked[limit:]


def active_popularity(snapshot: dict[str, float], registry: TrailRegistry) -> dict[str, float]:
    """Restrict a snapshot to trails currently active; the blend's
    normalization redistributes the dropped share on the next update."""
    active = {t.name for t in registry.active_trails()}
    return {name: pop for name, pop in snapshot.items() if name in active}
