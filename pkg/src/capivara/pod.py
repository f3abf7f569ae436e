"""Proof-of-download: tamper-insert delivery challenges and the download ledger.

A provider inserts a random chunk into the package before delivery and
remembers the tampered hash. A client proves possession by reporting that
hash; only then does it learn which bytes to strip, and only the first
correct report per challenge counts toward the trail's download tally.
The ledger's interval counts are snapshotted into every block.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .crypto import Digest, hash_bytes

DEFAULT_CHUNK_LENGTH = 32


class PodError(ValueError):
    pass


@dataclass
class ChallengeRecord:
    id: Digest
    package_checksum: Digest
    trail_name: str
    offset: int
    length: int
    expected_tampered_hash: Digest
    solved: bool = False


@dataclass(frozen=True)
class Confirmed:
    offset: int
    length: int


@dataclass(frozen=True)
class Duplicate:
    pass


@dataclass(frozen=True)
class Rejected:
    pass


ConfirmOutcome = Confirmed | Duplicate | Rejected


def prepare_delivery(
    package_bytes: bytes,
    trail_name: str,
    rng_seed: int | str | bytes,
    chunk_length: int = DEFAULT_CHUNK_LENGTH,
) -> tuple[bytes, ChallengeRecord]:
    """Insert a seeded random chunk at a seeded random offset and record
    the tampered hash the client must report back."""
    if not package_bytes:
        raise PodError("cannot prepare an empty package")
    if chunk_length < 1:
        raise PodError("chunk length must be at least 1")
    rng = random.Random(rng_seed)
    offset = rng.randint(0, len(package_bytes))
    chunk = rng.randbytes(chunk_length)
    nonce = rng.randbytes(16)
    tampered = package_bytes[:offset] + chunk + package_bytes[offset:]
    checksum = hash_bytes(package_bytes)
    record = ChallengeRecord(
        id=hash_bytes(bytes.fromhex(checksum) + offset.to_bytes(8, "big") + nonce),
        package_checksum=checksum,
        trail_name=trail_name,
        offset=offset,
        length=chunk_length,
        expected_tampered_hash=hash_bytes(tampered),
    )
    return tampered, record


def restore_package(tampered_bytes: bytes, offset: int, length: int) -> bytes:
    """Strip the inserted chunk; inverse of prepare_delivery."""
    if offset < 0 or length < 1 or offset + length > len(tampered_bytes):
        raise PodError("offset/length outside the tampered package")
    return tampered_bytes[:offset] + tampered_bytes[offset + length :]


@dataclass
class DownloadSnapshot:
    per_trail: dict[str, int]

    @property
    def t(self) -> int:
        return sum(self.per_trail.values())


@dataclass
class DownloadLedger:
    open_challenges: dict[Digest, ChallengeRecord] = field(default_factory=dict)
    interval_counts: dict[str, int] = field(default_factory=dict)
    cumulative_counts: dict[str, int] = field(default_factory=dict)

    def register(self, record: ChallengeRecord) -> None:
        self.open_challenges[record.id] = record

    def confirm_download(self, challenge_id: Digest, reported_hash: str) -> ConfirmOutcome:
        """First correct hash wins the chunk location and counts once;
        repeats are Duplicate, everything else Rejected."""
        record = self.open_challenges.get(challenge_id)
        if record is None:
            return Rejected()
        if record.solved:
            return Duplicate() if reported_hash == record.expected_tampered_hash else Rejected()
        if reported_hash != record.expected_tampered_hash:
            return Rejected()
        record.solved = True
        self._credit(record.trail_name, 1)
        return Confirmed(offset=record.offset, length=record.length)

    def record_confirmed(self, trail_name: str, count: int = 1) -> None:
        """Bulk credit for synthetic download counts (simulation path)."""
        if count < 0:
            raise PodError("negative download count")
        self._credit(trail_name, count)

    def _credit(self, trail_name: str, count: int) -> None:
        self.interval_counts[trail_name] = self.interval_counts.get(trail_name, 0) + count
        self.cumulative_counts[trail_name] = self.cumulative_counts.get(trail_name, 0) + count

    def snapshot_and_reset(self) -> DownloadSnapshot:
        """Publish the interval counts and start a new interval; unsolved
        challenges expire with the interval that opened them."""
        snapshot = DownloadSnapshot(per_trail=dict(self.interval_counts))
        self.interval_counts = {}
        self.open_challenges = {
            cid: record for cid, record in self.open_challenges.items() if record.solved
        }
        return snapshot
