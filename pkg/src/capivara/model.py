"""Canonical domain records: blocks, package records, vouches, trail ops.

Canonical form is minified JSON with lexicographically sorted keys; a
chain file is one canonical block per line. A block's hash covers the
canonical form minus the hash and forger signature (the signature is made
over the hash, so it cannot be part of the preimage). Popularity snapshots
serialize as name-sorted entry lists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .crypto import Challenge, Digest, Solution, hash_bytes
from .pkgbuild import PackageRecipe

MAX_PACKAGES_PER_BLOCK = 100
MAX_NEW_TRAILS_PER_BLOCK = 10


class MalformedRecordError(ValueError):
    """Raised when a serialized record cannot be decoded."""


@dataclass(frozen=True)
class Identity:
    name: str
    public_key: str

    def to_obj(self) -> dict:
        return {"name": self.name, "public_key": self.public_key}

    @classmethod
    def from_obj(cls, obj: dict) -> "Identity":
        return cls(name=obj["name"], public_key=obj["public_key"])


@dataclass(frozen=True)
class PackageRecord:
    recipe: PackageRecipe
    publisher: Identity
    signature: str
    submitted_at: int

    @property
    def checksum(self) -> Digest:
        return self.recipe.checksum

    def signing_payload(self) -> bytes:
        return self.recipe.canonical_bytes()

    def to_obj(self) -> dict:
        return {
            "package": self.recipe.to_obj(),
            "publisher": {
                "name": self.publisher.name,
                "public_key": self.publisher.public_key,
                "signature": self.signature,
            },
            "submitted_at": self.submitted_at,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "PackageRecord":
        publisher = obj["publisher"]
        return cls(
            recipe=PackageRecipe.from_obj(obj["package"]),
            publisher=Identity(name=publisher["name"], public_key=publisher["public_key"]),
            signature=publisher["signature"],
            submitted_at=obj["submitted_at"],
        )


@dataclass(frozen=True)
class VouchRecord:
    package_checksum: Digest
    trail_name: str
    member: Identity
    signature: str

    def signing_payload(self) -> bytes:
        return vouch_payload(self.package_checksum, self.trail_name)

    def to_obj(self) -> dict:
        return {
            "member": self.member.to_obj(),
            "package_checksum": self.package_checksum,
            "signature": self.signature,
            "trail_name": self.trail_name,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "VouchRecord":
        return cls(
            package_checksum=obj["package_checksum"],
            trail_name=obj["trail_name"],
            member=Identity.from_obj(obj["member"]),
            signature=obj["signature"],
        )


def vouch_payload(package_checksum: Digest, trail_name: str) -> bytes:
    # The signed payload is exactly the package checksum plus the trail name.
    return (package_checksum + trail_name).encode("utf-8")


class TrailOpKind(str, Enum):
    CREATE_REQUEST = "create_request"
    CREATE_CHALLENGE = "create_challenge"
    CREATE_CONFIRM = "create_confirm"
    MEMBER_INVITE = "member_invite"
    MEMBER_ACCEPT = "member_accept"
    MEMBER_REMOVE = "member_remove"


def invite_payload(trail_name: str, invitee_public_key: str) -> bytes:
    return f"invite:{trail_name}:{invitee_public_key}".encode("utf-8")


def remove_payload(trail_name: str, target_public_key: str) -> bytes:
    return f"remove:{trail_name}:{target_public_key}".encode("utf-8")


@dataclass(frozen=True)
class TrailOp:
    """One trail lifecycle operation; payload shape depends on the kind.

    create_request: {}
    create_challenge / member_invite: sealed challenge (invites also carry
    the inviter identity and signature); create_confirm / member_accept:
    solution; member_remove: remover identity and signature.
    """

    kind: TrailOpKind
    trail_name: str
    subject: Identity
    payload: dict = field(default_factory=dict)

    def challenge(self) -> Challenge | None:
        obj = self.payload.get("challenge")
        try:
            return Challenge.from_obj(obj) if obj else None
        except (KeyError, TypeError):
            return None

    def solution(self) -> Solution | None:
        obj = self.payload.get("solution")
        try:
            return Solution.from_obj(obj) if obj else None
        except (KeyError, TypeError):
            return None

    def actor(self) -> Identity | None:
        """Inviter or remover identity, for kinds that carry one."""
        obj = self.payload.get("inviter") or self.payload.get("remover")
        try:
            return Identity.from_obj(obj) if obj else None
        except (KeyError, TypeError):
            return None

    def to_obj(self) -> dict:
        return {
            "kind": self.kind.value,
            "payload": self.payload,
            "subject": self.subject.to_obj(),
            "trail_name": self.trail_name,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "TrailOp":
        payload = obj.get("payload", {})
        if not isinstance(payload, dict):
            raise MalformedRecordError("trail op payload must be an object")
        return cls(
            kind=TrailOpKind(obj["kind"]),
            trail_name=obj["trail_name"],
            subject=Identity.from_obj(obj["subject"]),
            payload=payload,
        )


@dataclass(frozen=True)
class ForgerCandidate:
    user: str
    trails: tuple[str, ...]
    popularity: float

    def to_obj(self) -> dict:
        return {
            "popularity": self.popularity,
            "trails": list(self.trails),
            "user": self.user,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ForgerCandidate":
        return cls(user=obj["user"], trails=tuple(obj["trails"]), popularity=obj["popularity"])


@dataclass(frozen=True)
class ForgeMetadata:
    candidates: tuple[ForgerCandidate, ...]
    popularity_at_generation: tuple[tuple[str, float], ...]
    amount_of_packages: int
    amount_of_valid_trails: int

    def to_obj(self) -> dict:
        return {
            "amount_of_packages": self.amount_of_packages,
            "amount_of_valid_trails": self.amount_of_valid_trails,
            "everybody_that_can_forge_this_block": [c.to_obj() for c in self.candidates],
            "popularity_at_generation": popularity_to_obj(dict(self.popularity_at_generation)),
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ForgeMetadata":
        return cls(
            candidates=tuple(
                ForgerCandidate.from_obj(c) for c in obj["everybody_that_can_forge_this_block"]
            ),
            popularity_at_generation=tuple(
                sorted(popularity_from_obj(obj["popularity_at_generation"]).items())
            ),
            amount_of_packages=obj["amount_of_packages"],
            amount_of_valid_trails=obj["amount_of_valid_trails"],
        )


def popularity_to_obj(popularity: dict[str, float]) -> list[dict]:
    return [{"name": name, "pop": float(pop)} for name, pop in sorted(popularity.items())]


def popularity_from_obj(entries: list[dict]) -> dict[str, float]:
    return {entry["name"]: float(entry["pop"]) for entry in entries}


@dataclass
class Block:
    number: int
    timestamp: int
    previous_hash: Digest
    forger: Identity
    forger_signature: str
    packages: list[PackageRecord]
    vouches: list[VouchRecord]
    trail_ops: list[TrailOp]
    popularity: dict[str, float]
    downloads: dict[str, int]
    metadata: ForgeMetadata
    hash: Digest = ""

    def to_obj(self, sealed: bool = True) -> dict:
        obj = {
            "downloads": {name: int(count) for name, count in sorted(self.downloads.items())},
            "forger": self.forger.to_obj(),
            "metadata": self.metadata.to_obj(),
            "number": self.number,
            "packages": [p.to_obj() for p in self.packages],
            "popularity": popularity_to_obj(self.popularity),
            "previous_hash": self.previous_hash,
            "timestamp": self.timestamp,
            "trails": [op.to_obj() for op in self.trail_ops],
            "vouches": [v.to_obj() for v in self.vouches],
        }
        if sealed:
            obj["forger_signature"] = self.forger_signature
            obj["hash"] = self.hash
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "Block":
        try:
            return cls(
                number=obj["number"],
                timestamp=obj["timestamp"],
                previous_hash=obj["previous_hash"],
                forger=Identity.from_obj(obj["forger"]),
                forger_signature=obj.get("forger_signature", ""),
                packages=[PackageRecord.from_obj(p) for p in obj["packages"]],
                vouches=[VouchRecord.from_obj(v) for v in obj["vouches"]],
                trail_ops=[TrailOp.from_obj(op) for op in obj["trails"]],
                popularity=popularity_from_obj(obj["popularity"]),
                downloads={name: int(n) for name, n in obj["downloads"].items()},
                metadata=ForgeMetadata.from_obj(obj["metadata"]),
                hash=obj.get("hash", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecordError(f"malformed block object: {exc}") from exc


def canonical_serialize(block: Block) -> bytes:
    """Deterministic hash preimage: sorted keys, minified, no seal fields."""
    return json.dumps(block.to_obj(sealed=False), sort_keys=True, separators=(",", ":")).encode(
        "utf-8"
    )


def block_digest(block: Block) -> Digest:
    return hash_bytes(canonical_serialize(block))


def block_to_line(block: Block) -> str:
    """Full canonical form, one line, as stored in chain files."""
    return json.dumps(block.to_obj(sealed=True), sort_keys=True, separators=(",", ":"))


def block_from_line(line: str) -> Block:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"unparseable block line: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedRecordError("block line is not an object")
    return Block.from_obj(obj)
