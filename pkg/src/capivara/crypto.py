"""Hashing, a pluggable signature scheme, and possession-proof challenges.

Everything here is deterministic: identical inputs always yield identical
outputs, which is what makes chain replay and golden-file testing possible.

The signature scheme ships as a simulation mock behind a small interface.
Keys are derived by hashing, so a signature cannot be checked from the
public key alone; instead verification re-derives it through a registry of
private keys that any process can rebuild from the same seeds (by
convention, an identity's key seed is its name). The mock provides
deterministic identity, not secrecy; a real scheme can replace it without
touching callers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

# A Digest is sha256 output rendered as 64 lowercase hex characters.
Digest = str

ZERO_DIGEST = "0" * 64
NONCE_LENGTH = 32

_HEX_CHARS = frozenset("0123456789abcdef")


class SigningError(ValueError):
    """Raised for malformed key material."""


def hash_bytes(data: bytes) -> Digest:
    """sha256 of the input as 64-char lowercase hex."""
    return hashlib.sha256(data).hexdigest()


def is_digest(value: object) -> bool:
    return isinstance(value, str) and len(value) == 64 and set(value) <= _HEX_CHARS


def _seed_bytes(seed: str | bytes | int) -> bytes:
    if isinstance(seed, bytes):
        return seed
    if isinstance(seed, int):
        return str(seed).encode("utf-8")
    return seed.encode("utf-8")


@dataclass(frozen=True)
class KeyPair:
    private_key: bytes
    public_key: bytes

    @property
    def public_hex(self) -> str:
        return self.public_key.hex()


@dataclass(frozen=True)
class Challenge:
    """A sealed puzzle only the holder of the target private key can open."""

    id: Digest
    target_public_key: str
    sealed_nonce: str
    commitment: Digest

    def to_obj(self) -> dict:
        return {
            "id": self.id,
            "target_public_key": self.target_public_key,
            "sealed_nonce": self.sealed_nonce,
            "commitment": self.commitment,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "Challenge":
        return cls(
            id=obj["id"],
            target_public_key=obj["target_public_key"],
            sealed_nonce=obj["sealed_nonce"],
            commitment=obj["commitment"],
        )


@dataclass(frozen=True)
class Solution:
    challenge_id: Digest
    revealed_nonce: str

    def to_obj(self) -> dict:
        return {"challenge_id": self.challenge_id, "revealed_nonce": self.revealed_nonce}

    @classmethod
    def from_obj(cls, obj: dict) -> "Solution":
        return cls(challenge_id=obj["challenge_id"], revealed_nonce=obj["revealed_nonce"])


class MockSignatureScheme:
    """Hash-based stand-in for a real signature scheme.

    private = sha256("key:" + seed); public = sha256("pub:" + private);
    sign(m) = sha256("sig:" + private + m). Verification looks the private
    key up by public key and recomputes the signature, so it only succeeds
    for keys this scheme instance knows about.
    """

    def __init__(self) -> None:
        self._private_by_public: dict[bytes, bytes] = {}

    def keypair(self, seed: str | bytes | int) -> KeyPair:
        private = hashlib.sha256(b"key:" + _seed_bytes(seed)).digest()
        return self.register_private(private)

    def register_private(self, private_key: bytes) -> KeyPair:
        if not isinstance(private_key, bytes) or not private_key:
            raise SigningError("private key must be non-empty bytes")
        public = self.derive_public(private_key)
        self._private_by_public[public] = private_key
        return KeyPair(private_key=private_key, public_key=public)

    @staticmethod
    def derive_public(private_key: bytes) -> bytes:
        if not isinstance(private_key, bytes) or not private_key:
            raise SigningError("private key must be non-empty bytes")
        return hashlib.sha256(b"pub:" + private_key).digest()

    def sign(self, message: bytes, private_key: bytes) -> str:
        if not isinstance(private_key, bytes) or not private_key:
            raise SigningError("private key must be non-empty bytes")
        return hashlib.sha256(b"sig:" + private_key + message).hexdigest()

    def verify(self, message: bytes, signature: str, public_key: bytes | str) -> bool:
        private = self.private_for(public_key)
        if private is None:
            return False
        return hashlib.sha256(b"sig:" + private + message).hexdigest() == signature

    def private_for(self, public_key: bytes | str) -> bytes | None:
        if isinstance(public_key, str):
            try:
                public_key = bytes.fromhex(public_key)
            except ValueError:
                return None
        return self._private_by_public.get(public_key)

    # -- challenges ---------------------------------------------------------

    def make_challenge(self, target_public_key: str, rng_seed: str | bytes | int) -> Challenge:
        """Build a challenge whose nonce only the key holder can recover.

        The nonce is sealed by XOR with a keystream derived from the target
        private key, which the scheme obtains through its registry.
        """
        public = bytes.fromhex(target_public_key)
        private = self._private_by_public.get(public)
        if private is None:
            raise SigningError("unknown target public key")
        nonce = hashlib.sha256(b"nonce:" + public + _seed_bytes(rng_seed)).digest()
        commitment = hash_bytes(nonce)
        challenge_id = hash_bytes(b"challenge:" + public + bytes.fromhex(commitment))
        sealed = _xor(nonce, _keystream(private, challenge_id))
        return Challenge(
            id=challenge_id,
            target_public_key=target_public_key,
            sealed_nonce=sealed.hex(),
            commitment=commitment,
        )


def _keystream(private_key: bytes, challenge_id: Digest) -> bytes:
    return hashlib.sha256(b"seal:" + private_key + bytes.fromhex(challenge_id)).digest()


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def solve_challenge(challenge: Challenge, private_key: bytes) -> Solution:
    """Unseal the nonce with the given key.

    A wrong key produces a garbage nonce; the resulting solution simply
    fails verification rather than raising.
    """
    if not isinstance(private_key, bytes) or not private_key:
        raise SigningError("private key must be non-empty bytes")
    revealed = _xor(bytes.fromhex(challenge.sealed_nonce), _keystream(private_key, challenge.id))
    return Solution(challenge_id=challenge.id, revealed_nonce=revealed.hex())


def verify_solution(challenge: Challenge, solution: Solution) -> bool:
    if solution.challenge_id != challenge.id:
        return False
    try:
        revealed = bytes.fromhex(solution.revealed_nonce)
    except (ValueError, TypeError):
        return False
    return hash_bytes(revealed) == challenge.commitment
