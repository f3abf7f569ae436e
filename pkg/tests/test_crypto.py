import random

import pytest
from hypothesis import given, settings, strategies as st

from capivara.crypto import (
    MockSignatureScheme,
    SigningError,
    hash_bytes,
    is_digest,
    solve_challenge,
    verify_solution,
)

from reference_sha256 import sha256_hex


def test_hash_empty_matches_reference():
    assert hash_bytes(b"") == sha256_hex(b"")
    assert len(hash_bytes(b"")) == 64


def test_hash_agrees_with_independent_reference_on_corpus():
    rng = random.Random(7)
    vectors = [b"", b"a", b"abc", bytes(range(256))]
    vectors += [rng.randbytes(rng.randint(1, 300)) for _ in range(96)]
    for vector in vectors:
        assert hash_bytes(vector) == sha256_hex(vector)


def test_hash_deterministic():
    assert hash_bytes(b"same input") == hash_bytes(b"same input")


def test_hash_no_collisions_on_near_pairs():
    rng = random.Random(99)
    for _ in range(1000):
        data = bytearray(rng.randbytes(rng.randint(1, 64)))
        mutated = bytearray(data)
        position = rng.randrange(len(mutated))
        mutated[position] ^= 1 + rng.randrange(255)
        assert hash_bytes(bytes(data)) != hash_bytes(bytes(mutated))


def test_is_digest():
    assert is_digest("0" * 64)
    assert not is_digest("0" * 63)
    assert not is_digest("g" * 64)
    assert not is_digest(1234)


class TestSignatures:
    def test_round_trip(self, scheme):
        keypair = scheme.keypair("alice")
        signature = scheme.sign(b"message", keypair.private_key)
        assert scheme.verify(b"message", signature, keypair.public_key)

    def test_wrong_public_key_fails(self, scheme):
        alice = scheme.keypair("alice")
        bob = scheme.keypair("bob")
        signature = scheme.sign(b"message", alice.private_key)
        assert not scheme.verify(b"message", signature, bob.public_key)

    def test_any_flipped_message_byte_fails(self, scheme):
        keypair = scheme.keypair("alice")
        message = b"short message to sweep"
        signature = scheme.sign(message, keypair.private_key)
        for position in range(len(message)):
            mutated = bytearray(message)
            mutated[position] ^= 0x01
            assert not scheme.verify(bytes(mutated), signature, keypair.public_key)

    def test_unknown_public_key_fails(self, scheme):
        keypair = scheme.keypair("alice")
        signature = scheme.sign(b"m", keypair.private_key)
        other = MockSignatureScheme()
        assert not other.verify(b"m", signature, keypair.public_key)

    def test_malformed_key_raises(self, scheme):
        with pytest.raises(SigningError):
            scheme.sign(b"m", b"")
        with pytest.raises(SigningError):
            scheme.register_private(b"")

    def test_derivation_is_deterministic(self):
        first = MockSignatureScheme().keypair("carol")
        second = MockSignatureScheme().keypair("carol")
        assert first == second

    @settings(max_examples=30, deadline=None)
    @given(message=st.binary(min_size=0, max_size=1 << 20))
    def test_round_trip_up_to_one_mebibyte(self, message):
        scheme = MockSignatureScheme()
        keypair = scheme.keypair("prop")
        signature = scheme.sign(message, keypair.private_key)
        assert scheme.verify(message, signature, keypair.public_key)


class TestChallenges:
    def test_seeded_determinism(self, scheme):
        keypair = scheme.keypair("alice")
        assert scheme.make_challenge(keypair.public_hex, 7) == scheme.make_challenge(
            keypair.public_hex, 7
        )

    def test_distinct_seeds_distinct_commitments(self, scheme):
        keypair = scheme.keypair("alice")
        commitments = {
            scheme.make_challenge(keypair.public_hex, seed).commitment for seed in range(100)
        }
        assert len(commitments) == 100

    def test_solve_and_verify(self, scheme):
        keypair = scheme.keypair("alice")
        challenge = scheme.make_challenge(keypair.public_hex, 1)
        assert verify_solution(challenge, solve_challenge(challenge, keypair.private_key))

    def test_wrong_key_cannot_solve(self, scheme):
        alice = scheme.keypair("alice")
        bob = scheme.keypair("bob")
        challenge = scheme.make_challenge(alice.public_hex, 1)
        assert not verify_solution(challenge, solve_challenge(challenge, bob.private_key))

    def test_corrupted_nonce_fails(self, scheme):
        keypair = scheme.keypair("alice")
        challenge = scheme.make_challenge(keypair.public_hex, 1)
        solution = solve_challenge(challenge, keypair.private_key)
        corrupted = solution.__class__(
            challenge_id=solution.challenge_id,
            revealed_nonce="00" + solution.revealed_nonce[2:],
        )
        if corrupted.revealed_nonce == solution.revealed_nonce:
            corrupted = solution.__class__(
                challenge_id=solution.challenge_id,
                revealed_nonce="ff" + solution.revealed_nonce[2:],
            )
        assert not verify_solution(challenge, corrupted)

    def test_replay_against_other_challenge_fails(self, scheme):
        keypair = scheme.keypair("alice")
        first = scheme.make_challenge(keypair.public_hex, 1)
        second = scheme.make_challenge(keypair.public_hex, 2)
        solution = solve_challenge(first, keypair.private_key)
        assert not verify_solution(second, solution)

    def test_wrong_key_never_solves_over_many_trials(self):
        scheme = MockSignatureScheme()
        successes = 0
        for trial in range(1000):
            target = scheme.keypair(f"target-{trial}")
            intruder = scheme.keypair(f"intruder-{trial}")
            challenge = scheme.make_challenge(target.public_hex, trial)
            if verify_solution(challenge, solve_challenge(challenge, intruder.private_key)):
                successes += 1
        assert successes == 0

    def test_unknown_target_key_raises(self, scheme):
        foreign = MockSignatureScheme().keypair("stranger")
        with pytest.raises(SigningError):
            scheme.make_challenge(foreign.public_hex, 1)
