import random

from capivara.chain import make_genesis
from capivara.crypto import MockSignatureScheme
from capivara.model import (
    Block,
    ForgeMetadata,
    ForgerCandidate,
    Identity,
    PackageRecord,
    TrailOp,
    TrailOpKind,
    VouchRecord,
    block_digest,
    block_from_line,
    block_to_line,
    canonical_serialize,
)

from conftest import make_recipe

# Pinned once from the first verified run of make_genesis on this fixture.
GOLDEN_GENESIS_DIGEST = "4da6fb24fdf0271d38c155829e587e8451c43c417e42f9ae87266b4b6781995f"


def bootstrap_genesis(scheme):
    keypair = scheme.keypair("archlinux-u00")
    requester = Identity("archlinux-u00", keypair.public_hex)
    challenge = scheme.make_challenge(keypair.public_hex, 77)
    ops = [
        TrailOp(TrailOpKind.CREATE_REQUEST, "archlinux", requester),
        TrailOp(
            TrailOpKind.CREATE_CHALLENGE, "archlinux", requester, {"challenge": challenge.to_obj()}
        ),
    ]
    return make_genesis(1_500_000_000, ops, scheme)


def random_block(rng: random.Random, scheme: MockSignatureScheme) -> Block:
    def ident(tag: str) -> tuple[Identity, bytes]:
        keypair = scheme.keypair(tag)
        return Identity(tag, keypair.public_hex), keypair.private_key

    packages = []
    for i in range(rng.randint(0, 4)):
        recipe = make_recipe(f"pkg-{rng.randrange(10_000)}", f"{rng.randrange(9)}.{i}")
        publisher, private = ident(f"pub-{rng.randrange(50)}")
        packages.append(
            PackageRecord(
                recipe=recipe,
                publisher=publisher,
                signature=scheme.sign(recipe.canonical_bytes(), private),
                submitted_at=rng.randrange(1, 2_000_000_000),
            )
        )
    vouches = []
    for _ in range(rng.randint(0, 3)):
        member, private = ident(f"member-{rng.randrange(50)}")
        checksum = f"{rng.randrange(1 << 63):016x}" * 4
        trail = rng.choice(["archlinux", "pypy", "ruby"])
        vouches.append(
            VouchRecord(
                package_checksum=checksum,
                trail_name=trail,
                member=member,
                signature=scheme.sign((checksum + trail).encode(), private),
            )
        )
    trail_ops = []
    if rng.random() < 0.6:
        subject, _ = ident(f"subject-{rng.randrange(50)}")
        trail_ops.append(TrailOp(TrailOpKind.CREATE_REQUEST, f"trail-{rng.randrange(30)}", subject))
    popularity = {name: rng.uniform(1, 60) for name in ("archlinux", "pypy", "perl")}
    forger, forger_private = ident(f"forger-{rng.randrange(20)}")
    candidates = tuple(
        ForgerCandidate(user=f"user-{i}", trails=(f"t-{i}",), popularity=rng.uniform(0, 50))
        for i in range(rng.randint(1, 4))
    )
    block = Block(
        number=rng.randrange(1, 500),
        timestamp=rng.randrange(1, 2_000_000_000),
        previous_hash=f"{rng.randrange(1 << 63):016x}" * 4,
        forger=forger,
        forger_signature="",
        packages=packages,
        vouches=vouches,
        trail_ops=trail_ops,
        popularity=popularity,
        downloads={name: rng.randrange(0, 300_000) for name in popularity},
        metadata=ForgeMetadata(
            candidates=candidates,
            popularity_at_generation=tuple(sorted(popularity.items())),
            amount_of_packages=len(packages),
            amount_of_valid_trails=rng.randint(0, 8),
        ),
    )
    block.hash = block_digest(block)
    block.forger_signature = scheme.sign(bytes.fromhex(block.hash), forger_private)
    return block


class TestCanonicalSerialization:
    def test_deterministic(self, scheme, rng):
        block = random_block(rng, scheme)
        assert canonical_serialize(block) == canonical_serialize(block)

    def test_distinct_content_distinct_bytes(self, scheme, rng):
        block = random_block(rng, scheme)
        while not block.packages:
            block = random_block(rng, scheme)
        other_recipe = make_recipe(block.packages[0].recipe.name + "x")
        mutated = PackageRecord(
            recipe=other_recipe,
            publisher=block.packages[0].publisher,
            signature=block.packages[0].signature,
            submitted_at=block.packages[0].submitted_at,
        )
        original = canonical_serialize(block)
        block.packages[0] = mutated
        assert canonical_serialize(block) != original

    def test_round_trip_over_random_blocks(self, scheme):
        rng = random.Random(4242)
        for _ in range(50):
            block = random_block(rng, scheme)
            line = block_to_line(block)
            parsed = block_from_line(line)
            assert block_to_line(parsed) == line
            assert canonical_serialize(parsed) == canonical_serialize(block)

    def test_seal_fields_are_not_hashed(self, scheme, rng):
        block = random_block(rng, scheme)
        digest_before = block_digest(block)
        block.forger_signature = "f" * 64
        block.hash = "0" * 64
        assert block_digest(block) == digest_before


class TestBlockDigest:
    def test_golden_genesis(self, scheme):
        assert bootstrap_genesis(scheme).hash == GOLDEN_GENESIS_DIGEST

    def test_flipping_serialized_bytes_changes_digest(self, scheme, rng):
        from capivara.crypto import hash_bytes

        block = random_block(rng, scheme)
        data = canonical_serialize(block)
        baseline = hash_bytes(data)
        sample = random.Random(5).sample(range(len(data)), 25)
        for position in sample:
            mutated = bytearray(data)
            mutated[position] ^= 0x01
            assert hash_bytes(bytes(mutated)) != baseline

    def test_structurally_equal_blocks_same_digest(self, scheme):
        first = random_block(random.Random(11), scheme)
        second = random_block(random.Random(11), scheme)
        assert block_digest(first) == block_digest(second)


class TestMetadataInvariants:
    def test_candidate_cap_and_forger_membership(self, scheme):
        rng = random.Random(77)
        for _ in range(25):
            block = random_block(rng, scheme)
            assert len(block.metadata.candidates) <= 4

    def test_fig_layout_keys(self, scheme, rng):
        obj = random_block(rng, scheme).to_obj()
        assert set(obj["metadata"]) == {
            "amount_of_packages",
            "amount_of_valid_trails",
            "everybody_that_can_forge_this_block",
            "popularity_at_generation",
        }
        entry = obj["popularity"][0]
        assert set(entry) == {"name", "pop"}
        assert all(isinstance(e["pop"], float) for e in obj["popularity"])
