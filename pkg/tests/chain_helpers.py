"""Helpers to build valid blocks on top of a live chain in tests."""

from __future__ import annotations

from capivara import consensus
from capivara.chain import Chain
from capivara.model import (
    Block,
    ForgeMetadata,
    ForgerCandidate,
    PackageRecord,
    TrailOp,
    TrailOpKind,
    VouchRecord,
    block_digest,
)


def forge_next(
    chain: Chain,
    packages: list[PackageRecord] | None = None,
    vouches: list[VouchRecord] | None = None,
    trail_ops: list[TrailOp] | None = None,
    downloads: dict[str, int] | None = None,
) -> Block:
    """Assemble the next valid block; identities use name-derived keys."""
    state = chain.state
    assert state is not None
    scheme = chain.scheme
    packages = packages or []
    vouches = vouches or []
    trail_ops = trail_ops or []
    downloads = downloads if downloads is not None else {}
    height = state.height + 1
    popularity = state.next_popularity(downloads)

    if state.registry.has_active_members():
        draw = consensus.select_forgers(state.popularity, state.registry, state.head_hash, height)
        forger, forger_trail = draw.forger, draw.forger_trail
        candidates = tuple(
            ForgerCandidate(user=i.name, trails=(t,), popularity=popularity.get(t, 0.0))
            for i, t in draw.candidates
        )
    else:
        confirms = [op for op in trail_ops if op.kind is TrailOpKind.CREATE_CONFIRM]
        assert confirms, "bootstrap block needs a confirmation"
        forger, forger_trail = confirms[0].subject, confirms[0].trail_name
        candidates = ()

    block = Block(
        number=height,
        timestamp=state.timestamp + 1200,
        previous_hash=state.head_hash,
        forger=forger,
        forger_signature="",
        packages=packages,
        vouches=vouches,
        trail_ops=trail_ops,
        popularity=popularity,
        downloads=downloads,
        metadata=ForgeMetadata(
            candidates=candidates,
            popularity_at_generation=tuple(sorted(state.popularity.items())),
            amount_of_packages=len(packages),
            amount_of_valid_trails=len(state.registry.active_trails()),
        ),
    )
    seal(block, scheme)
    return block


def seal(block: Block, scheme) -> Block:
    """Recompute the hash and forger signature (name-derived key)."""
    block.hash = block_digest(block)
    keypair = scheme.keypair(block.forger.name)
    block.forger_signature = scheme.sign(bytes.fromhex(block.hash), keypair.private_key)
    return block
