"""Append-only chain store: genesis, block validation, replay, fork choice.

Validation is a pure replay: the validator rebuilds trail and popularity
state from genesis and checks each block against the state of its parent.
Authorization (who may vouch, invite, remove, forge) is always judged at
the parent state; trail ops inside one block still apply in order so a
request and its challenge can share a block.

Rule ids reported in violations:
  1 linkage (height, previous hash, timestamp)
  2 per-block limits (packages, new trails)
  3 package and vouch record signatures and vouch authorization
  4 member invite/remove authorization and signatures
  5 creation flow and puzzle solutions
  6 forger eligibility and forge metadata consistency
  7 block hash and forger signature
  8 popularity snapshot consistency with the published download counts
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import consensus
from .crypto import Digest, MockSignatureScheme, ZERO_DIGEST, is_digest
from .model import (
    Block,
    ForgeMetadata,
    ForgerCandidate,
    Identity,
    MAX_NEW_TRAILS_PER_BLOCK,
    MAX_PACKAGES_PER_BLOCK,
    MalformedRecordError,
    TrailOp,
    TrailOpKind,
    block_digest,
    block_from_line,
    block_to_line,
    invite_payload,
    remove_payload,
)
from .trails import TrailOpError, TrailRegistry, TrailStatus, is_authorized_voucher

GENESIS_FORGER_NAME = "genesis"


@dataclass(frozen=True)
class Violation:
    height: int
    rule: int
    code: str
    message: str

    def __str__(self) -> str:
        return f"height={self.height} rule={self.rule} {self.code}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first_invalid_height(self) -> int | None:
        return self.violations[0].height if self.violations else None

    def add(self, height: int, rule: int, code: str, message: str) -> None:
        self.violations.append(Violation(height, rule, code, message))


class InvalidBlockError(ValueError):
    def __init__(self, report: ValidationReport) -> None:
        super().__init__("; ".join(str(v) for v in report.violations) or "invalid block")
        self.report = report


class ChainFileError(ValueError):
    pass


@dataclass
class ChainState:
    """Replay state as of the head block; the scheme instance is shared."""

    height: int
    head_hash: Digest
    timestamp: int
    registry: TrailRegistry
    popularity: dict[str, float]
    scheme: MockSignatureScheme

    def clone(self) -> "ChainState":
        return replace(self, registry=self.registry.clone(), popularity=dict(self.popularity))

    def next_popularity(self, downloads: dict[str, int]) -> dict[str, float]:
        """The snapshot the next block must publish for these downloads."""
        carried = consensus.active_popularity(self.popularity, self.registry)
        return consensus.update_popularity(carried, downloads)


def make_genesis(
    timestamp: int,
    initial_trail_ops: list[TrailOp],
    scheme: MockSignatureScheme,
    forger_name: str = GENESIS_FORGER_NAME,
) -> Block:
    """Height-0 block: all-zero parent hash, no payload beyond bootstrap
    trail ops, signed by a well-known system identity."""
    if timestamp <= 0:
        raise ValueError("genesis timestamp must be positive")
    keypair = scheme.keypair(forger_name)
    forger = Identity(name=forger_name, public_key=keypair.public_hex)
    block = Block(
        number=0,
        timestamp=timestamp,
        previous_hash=ZERO_DIGEST,
        forger=forger,
        forger_signature="",
        packages=[],
        vouches=[],
        trail_ops=list(initial_trail_ops),
        popularity={},
        downloads={},
        metadata=ForgeMetadata(
            candidates=(),
            popularity_at_generation=(),
            amount_of_packages=0,
            amount_of_valid_trails=0,
        ),
    )
    block.hash = block_digest(block)
    block.forger_signature = scheme.sign(bytes.fromhex(block.hash), keypair.private_key)
    return block


def _ensure_identity_keys(scheme: MockSignatureScheme, block: Block) -> None:
    # Mock-scheme convention: an identity's key seed is its name, so any
    # validator can rebuild the verification registry from the chain alone.
    names = {block.forger.name}
    names.update(p.publisher.name for p in block.packages)
    names.update(v.member.name for v in block.vouches)
    for op in block.trail_ops:
        names.add(op.subject.name)
        actor = op.actor()
        if actor is not None:
            names.add(actor.name)
    for name in names:
        scheme.keypair(name)


def _check_seal(block: Block, scheme: MockSignatureScheme, report: ValidationReport) -> None:
    recomputed = block_digest(block)
    if block.hash != recomputed:
        report.add(block.number, 7, "hash-mismatch", "stored hash does not match block contents")
    if not is_digest(block.hash) or not scheme.verify(
        bytes.fromhex(block.hash), block.forger_signature, block.forger.public_key
    ):
        report.add(block.number, 7, "forger-signature", "forger signature does not verify")


def _check_records(
    block: Block, parent_registry: TrailRegistry, scheme: MockSignatureScheme, report: ValidationReport
) -> None:
    for record in block.packages:
        if not record.recipe.name or not record.recipe.version:
            report.add(block.number, 3, "bad-recipe", "package recipe lacks name or version")
        if record.recipe.sources and not record.recipe.checksums:
            report.add(
                block.number, 3, "bad-recipe", f"recipe {record.recipe.name} has sources but no checksums"
            )
        if not scheme.verify(
            record.signing_payload(), record.signature, record.publisher.public_key
        ):
            report.add(
                block.number,
                3,
                "package-signature",
                f"package {record.recipe.name} signature does not verify",
            )
    for vouch in block.vouches:
        if not scheme.verify(vouch.signing_payload(), vouch.signature, vouch.member.public_key):
            report.add(
                block.number, 3, "vouch-signature", f"vouch for {vouch.trail_name} does not verify"
            )
        if not is_authorized_voucher(parent_registry, vouch.trail_name, vouch.member):
            report.add(
                block.number,
                3,
                "voucher-not-authorized",
                f"{vouch.member.name} may not vouch for {vouch.trail_name}",
            )


def _check_member_op_signature(op: TrailOp, scheme: MockSignatureScheme) -> str | None:
    actor = op.actor()
    signature = op.payload.get("signature")
    if actor is None or not isinstance(signature, str):
        return "member op lacks actor or signature"
    if op.kind is TrailOpKind.MEMBER_INVITE:
        payload = invite_payload(op.trail_name, op.subject.public_key)
    else:
        payload = remove_payload(op.trail_name, op.subject.public_key)
    if not scheme.verify(payload, signature, actor.public_key):
        return "member op signature does not verify"
    return None


def _apply_trail_ops(
    block: Block,
    working: TrailRegistry,
    parent_registry: TrailRegistry,
    scheme: MockSignatureScheme,
    report: ValidationReport,
) -> None:
    for op in block.trail_ops:
        if op.kind in (TrailOpKind.MEMBER_INVITE, TrailOpKind.MEMBER_REMOVE):
            problem = _check_member_op_signature(op, scheme)
            if problem is not None:
                report.add(block.number, 4, "member-op-signature", problem)
        try:
            working.apply(op, block.number, auth=parent_registry)
        except TrailOpError as exc:
            rule = 4 if op.kind in (TrailOpKind.MEMBER_INVITE, TrailOpKind.MEMBER_REMOVE) else 5
            report.add(block.number, rule, exc.code, str(exc))
    # A creation request must carry its challenge in the same block.
    for state in working.trails.values():
        if state.status is TrailStatus.REQUESTED and state.request_height == block.number:
            report.add(
                block.number,
                5,
                "challenge-missing",
                f"request for {state.name} has no challenge in its block",
            )


def _check_forger(
    block: Block,
    state: ChainState,
    expected_popularity: dict[str, float],
    report: ValidationReport,
) -> None:
    expected_at_generation = tuple(sorted(state.popularity.items()))
    if block.metadata.popularity_at_generation != expected_at_generation:
        report.add(
            block.number, 6, "metadata-popularity", "popularity_at_generation is not the parent snapshot"
        )
    if block.metadata.amount_of_packages != len(block.packages):
        report.add(block.number, 6, "metadata-amounts", "amount_of_packages mismatch")
    if block.metadata.amount_of_valid_trails != len(state.registry.active_trails()):
        report.add(block.number, 6, "metadata-amounts", "amount_of_valid_trails mismatch")

    if state.registry.has_active_members():
        draw = consensus.select_forgers(
            state.popularity, state.registry, state.head_hash, block.number
        )
        if block.forger not in {identity for identity, _ in draw.candidates}:
            report.add(
                block.number,
                6,
                "forger-not-candidate",
                f"{block.forger.name} is not an eligible forger at this height",
            )
        expected_candidates = tuple(
            ForgerCandidate(
                user=identity.name,
                trails=(trail,),
                popularity=expected_popularity.get(trail, 0.0),
            )
            for identity, trail in draw.candidates
        )
        if block.metadata.candidates != expected_candidates:
            report.add(
                block.number, 6, "metadata-candidates", "candidate list does not match the draw"
            )
    else:
        # Bootstrap: with no active trail yet, the block must be forged by
        # the subject of its first trail confirmation.
        confirms = [op for op in block.trail_ops if op.kind is TrailOpKind.CREATE_CONFIRM]
        if not confirms or confirms[0].subject != block.forger:
            report.add(
                block.number,
                6,
                "bootstrap-forger",
                "with no active trail the forger must confirm one in this block",
            )
        if block.metadata.candidates != ():
            report.add(block.number, 6, "metadata-candidates", "bootstrap block lists candidates")


def validate_genesis(block: Block, scheme: MockSignatureScheme) -> ValidationReport:
    report = ValidationReport()
    _ensure_identity_keys(scheme, block)
    if block.number != 0:
        report.add(block.number, 1, "height", "genesis must have height 0")
    if block.previous_hash != ZERO_DIGEST:
        report.add(block.number, 1, "prev-hash", "genesis previous hash must be all zeros")
    if block.timestamp <= 0:
        report.add(block.number, 1, "timestamp", "genesis timestamp must be positive")
    if block.packages or block.vouches:
        report.add(block.number, 1, "genesis-form", "genesis carries no packages or vouches")
    if block.popularity or block.downloads:
        report.add(block.number, 8, "genesis-form", "genesis carries no popularity or downloads")
    requests = [op for op in block.trail_ops if op.kind is TrailOpKind.CREATE_REQUEST]
    if len(requests) > MAX_NEW_TRAILS_PER_BLOCK:
        report.add(block.number, 2, "trail-limit", "too many new trails in genesis")
    _check_seal(block, scheme, report)
    registry = TrailRegistry()
    for op in block.trail_ops:
        try:
            registry.apply(op, 0)
        except TrailOpError as exc:
            report.add(block.number, 5, exc.code, str(exc))
    return report


def state_after_genesis(block: Block, scheme: MockSignatureScheme) -> ChainState:
    registry = TrailRegistry()
    for op in block.trail_ops:
        registry.apply(op, 0)
    return ChainState(
        height=0,
        head_hash=block.hash,
        timestamp=block.timestamp,
        registry=registry,
        popularity={},
        scheme=scheme,
    )


def step(state: ChainState, block: Block) -> tuple[ValidationReport, ChainState]:
    """Validate one block against the parent state; on success return the
    advanced state, otherwise the original state untouched."""
    report = ValidationReport()
    scheme = state.scheme
    _ensure_identity_keys(scheme, block)

    working = state.clone()
    working.registry.expire_pending(block.number)

    if block.number != state.height + 1:
        report.add(block.number, 1, "height", f"expected height {state.height + 1}")
    if block.previous_hash != state.head_hash:
        report.add(block.number, 1, "prev-hash", "previous hash does not match parent")
    if block.timestamp < state.timestamp:
        report.add(block.number, 1, "timestamp", "timestamp precedes parent")

    if len(block.packages) > MAX_PACKAGES_PER_BLOCK:
        report.add(
            block.number, 2, "package-limit", f"{len(block.packages)} packages exceed the limit"
        )
    requests = [op for op in block.trail_ops if op.kind is TrailOpKind.CREATE_REQUEST]
    if len(requests) > MAX_NEW_TRAILS_PER_BLOCK:
        report.add(
            block.number, 2, "trail-limit", f"{len(requests)} new trails exceed the limit"
        )

    _check_seal(block, scheme, report)

    expected_popularity: dict[str, float] = {}
    try:
        expected_popularity = state.next_popularity(block.downloads)
        if block.popularity != expected_popularity:
            report.add(
                block.number,
                8,
                "popularity-mismatch",
                "published popularity does not follow from the download snapshot",
            )
    except consensus.ConsensusError as exc:
        report.add(block.number, 8, "bad-downloads", str(exc))

    _check_forger(block, state, expected_popularity, report)
    _check_records(block, state.registry, scheme, report)
    _apply_trail_ops(block, working.registry, state.registry, scheme, report)

    if not report.ok:
        return report, state

    working.height = block.number
    working.head_hash = block.hash
    working.timestamp = block.timestamp
    working.popularity = dict(block.popularity)
    return report, working


class Chain:
    """Ordered block container; appends go through full validation."""

    def __init__(self, blocks: list[Block], scheme: MockSignatureScheme, state: ChainState | None):
        self.blocks = blocks
        self.scheme = scheme
        self.state = state

    @classmethod
    def new(cls, genesis: Block, scheme: MockSignatureScheme) -> "Chain":
        report = validate_genesis(genesis, scheme)
        if not report.ok:
            raise InvalidBlockError(report)
        return cls([genesis], scheme, state_after_genesis(genesis, scheme))

    @classmethod
    def from_blocks(cls, blocks: list[Block], scheme: MockSignatureScheme) -> "Chain":
        """Wrap already-stored blocks without validating; use verify_chain."""
        if not blocks:
            raise ChainFileError("a chain needs at least a genesis block")
        return cls(list(blocks), scheme, None)

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def head_hash(self) -> Digest:
        return self.head.hash

    def block_by_hash(self, digest: Digest) -> Block | None:
        return next((b for b in self.blocks if b.hash == digest), None)

    def append(self, block: Block) -> "Chain":
        if self.state is None:
            raise InvalidBlockError(
                ValidationReport([Violation(block.number, 1, "no-state", "chain was not replayed")])
            )
        report, next_state = step(self.state, block)
        if not report.ok:
            raise InvalidBlockError(report)
        self.blocks.append(block)
        self.state = next_state
        return self


def replay(chain: Chain) -> tuple[ValidationReport, ChainState | None]:
    """Re-validate every block from genesis; stops at the first invalid
    height (everything from there on is untrusted)."""
    scheme = chain.scheme
    report = validate_genesis(chain.blocks[0], scheme)
    if not report.ok:
        return report, None
    state = state_after_genesis(chain.blocks[0], scheme)
    for block in chain.blocks[1:]:
        block_report, state = step(state, block)
        if not block_report.ok:
            return block_report, None
    return ValidationReport(), state


def verify_chain(chain: Chain) -> ValidationReport:
    report, _ = replay(chain)
    return report


def choose_head(candidates: list[Chain]) -> Chain:
    """Longest valid chain; ties go to the lexicographically smaller head."""
    if not candidates:
        raise ValueError("no candidate chains")
    valid = [chain for chain in candidates if verify_chain(chain).ok]
    if not valid:
        raise ValueError("no valid candidate chains")
    return min(valid, key=lambda chain: (-len(chain.blocks), chain.head_hash))


def write_chain(chain: Chain, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for block in chain.blocks:
            handle.write(block_to_line(block) + "\n")


def read_chain(path: str, scheme: MockSignatureScheme) -> Chain:
    """Parse a block-per-line chain file, enforcing canonical encoding.

    Rejecting non-canonical spellings keeps every stored byte
    tamper-evident (a flipped float digit can decode to the identical
    value, which no content hash would notice)."""
    blocks: list[Block] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                block = block_from_line(line)
            except MalformedRecordError as exc:
                raise ChainFileError(f"line {lineno}: {exc}") from exc
            if block_to_line(block) != line:
                raise ChainFileError(f"line {lineno}: block is not in canonical form")
            blocks.append(block)
    if not blocks:
        raise ChainFileError("chain file holds no blocks")
    return Chain.from_blocks(blocks, scheme)
