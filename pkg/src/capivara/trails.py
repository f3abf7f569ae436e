"""Trail registry and lifecycle: two-phase creation, invites, removal, vacancy.

The registry validates state transitions and puzzle solutions; signature
checks live with the chain validator, which holds the signature scheme.
Authorization questions (who may invite, remove, vouch) are answered
against a separate snapshot so the validator can pin them to the parent
block's state while ops inside one block still apply sequentially.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .crypto import Challenge, verify_solution
from .model import Identity, TrailOp, TrailOpKind

# An unanswered challenge squats a name for at most this many blocks.
PENDING_EXPIRY_BLOCKS = 10


class TrailStatus(Enum):
    REQUESTED = "requested"
    CHALLENGE_PENDING = "challenge_pending"
    ACTIVE = "active"
    VACANT = "vacant"


class TrailOpError(ValueError):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


@dataclass
class TrailState:
    name: str
    status: TrailStatus
    members: dict[str, Identity] = field(default_factory=dict)
    requested_by: Identity | None = None
    challenge: Challenge | None = None
    request_height: int | None = None
    activated_height: int | None = None
    # invitee public key -> (challenge, invite height)
    invites: dict[str, tuple[Challenge, int]] = field(default_factory=dict)

    def clone(self) -> "TrailState":
        return replace(self, members=dict(self.members), invites=dict(self.invites))


def member_add_effective_height(confirm_height: int) -> int:
    """First height at which member ops are accepted for a trail confirmed
    at confirm_height (request at N, confirm at N+1, member ops from N+2)."""
    return confirm_height + 1


class TrailRegistry:
    def __init__(self) -> None:
        self.trails: dict[str, TrailState] = {}

    def clone(self) -> "TrailRegistry":
        copy = TrailRegistry()
        copy.trails = {name: state.clone() for name, state in self.trails.items()}
        return copy

    def get(self, name: str) -> TrailState | None:
        return self.trails.get(name)

    def active_trails(self) -> list[TrailState]:
        return [t for t in self.trails.values() if t.status is TrailStatus.ACTIVE]

    def has_active_members(self) -> bool:
        return any(t.members for t in self.active_trails())

    def member_trails(self, identity: Identity) -> list[str]:
        return sorted(
            t.name for t in self.active_trails() if identity.public_key in t.members
        )

    def expire_pending(self, height: int, max_age: int = PENDING_EXPIRY_BLOCKS) -> None:
        """Drop stale creation requests and invites; names become claimable."""
        for name in list(self.trails):
            state = self.trails[name]
            if state.status in (TrailStatus.REQUESTED, TrailStatus.CHALLENGE_PENDING):
                if state.request_height is not None and height - state.request_height > max_age:
                    del self.trails[name]
            elif state.invites:
                state.invites = {
                    key: (challenge, invited_at)
                    for key, (challenge, invited_at) in state.invites.items()
                    if height - invited_at <= max_age
                }

    def apply(self, op: TrailOp, height: int, auth: "TrailRegistry | None" = None) -> None:
        """Apply one op, mutating this registry; raises TrailOpError on a
        bad transition. `auth` is the snapshot used for membership
        authorization (defaults to the current registry)."""
        auth = auth if auth is not None else self
        handler = {
            TrailOpKind.CREATE_REQUEST: self._create_request,
            TrailOpKind.CREATE_CHALLENGE: self._create_challenge,
            TrailOpKind.CREATE_CONFIRM: self._create_confirm,
            TrailOpKind.MEMBER_INVITE: self._member_invite,
            TrailOpKind.MEMBER_ACCEPT: self._member_accept,
            TrailOpKind.MEMBER_REMOVE: self._member_remove,
        }[op.kind]
        handler(op, height, auth)

    def _create_request(self, op: TrailOp, height: int, auth: "TrailRegistry") -> None:
        existing = self.trails.get(op.trail_name)
        if existing is not None and existing.status is not TrailStatus.VACANT:
            raise TrailOpError("name-taken", f"trail name already taken: {op.trail_name}")
        self.trails[op.trail_name] = TrailState(
            name=op.trail_name,
            status=TrailStatus.REQUESTED,
            requested_by=op.subject,
            request_height=height,
        )

    def _create_challenge(self, op: TrailOp, height: int, auth: "TrailRegistry") -> None:
        state = self.trails.get(op.trail_name)
        if state is None or state.status is not TrailStatus.REQUESTED:
            raise TrailOpError("no-request", f"no open request for trail: {op.trail_name}")
        challenge = op.challenge()
        if challenge is None:
            raise TrailOpError("missing-challenge", "create_challenge carries no challenge")
        assert state.requested_by is not None
        if challenge.target_public_key != state.requested_by.public_key:
            raise TrailOpError("wrong-target", "challenge does not target the requester")
        state.status = TrailStatus.CHALLENGE_PENDING
        state.challenge = challenge

    def _create_confirm(self, op: TrailOp, height: int, auth: "TrailRegistry") -> None:
        state = self.trails.get(op.trail_name)
        if state is None or state.status is not TrailStatus.CHALLENGE_PENDING:
            raise TrailOpError("no-pending", f"no pending challenge for trail: {op.trail_name}")
        assert state.request_height is not None and state.challenge is not None
        if height <= state.request_height:
            raise TrailOpError(
                "early-confirm", "confirmation must come in a later block than the request"
            )
        if state.requested_by != op.subject:
            raise TrailOpError("wrong-subject", "confirmation subject is not the requester")
        solution = op.solution()
        if solution is None or not verify_solution(state.challenge, solution):
            raise TrailOpError("bad-solution", f"invalid solution for trail: {op.trail_name}")
        state.status = TrailStatus.ACTIVE
        state.members = {op.subject.public_key: op.subject}
        state.activated_height = height
        state.challenge = None

    def _member_invite(self, op: TrailOp, height: int, auth: "TrailRegistry") -> None:
        state = self._require_active(op.trail_name)
        assert state.activated_height is not None
        if height < member_add_effective_height(state.activated_height):
            raise TrailOpError(
                "early-member-op", f"member ops for {op.trail_name} start one block after confirm"
            )
        inviter = op.actor()
        if inviter is None or not is_authorized_voucher(auth, op.trail_name, inviter):
            raise TrailOpError("invite-not-member", "inviter is not an active trail member")
        if op.subject.public_key in state.members:
            raise TrailOpError("already-member", "invitee is already a member")
        challenge = op.challenge()
        if challenge is None or challenge.target_public_key != op.subject.public_key:
            raise TrailOpError("missing-challenge", "invite carries no challenge for the invitee")
        state.invites[op.subject.public_key] = (challenge, height)

    def _member_accept(self, op: TrailOp, height: int, auth: "TrailRegistry") -> None:
        state = self._require_active(op.trail_name)
        pending = state.invites.get(op.subject.public_key)
        if pending is None:
            raise TrailOpError("no-invite", "acceptance without a pending invite")
        challenge, invited_at = pending
        if height <= invited_at:
            raise TrailOpError(
                "early-accept", "acceptance must come in a later block than the invite"
            )
        solution = op.solution()
        if solution is None or not verify_solution(challenge, solution):
            raise TrailOpError("bad-solution", "invalid solution for invite")
        del state.invites[op.subject.public_key]
        state.members[op.subject.public_key] = op.subject

    def _member_remove(self, op: TrailOp, height: int, auth: "TrailRegistry") -> None:
        state = self._require_active(op.trail_name)
        remover = op.actor()
        if remover is None:
            raise TrailOpError("missing-remover", "removal carries no remover identity")
        removing_self = remover.public_key == op.subject.public_key
        if not removing_self and not is_authorized_voucher(auth, op.trail_name, remover):
            raise TrailOpError("remove-not-member", "remover is not an active trail member")
        if op.subject.public_key not in state.members:
            raise TrailOpError("not-a-member", "removal target is not a member")
        if removing_self and not is_authorized_voucher(auth, op.trail_name, remover):
            raise TrailOpError("not-a-member", "self-removal by a non-member")
        del state.members[op.subject.public_key]
        if not state.members:
            state.status = TrailStatus.VACANT
            state.invites.clear()

    def _require_active(self, trail_name: str) -> TrailState:
        state = self.trails.get(trail_name)
        if state is None or state.status is not TrailStatus.ACTIVE:
            raise TrailOpError("not-active", f"trail is not active: {trail_name}")
        return state


def is_authorized_voucher(registry: TrailRegistry, trail_name: str, identity: Identity) -> bool:
    """True iff the identity is a member of an active trail of that name."""
    state = registry.get(trail_name)
    if state is None or state.status is not TrailStatus.ACTIVE:
        return False
    member = state.members.get(identity.public_key)
    return member is not None and member == identity
