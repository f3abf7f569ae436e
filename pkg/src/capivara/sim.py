"""Deterministic replay engine: block cadence, vouch scheduling, metrics.

Every source of randomness is a named stream derived from the master
seed (downloads, vouches, publishers, trails), so identical inputs give
byte-identical chains and adding a stream never perturbs the others. The
forger draw is the exception by design: it is seeded from chain state so
validators can recompute it.

Timeline: genesis sits two block intervals before the first event (the
bootstrap trail requests in the genesis block and confirms in block 1, so
it can vouch by the time packages arrive). Each tick collects due events,
draws per-trail downloads, updates popularity, admits packages and trail
requests under their caps, and schedules vouches one to four blocks out.
"""

from __future__ import annotations

import csv
import json
import os
import random
import re
from dataclasses import dataclass, field

from . import consensus
from .chain import Chain, make_genesis
from .crypto import Challenge, KeyPair, MockSignatureScheme, solve_challenge
from .ingest import PackageEvent, TrailRule, assign_trails, default_rules
from .model import (
    Block,
    ForgeMetadata,
    ForgerCandidate,
    Identity,
    PackageRecord,
    TrailOp,
    TrailOpKind,
    block_digest,
    block_to_line,
    invite_payload,
    vouch_payload,
    VouchRecord,
)
from .pkgbuild import PkgbuildError, parse_pkgbuild
from .pod import DownloadLedger
from .trails import TrailStatus

DEFAULT_VOUCH_OFFSETS = {1: 0.6, 2: 0.2, 3: 0.1, 4: 0.1}

DEFAULT_DOWNLOAD_RANGES = {
    "archlinux": (200000, 300000),
    "pypy": (10000, 400000),
    "perl": (100000, 100500),
    "ruby": (100000, 100900),
    "others": (0, 100000),
}

DEFAULT_CUSTOM_RULES = {
    "archlinux": ".*",
    "pypy": "py",
    "perl": "perl",
    "ruby": "rb",
}

# The stock roster of additional distributions (rule: first four letters).
DEFAULT_EXTRA_TRAILS = (
    "ALTLinux", "Ark Linux", "BasicLinux", "BioKnoppix",
    "CentOS", "Conectiva Cucumber Linux", "Debian", "Zenwalk Linux",
    "Devil-Linux", "Dyne:Bolic", "Feather", "Floppix",
    "Freesco", "Frugalware", "Gentoo", "Gnoppix",
    "IPCop", "Kanotix", "Knoppix", "Kurumin",
    "Linux Scratch", "Lycoris", "Manjaro", "Morphix",
    "Pardus", "PHLAK", "Puppy Linux", "Red Hat Ent",
    "SLAX", "Source Mage", "SuSE", "TopologiLinux",
    "Turkix", "Univention Corp", "Whitebox Linux", "Yoper",
    "Amigo Linux", "BackTrack", "BeatrIX", "BLAG",
    "ClusterKnoppix", "CRUX", "DamnSmallLinux", "DeLi Linux",
    "DragOnLinux", "Elive", "Fedora", "Foresight",
    "Freespire", "G2Linx", "Goodgoat", "GoboLinux",
    "IpodLinux", "Kate OS", "Kubuntu", "Linspire",
    "Lunar Linux", "Mandriva", "MEPIS", "muLinux",
    "PCLinuxOS", "PocketLinux", "Red Hat", "Slackware",
    "SmoothWall", "Sun JDS", "SystemRescue", "TurboLinux",
    "Ubuntu Linux", "VectorLinux", "Yellow Dog", "Xandros",
)

DRAIN_BLOCKS = 4


class SimConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    block_interval_minutes: int = 20
    genesis_offset_minutes: int = 40
    max_packages_per_block: int = 100
    max_new_trails_per_block: int = 10
    vouch_offsets: dict[int, float] = field(default_factory=lambda: dict(DEFAULT_VOUCH_OFFSETS))
    download_ranges: dict[str, tuple[int, int]] = field(
        default_factory=lambda: dict(DEFAULT_DOWNLOAD_RANGES)
    )
    custom_rules: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_CUSTOM_RULES))
    extra_trails: list[str] = field(default_factory=lambda: list(DEFAULT_EXTRA_TRAILS))
    users_per_trail: int = 65
    master_seed: int = 0

    @property
    def block_interval_seconds(self) -> int:
        return self.block_interval_minutes * 60

    def trail_rules(self) -> list[TrailRule]:
        rules = [TrailRule(name, pattern) for name, pattern in self.custom_rules.items()]
        rules.extend(default_rules(self.extra_trails))
        return rules

    def trail_names(self) -> list[str]:
        return list(self.custom_rules) + list(self.extra_trails)

    def bootstrap_trail(self) -> str:
        return self.trail_names()[0]

    def range_for(self, trail_name: str) -> tuple[int, int]:
        return self.download_ranges.get(trail_name, self.download_ranges["others"])

    def validate(self) -> None:
        if self.block_interval_minutes <= 0:
            raise SimConfigError("block interval must be positive")
        if self.genesis_offset_minutes < 2 * self.block_interval_minutes:
            raise SimConfigError(
                "genesis offset must cover at least two block intervals so the "
                "bootstrap trail is active before the first event"
            )
        if self.max_packages_per_block < 1 or self.max_new_trails_per_block < 1:
            raise SimConfigError("per-block limits must be positive")
        if abs(sum(self.vouch_offsets.values()) - 1.0) > 1e-9:
            raise SimConfigError("vouch offset probabilities must sum to 1")
        if any(offset < 1 for offset in self.vouch_offsets):
            raise SimConfigError("vouch offsets are counted in blocks after publication")
        if "others" not in self.download_ranges:
            raise SimConfigError("download_ranges needs an 'others' fallback entry")
        for trail, (low, high) in self.download_ranges.items():
            if low < 0 or low > high:
                raise SimConfigError(f"bad download range for {trail}: ({low}, {high})")
        if not self.trail_names():
            raise SimConfigError("at least one trail is required")
        if len(set(self.trail_names())) != len(self.trail_names()):
            raise SimConfigError("trail names must be unique")
        if self.users_per_trail < 1:
            raise SimConfigError("each trail needs at least one user")
        for name, pattern in self.custom_rules.items():
            try:
                re.compile(pattern)
            except re.error as exc:
                raise SimConfigError(f"bad pattern for trail {name}: {exc}") from exc

    @classmethod
    def from_obj(cls, obj: dict) -> "SimConfig":
        config = cls()
        simple = (
            "block_interval_minutes",
            "genesis_offset_minutes",
            "max_packages_per_block",
            "max_new_trails_per_block",
            "users_per_trail",
            "master_seed",
        )
        for key in simple:
            if key in obj:
                setattr(config, key, obj[key])
        if "vouch_offsets" in obj:
            config.vouch_offsets = {int(k): float(v) for k, v in obj["vouch_offsets"].items()}
        if "download_ranges" in obj:
            config.download_ranges = {
                name: (int(low), int(high)) for name, (low, high) in obj["download_ranges"].items()
            }
        if "custom_rules" in obj:
            config.custom_rules = dict(obj["custom_rules"])
        if "extra_trails" in obj:
            config.extra_trails = list(obj["extra_trails"])
        return config

    @classmethod
    def from_file(cls, path: str) -> "SimConfig":
        with open(path, "r", encoding="utf-8") as handle:
            try:
                obj = json.load(handle)
            except json.JSONDecodeError as exc:
                raise SimConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise SimConfigError("config must be a JSON object")
        try:
            return cls.from_obj(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise SimConfigError(f"bad config value: {exc}") from exc


def schedule_vouch(rng: random.Random, offsets: dict[int, float] | None = None) -> int:
    """Draw how many blocks after publication the vouch lands."""
    offsets = offsets if offsets is not None else DEFAULT_VOUCH_OFFSETS
    roll = rng.random()
    cumulative = 0.0
    ordered = sorted(offsets.items())
    for offset, probability in ordered:
        cumulative += probability
        if roll < cumulative:
            return offset
    return ordered[-1][0]


def draw_downloads(
    rng: random.Random, ranges: dict[str, tuple[int, int]], trails: list[str]
) -> dict[str, int]:
    """Uniform integer draw per trail within its configured range."""
    fallback = ranges["others"]
    return {
        trail: rng.randint(*ranges.get(trail, fallback))
        for trail in sorted(trails)
    }


@dataclass
class BlockMetric:
    height: int
    timestamp: int
    bytes: int
    packages: int
    cum_packages: int
    forger: str
    forger_trail: str


@dataclass
class PackageMetric:
    name: str
    version: str
    submit_ts: int
    publish_height: int | None = None
    vouch_height: int | None = None

    def delay_minutes(self, interval_minutes: int) -> float | None:
        if self.publish_height is None or self.vouch_height is None:
            return None
        return (self.vouch_height - self.publish_height) * interval_minutes


@dataclass
class SimResult:
    chain: Chain
    blocks: list[BlockMetric]
    packages: list[PackageMetric]
    forger_counts: dict[str, int]
    config: SimConfig
    skipped_events: int


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")


class _Simulation:
    def __init__(self, config: SimConfig, events: list[PackageEvent]) -> None:
        config.validate()
        self.config = config
        self.events = sorted(events, key=lambda event: event.ts)
        self.scheme = MockSignatureScheme()
        self.keys: dict[str, KeyPair] = {}
        self.rules = config.trail_rules()

        self.rng_downloads = random.Random(f"{config.master_seed}:downloads")
        self.rng_vouches = random.Random(f"{config.master_seed}:vouches")
        self.rng_publishers = random.Random(f"{config.master_seed}:publishers")
        self.rng_trails = random.Random(f"{config.master_seed}:trails")

        self.roster: dict[str, list[Identity]] = {}
        for trail in config.trail_names():
            base = _slug(trail)
            self.roster[trail] = [
                self._identity(f"{base}-u{index:02d}") for index in range(config.users_per_trail)
            ]

        self.ledger = DownloadLedger()
        self.pending_requests: list[consensus.TrailRequest] = []
        self.staged_extras: list[consensus.TrailRequest] = []
        self.confirm_queue: list[tuple[int, str, Identity, Challenge]] = []
        self.invite_queue: list[tuple[int, str, Identity, Identity]] = []
        self.accept_queue: list[tuple[int, str, Identity, Challenge]] = []
        self.pending_packages: list[PackageRecord] = []
        self.vouch_schedule: dict[int, list[tuple[str, Identity, str]]] = {}
        self.metrics_by_checksum: dict[str, PackageMetric] = {}
        self.matched_by_checksum: dict[str, list[str]] = {}
        self.package_metrics: list[PackageMetric] = []
        self.block_metrics: list[BlockMetric] = []
        self.forger_counts: dict[str, int] = {}
        self.cum_packages = 0
        self.skipped_events = 0

    def _identity(self, name: str) -> Identity:
        keypair = self.scheme.keypair(name)
        self.keys[name] = keypair
        return Identity(name=name, public_key=keypair.public_hex)

    def _customs_active(self, state) -> bool:
        for trail in self.config.custom_rules:
            trail_state = state.registry.get(trail)
            if trail_state is None or trail_state.status is not TrailStatus.ACTIVE:
                return False
        return True

    def _sign(self, payload: bytes, identity: Identity) -> str:
        return self.scheme.sign(payload, self.keys[identity.name].private_key)

    def _request_ops(self, trail: str, requester: Identity, confirm_height: int) -> list[TrailOp]:
        challenge = self.scheme.make_challenge(
            requester.public_key, self.rng_trails.getrandbits(64)
        )
        self.confirm_queue.append((confirm_height, trail, requester, challenge))
        return [
            TrailOp(TrailOpKind.CREATE_REQUEST, trail, requester),
            TrailOp(
                TrailOpKind.CREATE_CHALLENGE, trail, requester, {"challenge": challenge.to_obj()}
            ),
        ]

    def run(self) -> SimResult:
        config = self.config
        if not self.events:
            genesis = make_genesis(1_000_000_000, [], self.scheme)
            chain = Chain.new(genesis, self.scheme)
            self._record_block(chain.blocks[0], "")
            return self._result(chain)

        genesis_ts = self.events[0].ts - config.genesis_offset_minutes * 60
        boot_trail = config.bootstrap_trail()
        boot_requester = self.roster[boot_trail][0]
        ops = self._request_ops(boot_trail, boot_requester, confirm_height=1)
        # The custom-rule trails are the experiment's principal distributions
        # and are set up first; the stock roster queues once they are all
        # active, so zero-popularity ties never hand it early forging slots.
        self.pending_requests = [
            consensus.TrailRequest(trail, self.roster[trail][0], genesis_ts)
            for trail in config.custom_rules
            if trail != boot_trail
        ]
        self.staged_extras = [
            consensus.TrailRequest(trail, self.roster[trail][0], genesis_ts)
            for trail in config.extra_trails
        ]
        genesis = make_genesis(genesis_ts, ops, self.scheme)
        chain = Chain.new(genesis, self.scheme)
        self._record_block(genesis, "")

        height = 0
        event_index = 0
        last_event_block: int | None = None
        while True:
            height += 1
            timestamp = genesis_ts + height * config.block_interval_seconds

            while event_index < len(self.events) and self.events[event_index].ts <= timestamp:
                self._submit(self.events[event_index])
                event_index += 1
            if event_index >= len(self.events) and last_event_block is None:
                last_event_block = height

            state = chain.state
            assert state is not None
            if self.staged_extras and self._customs_active(state):
                for request in self.staged_extras:
                    self.pending_requests.append(
                        consensus.TrailRequest(request.trail_name, request.requester, timestamp)
                    )
                self.staged_extras = []
            trail_ops = self._trail_ops_for(height, state)

            active_names = sorted(t.name for t in state.registry.active_trails())
            draws = draw_downloads(self.rng_downloads, config.download_ranges, active_names)
            for trail, count in draws.items():
                self.ledger.record_confirmed(trail, count)
            downloads = self.ledger.snapshot_and_reset().per_trail
            popularity = state.next_popularity(downloads)

            admitted, self.pending_packages = consensus.admit_packages(
                self.pending_packages, popularity, state.registry, config.max_packages_per_block
            )
            self._schedule_vouches(admitted, height, state)
            vouches = self._vouches_due(height)

            forger, forger_trail, candidates = self._pick_forger(state, height, popularity, trail_ops)
            metadata = ForgeMetadata(
                candidates=candidates,
                popularity_at_generation=tuple(sorted(state.popularity.items())),
                amount_of_packages=len(admitted),
                amount_of_valid_trails=len(state.registry.active_trails()),
            )
            block = Block(
                number=height,
                timestamp=timestamp,
                previous_hash=state.head_hash,
                forger=forger,
                forger_signature="",
                packages=admitted,
                vouches=vouches,
                trail_ops=trail_ops,
                popularity=popularity,
                downloads=downloads,
                metadata=metadata,
            )
            block.hash = block_digest(block)
            block.forger_signature = self._sign(bytes.fromhex(block.hash), forger)
            chain.append(block)
            self._record_block(block, forger_trail)

            if (
                last_event_block is not None
                and height >= last_event_block + DRAIN_BLOCKS
                and not self.pending_packages
                and not self.vouch_schedule
                and not self.pending_requests
                and not self.staged_extras
                and not self.confirm_queue
                and not self.invite_queue
                and not self.accept_queue
            ):
                break
        return self._result(chain)

    def _submit(self, event: PackageEvent) -> None:
        try:
            recipe = parse_pkgbuild(event.text)
        except PkgbuildError:
            self.skipped_events += 1
            return
        checksum = recipe.checksum
        if checksum in self.metrics_by_checksum:
            self.skipped_events += 1
            return
        matched = sorted(assign_trails(recipe.name, self.rules))
        pool = sorted(
            {identity for trail in matched for identity in self.roster[trail]},
            key=lambda identity: identity.name,
        )
        if not pool:
            # No trail rule matched, so nobody would ever vouch for it.
            self.skipped_events += 1
            return
        publisher = pool[self.rng_publishers.randrange(len(pool))]
        record = PackageRecord(
            recipe=recipe,
            publisher=publisher,
            signature=self._sign(recipe.canonical_bytes(), publisher),
            submitted_at=event.ts,
        )
        self.pending_packages.append(record)
        metric = PackageMetric(name=recipe.name, version=recipe.version, submit_ts=event.ts)
        self.metrics_by_checksum[checksum] = metric
        self.matched_by_checksum[checksum] = matched
        self.package_metrics.append(metric)

    def _trail_ops_for(self, height: int, state) -> list[TrailOp]:
        ops: list[TrailOp] = []

        due_confirms = [item for item in self.confirm_queue if item[0] == height]
        self.confirm_queue = [item for item in self.confirm_queue if item[0] != height]
        for _, trail, requester, challenge in due_confirms:
            solution = solve_challenge(challenge, self.keys[requester.name].private_key)
            ops.append(
                TrailOp(
                    TrailOpKind.CREATE_CONFIRM, trail, requester, {"solution": solution.to_obj()}
                )
            )
            for invitee in self.roster[trail][1:]:
                self.invite_queue.append((height + 1, trail, requester, invitee))

        due_accepts = [item for item in self.accept_queue if item[0] == height]
        self.accept_queue = [item for item in self.accept_queue if item[0] != height]
        for _, trail, invitee, challenge in due_accepts:
            solution = solve_challenge(challenge, self.keys[invitee.name].private_key)
            ops.append(
                TrailOp(TrailOpKind.MEMBER_ACCEPT, trail, invitee, {"solution": solution.to_obj()})
            )

        due_invites = [item for item in self.invite_queue if item[0] == height]
        self.invite_queue = [item for item in self.invite_queue if item[0] != height]
        for _, trail, inviter, invitee in due_invites:
            challenge = self.scheme.make_challenge(
                invitee.public_key, self.rng_trails.getrandbits(64)
            )
            ops.append(
                TrailOp(
                    TrailOpKind.MEMBER_INVITE,
                    trail,
                    invitee,
                    {
                        "challenge": challenge.to_obj(),
                        "inviter": inviter.to_obj(),
                        "signature": self._sign(
                            invite_payload(trail, invitee.public_key), inviter
                        ),
                    },
                )
            )
            self.accept_queue.append((height + 1, trail, invitee, challenge))

        if self.pending_requests:
            admitted, self.pending_requests = consensus.admit_trail_requests(
                self.pending_requests,
                state.popularity,
                state.registry,
                self.config.max_new_trails_per_block,
            )
            for request in admitted:
                ops.extend(
                    self._request_ops(
                        request.trail_name, request.requester, confirm_height=height + 1
                    )
                )
        return ops

    def _schedule_vouches(self, admitted: list[PackageRecord], height: int, state) -> None:
        for record in admitted:
            checksum = record.checksum
            metric = self.metrics_by_checksum[checksum]
            metric.publish_height = height
            self.cum_packages += 1
            offset = schedule_vouch(self.rng_vouches, self.config.vouch_offsets)
            vouch_height = height + offset
            for trail in self.matched_by_checksum[checksum]:
                trail_state = state.registry.get(trail)
                if trail_state is None or not trail_state.members:
                    continue
                members = sorted(
                    trail_state.members.values(), key=lambda member: member.name
                )
                member = members[self.rng_vouches.randrange(len(members))]
                self.vouch_schedule.setdefault(vouch_height, []).append(
                    (trail, member, checksum)
                )
                if metric.vouch_height is None or vouch_height < metric.vouch_height:
                    metric.vouch_height = vouch_height

    def _vouches_due(self, height: int) -> list[VouchRecord]:
        due = self.vouch_schedule.pop(height, [])
        return [
            VouchRecord(
                package_checksum=checksum,
                trail_name=trail,
                member=member,
                signature=self._sign(vouch_payload(checksum, trail), member),
            )
            for trail, member, checksum in due
        ]

    def _pick_forger(
        self, state, height: int, popularity: dict[str, float], trail_ops: list[TrailOp]
    ) -> tuple[Identity, str, tuple[ForgerCandidate, ...]]:
        if state.registry.has_active_members():
            draw = consensus.select_forgers(
                state.popularity, state.registry, state.head_hash, height
            )
            candidates = tuple(
                ForgerCandidate(
                    user=identity.name,
                    trails=(trail,),
                    popularity=popularity.get(trail, 0.0),
                )
                for identity, trail in draw.candidates
            )
            return draw.forger, draw.forger_trail, candidates
        confirms = [op for op in trail_ops if op.kind is TrailOpKind.CREATE_CONFIRM]
        if not confirms:
            raise RuntimeError(f"no eligible forger at height {height}")
        return confirms[0].subject, confirms[0].trail_name, ()

    def _record_block(self, block: Block, forger_trail: str) -> None:
        self.block_metrics.append(
            BlockMetric(
                height=block.number,
                timestamp=block.timestamp,
                bytes=len(block_to_line(block).encode("utf-8")),
                packages=len(block.packages),
                cum_packages=self.cum_packages,
                forger=block.forger.name,
                forger_trail=forger_trail,
            )
        )
        if block.number > 0 and forger_trail:
            self.forger_counts[forger_trail] = self.forger_counts.get(forger_trail, 0) + 1

    def _result(self, chain: Chain) -> SimResult:
        return SimResult(
            chain=chain,
            blocks=self.block_metrics,
            packages=self.package_metrics,
            forger_counts=dict(sorted(self.forger_counts.items())),
            config=self.config,
            skipped_events=self.skipped_events,
        )


def run(config: SimConfig, events: list[PackageEvent]) -> SimResult:
    """Replay the event timeline into a validated chain plus metrics."""
    return _Simulation(config, events).run()


def emit_metrics(result: SimResult, out_dir: str) -> list[str]:
    """Write blocks.csv, packages.csv, popularity.csv, forgers.csv."""
    os.makedirs(out_dir, exist_ok=True)
    interval = result.config.block_interval_minutes
    written = []

    path = os.path.join(out_dir, "blocks.csv")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["height", "timestamp", "bytes", "packages", "cum_packages", "forger", "forger_trail"]
        )
        for row in result.blocks:
            writer.writerow(
                [row.height, row.timestamp, row.bytes, row.packages, row.cum_packages, row.forger, row.forger_trail]
            )
    written.append(path)

    path = os.path.join(out_dir, "popularity.csv")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["height", "trail", "pop"])
        for block in result.chain.blocks:
            for trail, pop in sorted(block.popularity.items()):
                writer.writerow([block.number, trail, pop])
    written.append(path)

    path = os.path.join(out_dir, "packages.csv")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["name", "version", "submit_ts", "publish_height", "vouch_height", "delay_minutes"]
        )
        for row in result.packages:
            delay = row.delay_minutes(interval)
            writer.writerow(
                [
                    row.name,
                    row.version,
                    row.submit_ts,
                    row.publish_height if row.publish_height is not None else "",
                    row.vouch_height if row.vouch_height is not None else "",
                    delay if delay is not None else "",
                ]
            )
    written.append(path)

    path = os.path.join(out_dir, "forgers.csv")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["trail", "blocks_forged"])
        for trail, count in result.forger_counts.items():
            writer.writerow([trail, count])
    written.append(path)
    return written
