#!/usr/bin/env python3
"""Regenerate the bundled fixture timeline and simulation config.

Deterministic: rerunning produces byte-identical fixtures. The timeline
spans ~44 hours of synthetic package history (500 events) across names
that exercise every custom trail rule plus the stock roster at reduced
scale.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

START_TS = 1205582400  # 2008-03-15 12:00:00 UTC
EVENT_COUNT = 500

RECIPE = """pkgname={name}
pkgver={version}
pkgrel={release}
pkgdesc='{description}'
url='https://pkgs.example.org/{name}'
arch=('x86_64' 'i686')
license=('{license}')
depends=({depends})
source=("https://pkgs.example.org/{name}/${{pkgname}}-${{pkgver}}.tar.gz")
sha256sums=('{checksum}')
"""

NAME_STEMS = [
    "openssh", "bzr", "vim", "gcc", "coreutils", "linux-firmware", "zlib", "curl",
    "python-requests", "python-numpy", "pyyaml", "pycrypto", "mypy", "scapy",
    "perl-dbi", "perl-www-curl", "perl-xml-parser", "hyperl",
    "ruby-rake", "ruby-gems", "rbenv", "herbstluftwm",
    "falcon", "falkon-qt", "metal-fal",
    "htop", "tmux", "alacritty", "firefox", "gimp", "inkscape", "mesa",
    "systemd", "bash", "grep", "sed", "eawk", "make", "cmake", "ninja",
]

LICENSES = ["GPL", "MIT", "BSD", "Apache"]
DEPENDS = ["'glibc'", "'glibc' 'zlib'", "'openssl'", "'glibc' 'ncurses'"]
AUTHORS = ["allan", "pierre", "juergen", "dan", "thomas", "ionut", "eric", "giovanni"]

CONFIG = {
    "block_interval_minutes": 20,
    "genesis_offset_minutes": 40,
    "max_packages_per_block": 100,
    "max_new_trails_per_block": 10,
    "vouch_offsets": {"1": 0.6, "2": 0.2, "3": 0.1, "4": 0.1},
    "download_ranges": {
        "archlinux": [200000, 300000],
        "pypy": [10000, 400000],
        "perl": [100000, 100500],
        "ruby": [100000, 100900],
        "fal": [5000, 50000],
        "others": [0, 100000],
    },
    "custom_rules": {
        "archlinux": ".*",
        "pypy": "py",
        "perl": "perl",
        "ruby": "rb",
        "fal": "fal",
    },
    "extra_trails": [
        "ALTLinux", "CentOS", "Debian", "Fedora",
        "Gentoo", "Knoppix", "Slackware", "Ubuntu Linux",
    ],
    "users_per_trail": 4,
    "master_seed": 0,
}


def make_recipe(rng: random.Random, name: str, version: str) -> str:
    checksum = f"{rng.getrandbits(256):064x}"
    return RECIPE.format(
        name=name,
        version=version,
        release=rng.randint(1, 3),
        description=f"synthetic history entry for {name}",
        license=rng.choice(LICENSES),
        depends=rng.choice(DEPENDS),
        checksum=checksum,
    )


def main() -> None:
    rng = random.Random(2024)
    versions: dict[str, int] = {}
    ts = START_TS
    lines = []
    for _ in range(EVENT_COUNT):
        stem = rng.choice(NAME_STEMS)
        if stem in versions and rng.random() < 0.55:
            versions[stem] += 1
            action = "update"
        else:
            versions.setdefault(stem, 0)
            action = "add" if versions[stem] == 0 else "update"
        version = f"{1 + versions[stem] // 10}.{versions[stem] % 10}"
        event = {
            "ts": ts,
            "action": action,
            "path": f"{stem}/repos/core-x86_64/PKGBUILD",
            "text": make_recipe(rng, stem, version),
            "author": rng.choice(AUTHORS),
        }
        lines.append(json.dumps(event, sort_keys=True))
        ts += rng.randint(60, 600)

    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "timeline.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (FIXTURES / "sim_config.json").write_text(
        json.dumps(CONFIG, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {EVENT_COUNT} events; span {(ts - START_TS) / 3600:.1f}h")


if __name__ == "__main__":
    main()
