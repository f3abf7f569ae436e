import hashlib
import random

import pytest

from capivara.crypto import MockSignatureScheme
from capivara.ingest import PackageEvent
from capivara.model import Identity
from capivara.pkgbuild import parse_pkgbuild

RECIPE_TEMPLATE = """pkgname={name}
pkgver={version}
pkgrel=1
pkgdesc='synthetic test package'
url='https://example.org/{name}'
arch=('x86_64')
license=('GPL')
depends=('glibc')
source=("https://example.org/{name}-{version}.tar.gz")
sha256sums=('{checksum}')
"""


def make_recipe_text(name: str, version: str = "1.0") -> str:
    checksum = hashlib.sha256(f"{name}:{version}".encode()).hexdigest()
    return RECIPE_TEMPLATE.format(name=name, version=version, checksum=checksum)


def make_recipe(name: str, version: str = "1.0"):
    return parse_pkgbuild(make_recipe_text(name, version))


def make_event(ts: int, name: str, version: str = "1.0", action: str = "add") -> PackageEvent:
    return PackageEvent(
        ts=ts,
        action=action,
        path=f"{name}/PKGBUILD",
        text=make_recipe_text(name, version),
        author="tester",
    )


@pytest.fixture
def scheme() -> MockSignatureScheme:
    return MockSignatureScheme()


@pytest.fixture
def identity_factory(scheme):
    def factory(name: str) -> tuple[Identity, bytes]:
        keypair = scheme.keypair(name)
        return Identity(name=name, public_key=keypair.public_hex), keypair.private_key

    return factory


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)
