"""Parser for PKGBUILD package recipes, pinned at parser version "regexp v1.0".

Covers the recipe constructs the chain stores: scalar and array
assignments, $var / ${var} substitution, single-group brace expansion,
and single/double quoting. Function bodies are skipped; unknown keys are
ignored. Deliberately not a shell: reproducibility over generality.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .crypto import Digest, hash_bytes

PARSER_VERSION = "regexp v1.0"

_ASSIGN_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)=(.*)$")
_FUNC_OPEN_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_@.-]*\s*\(\s*\)\s*\{?\s*$")
_VAR_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}|\$([A-Za-z_][A-Za-z0-9_]*)")

_SCALAR_KEYS = ("pkgname", "pkgver", "pkgrel", "pkgdesc", "url")
_ARRAY_KEYS = (
    "arch",
    "license",
    "depends",
    "makedepends",
    "optdepends",
    "validpgpkeys",
    "source",
    "sha256sums",
    "md5sums",
)


class PkgbuildError(ValueError):
    """Raised when a recipe cannot be parsed; message names the problem key."""


@dataclass
class PackageRecipe:
    """Parsed recipe fields; identity is the hash of the canonical form."""

    name: str
    version: str
    release: int = 1
    description: str = ""
    url: str = ""
    architectures: list[str] = field(default_factory=list)
    licenses: list[str] = field(default_factory=list)
    depends: list[str] = field(default_factory=list)
    makedepends: list[str] = field(default_factory=list)
    optdepends: list[str] = field(default_factory=list)
    sources: list[str] = field(default_factory=list)
    checksums: list[str] = field(default_factory=list)
    checksum_scheme: str = ""
    valid_pgp_keys: list[str] = field(default_factory=list)
    parser_version: str = PARSER_VERSION

    def to_obj(self) -> dict:
        return {
            "arch": list(self.architectures),
            "checksum_scheme": self.checksum_scheme,
            "checksums": list(self.checksums),
            "depends": list(self.depends),
            "license": list(self.licenses),
            "makedepends": list(self.makedepends),
            "name": self.name,
            "optdepends": list(self.optdepends),
            "parser": self.parser_version,
            "pkgdesc": self.description,
            "pkgrel": self.release,
            "pkgver": self.version,
            "source": list(self.sources),
            "url": self.url,
            "validpgpkeys": list(self.valid_pgp_keys),
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "PackageRecipe":
        return cls(
            name=obj["name"],
            version=obj["pkgver"],
            release=obj["pkgrel"],
            description=obj.get("pkgdesc", ""),
            url=obj.get("url", ""),
            architectures=list(obj.get("arch", [])),
            licenses=list(obj.get("license", [])),
            depends=list(obj.get("depends", [])),
            makedepends=list(obj.get("makedepends", [])),
            optdepends=list(obj.get("optdepends", [])),
            sources=list(obj.get("source", [])),
            checksums=list(obj.get("checksums", [])),
            checksum_scheme=obj.get("checksum_scheme", ""),
            valid_pgp_keys=list(obj.get("validpgpkeys", [])),
            parser_version=obj.get("parser", PARSER_VERSION),
        )

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_obj(), sort_keys=True, separators=(",", ":")).encode("utf-8")

    @property
    def checksum(self) -> Digest:
        return hash_bytes(self.canonical_bytes())


def substitute_vars(value: str, bindings: dict[str, str]) -> str:
    """Replace $name and ${name} with bound values; unbound stay verbatim."""

    def repl(match: re.Match) -> str:
        name = match.group(1) or match.group(2)
        bound = bindings.get(name)
        return bound if bound is not None else match.group(0)

    return _VAR_RE.sub(repl, value)


def expand_braces(token: str) -> list[str]:
    """Expand a single {a,b,...} alternative group within a token.

    ${name} is variable syntax, never a group. A braced run without a
    top-level comma stays literal. Unbalanced braces raise PkgbuildError.
    """
    i = 0
    while i < len(token):
        ch = token[i]
        if ch == "$" and i + 1 < len(token) and token[i + 1] == "{":
            close = token.find("}", i + 2)
            if close < 0:
                raise PkgbuildError(f"unbalanced braces in token: {token!r}")
            i = close + 1
            continue
        if ch == "{":
            close = token.find("}", i + 1)
            if close < 0:
                raise PkgbuildError(f"unbalanced braces in token: {token!r}")
            body = token[i + 1 : close]
            if "," not in body:
                i = close + 1
                continue
            prefix, suffix = token[:i], token[close + 1 :]
            return [prefix + alt + suffix for alt in body.split(",")]
        if ch == "}":
            raise PkgbuildError(f"unbalanced braces in token: {token!r}")
        i += 1
    return [token]


# Internally a token is a list of (text, quote) segments with quote one of
# "none" | "single" | "double"; substitution skips single quotes and brace
# groups only form in unquoted text, mirroring shell evaluation order.


def _split_tokens(body: str) -> list[list[tuple[str, str]]]:
    tokens: list[list[tuple[str, str]]] = []
    segments: list[tuple[str, str]] = []
    buf: list[str] = []
    mode = "none"

    def flush_segment() -> None:
        if buf:
            segments.append(("".join(buf), mode))
            buf.clear()

    def flush_token() -> None:
        flush_segment()
        if segments:
            tokens.append(list(segments))
            segments.clear()

    for ch in body:
        if mode == "none":
            if ch.isspace():
                flush_token()
            elif ch == "'":
                flush_segment()
                mode = "single"
            elif ch == '"':
                flush_segment()
                mode = "double"
            else:
                buf.append(ch)
        elif mode == "single":
            if ch == "'":
                segments.append(("".join(buf), "single"))
                buf.clear()
                mode = "none"
            else:
                buf.append(ch)
        else:  # double
            if ch == '"':
                segments.append(("".join(buf), "double"))
                buf.clear()
                mode = "none"
            else:
                buf.append(ch)
    if mode != "none":
        raise PkgbuildError("unterminated quote in array value")
    flush_token()
    return tokens


def _expand_segments(segments: list[tuple[str, str]], bindings: dict[str, str]) -> list[str]:
    # Brace expansion first (unquoted segments only), then substitution.
    variants: list[list[tuple[str, str]]] = [[]]
    expanded_group = False
    for text, quote in segments:
        if quote == "none" and not expanded_group:
            alternatives = expand_braces(text)
            if len(alternatives) > 1:
                expanded_group = True
                variants = [v + [(alt, quote)] for v in variants for alt in alternatives]
                continue
        variants = [v + [(text, quote)] for v in variants]
    results = []
    for segs in variants:
        parts = [
            text if quote == "single" else substitute_vars(text, bindings)
            for text, quote in segs
        ]
        results.append("".join(parts))
    return results


def _unquote_scalar(raw: str, bindings: dict[str, str]) -> str:
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == "'" and raw[-1] == "'":
        return raw[1:-1]
    if len(raw) >= 2 and raw[0] == '"' and raw[-1] == '"':
        return substitute_vars(raw[1:-1], bindings)
    return substitute_vars(raw, bindings)


def _collect_array(lines: list[str], start: int, first_value: str) -> tuple[str, int]:
    """Gather an array body from '(' to its unquoted ')', possibly multiline."""
    pieces: list[str] = []
    mode = "none"
    line_index = start
    text = first_value
    while True:
        for pos, ch in enumerate(text):
            if mode == "none":
                if ch == "'":
                    mode = "single"
                elif ch == '"':
                    mode = "double"
                elif ch == ")":
                    pieces.append(text[:pos])
                    return "\n".join(pieces), line_index
            elif mode == "single" and ch == "'":
                mode = "none"
            elif mode == "double" and ch == '"':
                mode = "none"
        pieces.append(text)
        line_index += 1
        if line_index >= len(lines):
            raise PkgbuildError("unterminated array value")
        text = lines[line_index]


def parse_pkgbuild(text: str) -> PackageRecipe:
    """Parse recipe text into a PackageRecipe.

    Missing pkgname or pkgver raises PkgbuildError naming the key.
    """
    lines = text.splitlines()
    bindings: dict[str, str] = {}
    scalars: dict[str, str] = {}
    arrays: dict[str, list[str]] = {}

    i = 0
    in_function = False
    while i < len(lines):
        line = lines[i]
        stripped = line.strip()
        if in_function:
            if stripped == "}":
                in_function = False
            i += 1
            continue
        if not stripped or stripped.startswith("#"):
            i += 1
            continue
        if _FUNC_OPEN_RE.match(stripped):
            in_function = "{" in stripped
            if not in_function and i + 1 < len(lines) and lines[i + 1].strip() == "{":
                in_function = True
                i += 1
            i += 1
            continue
        match = _ASSIGN_RE.match(stripped)
        if match is None:
            i += 1
            continue
        key, value = match.group(1), match.group(2)
        if value.startswith("("):
            body, i = _collect_array(lines, i, value[1:])
            items: list[str] = []
            for token in _split_tokens(body):
                items.extend(_expand_segments(token, bindings))
            if key in _ARRAY_KEYS:
                arrays[key] = items
        else:
            resolved = _unquote_scalar(value, bindings)
            bindings[key] = resolved
            if key in _SCALAR_KEYS:
                scalars[key] = resolved
        i += 1

    if "pkgname" not in scalars or not scalars["pkgname"]:
        raise PkgbuildError("pkgname missing")
    if "pkgver" not in scalars or not scalars["pkgver"]:
        raise PkgbuildError("pkgver missing")

    checksums: list[str] = []
    scheme = ""
    if "sha256sums" in arrays:
        checksums, scheme = arrays["sha256sums"], "sha256"
    elif "md5sums" in arrays:
        checksums, scheme = arrays["md5sums"], "md5"

    sources = arrays.get("source", [])
    if sources and checksums and len(sources) != len(checksums):
        raise PkgbuildError(
            f"checksum count {len(checksums)} does not match source count {len(sources)}"
        )

    return PackageRecipe(
        name=scalars["pkgname"],
        version=scalars["pkgver"],
        release=_parse_release(scalars.get("pkgrel")),
        description=scalars.get("pkgdesc", ""),
        url=scalars.get("url", ""),
        architectures=arrays.get("arch", []),
        licenses=arrays.get("license", []),
        depends=arrays.get("depends", []),
        makedepends=arrays.get("makedepends", []),
        optdepends=arrays.get("optdepends", []),
        sources=sources,
        checksums=checksums,
        checksum_scheme=scheme,
        valid_pgp_keys=arrays.get("validpgpkeys", []),
    )


def _parse_release(raw: str | None) -> int:
    if raw is None:
        return 1
    match = re.match(r"\d+", raw.strip())
    return int(match.group(0)) if match else 1
