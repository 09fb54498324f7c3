"""
Profile registry for can_pqc_sim.

Loads algorithm profiles from the YAML profile file. Every mapping is
tagged with its source line while parsing so that schema errors can point
at the offending entry.

Schema (one entry per item of the top-level `profiles` list):

    name: str                      unique
    kind: KEM | DSA
    family: str                    optional
    security_level: 1 | 2 | 3 | 5
    campaign_default: bool         optional, default true
    size_source: str               revision the size constants come from
    timing_source: str             where the timing table comes from
    sizes:
      public_key, secret_key: int  bytes, > 0
      ciphertext, shared_secret    KEM only
      signature                    DSA only
    timings:                       optional table_driven model
      sampling: calibrated | raw   optional
      <config>: {<op>: [mean_ms, std_ms], ...}
    cycles: {<op>: int}            optional cycle_based model
    reference:                     optional published values, per config
      <config>: {overhead: [mean_ms, std_ms], nominal: [...], success_rate: float}
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import yaml
from pydantic import ValidationError

from can_pqc_sim.schemas.profile import AlgorithmProfile

logger = logging.getLogger("profiles")

_LINE_KEY = "__line__"


class ProfileError(ValueError):
    """Raised for unreadable or invalid profile data; `line` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None) -> None:
        self.line = line
        self.source = source
        where = source or "<profiles>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")


class UnknownProfileError(ProfileError):
    """Raised when a campaign names a profile that is not loaded."""

    def __init__(self, name: str, known: Iterable[str]) -> None:
        self.name = name
        super().__init__(f"unknown profile '{name}'; known profiles: {', '.join(sorted(known))}")


class _LineLoader(yaml.SafeLoader):
    """SafeLoader that records the source line of every mapping."""

    def construct_mapping(self, node, deep=False):
        mapping = super().construct_mapping(node, deep=True)
        mapping[_LINE_KEY] = node.start_mark.line + 1
        return mapping


def _strip_lines(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _strip_lines(v) for k, v in value.items() if k != _LINE_KEY}
    if isinstance(value, list):
        return [_strip_lines(v) for v in value]
    return value


def _error_line(entry: Dict[str, Any], loc: Iterable[Any]) -> Optional[int]:
    """Deepest recorded line along a pydantic error location."""
    line = entry.get(_LINE_KEY)
    node: Any = entry
    for part in loc:
        if isinstance(node, dict) and part in node:
            node = node[part]
        elif isinstance(node, list) and isinstance(part, int) and part < len(node):
            node = node[part]
        else:
            break
        if isinstance(node, dict) and _LINE_KEY in node:
            line = node[_LINE_KEY]
    return line


def _positive_sizes(profile: AlgorithmProfile) -> List[str]:
    sizes = profile.sizes
    named = {"public_key": sizes.public_key, "secret_key": sizes.secret_key,
             "ciphertext": sizes.ciphertext, "signature": sizes.signature}
    return [name for name, value in named.items() if value is not None and value <= 0]


def parse_profiles(text: str, source: Optional[str] = None) -> List[AlgorithmProfile]:
    """
    Parse profile YAML text.

    Raises:
        ProfileError: on YAML syntax errors, missing or invalid fields,
            unknown kinds, non-positive sizes, or duplicate names.
    """
    try:
        document = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ProfileError(f"YAML error: {getattr(e, 'problem', e)}",
                           line=mark.line + 1 if mark is not None else None, source=source) from e

    if not isinstance(document, dict) or not document.get("profiles"):
        raise ProfileError("no profiles defined (expected a non-empty top-level 'profiles' list)",
                           line=1, source=source)
    entries = document["profiles"]
    if not isinstance(entries, list):
        raise ProfileError("'profiles' must be a list", line=document.get(_LINE_KEY), source=source)

    profiles: List[AlgorithmProfile] = []
    seen: Dict[str, int] = {}
    for entry in entries:
        if not isinstance(entry, dict):
            raise ProfileError("each profile must be a mapping", line=document.get(_LINE_KEY), source=source)
        line = entry.get(_LINE_KEY)
        try:
            profile = AlgorithmProfile.model_validate(_strip_lines(entry))
        except ValidationError as e:
            first = e.errors()[0]
            field = ".".join(str(p) for p in first["loc"]) or "<profile>"
            name = entry.get("name", "<unnamed>")
            raise ProfileError(f"profile '{name}': {field}: {first['msg']}",
                               line=_error_line(entry, first["loc"]), source=source) from e

        bad = _positive_sizes(profile)
        if bad:
            raise ProfileError(f"profile '{profile.name}': sizes {bad} must be > 0", line=line, source=source)
        if profile.name in seen:
            raise ProfileError(
                f"duplicate profile name '{profile.name}' (first defined at line {seen[profile.name]})",
                line=line, source=source,
            )
        seen[profile.name] = line
        profiles.append(profile)

    logger.debug(f"[Profiles] loaded {len(profiles)} profiles from {source or '<text>'}")
    return profiles


def load_profiles(source: Union[str, Path]) -> List[AlgorithmProfile]:
    """
    Load every profile from a profile file.

    Raises:
        ProfileError: if the file cannot be read or fails validation.
    """
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ProfileError(f"cannot read profile file: {e.strerror or e}", source=str(path)) from e
    return parse_profiles(text, source=str(path))


def index_profiles(profiles: Iterable[AlgorithmProfile]) -> Dict[str, AlgorithmProfile]:
    return {p.name: p for p in profiles}


def get_profile(profiles: Dict[str, AlgorithmProfile], name: str) -> AlgorithmProfile:
    """
    Look up a profile by exact name, falling back to a case-insensitive match.

    Raises:
        UnknownProfileError: if no profile matches.
    """
    if name in profiles:
        return profiles[name]
    folded = {k.casefold(): v for k, v in profiles.items()}
    try:
        return folded[name.casefold()]
    except KeyError:
        raise UnknownProfileError(name, profiles) from None


def default_campaign_algorithms(profiles: Iterable[AlgorithmProfile]) -> List[str]:
    """Names of timed profiles enabled for default campaigns, in file order."""
    return [p.name for p in profiles if p.campaign_default and p.timings is not None]
