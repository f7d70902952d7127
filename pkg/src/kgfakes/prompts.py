"""Deterministic rendering of the writing and judging prompts.

Templates are plain text files with ``{{slot}}`` placeholders, one file per
chat role. Rendering is a single-pass substitution, so inserted values are
never re-scanned for slots, and a rendered prompt is always the template's
prefix, the value, and the template's suffix, byte for byte. Every prompt
carries a sha256 fingerprint over both parts; the mock completion provider
keys its canned responses on it.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import TemplateError

# Stands in for a missing entity description so the prompt shape never varies.
NO_DESCRIPTION = "(no description available)"

_SLOT = re.compile(r"\{\{([a-z_]+)\}\}")


@dataclass(frozen=True)
class PromptText:
    """A rendered prompt split into chat roles, plus its content fingerprint."""

    system_part: str
    user_part: str
    fingerprint: str

    def as_messages(self) -> list[dict[str, str]]:
        """Chat-style message list for the completion endpoint."""
        return [
            {"role": "system", "content": self.system_part},
            {"role": "user", "content": self.user_part},
        ]

    def as_single_message(self) -> str:
        """Both parts joined by a blank line, for single-message providers."""
        return f"{self.system_part}\n\n{self.user_part}"


def build_generation_prompt(
    subject: str, description: str, relation: str, object_used: str
) -> PromptText:
    """Render the article-writing prompt for one (possibly falsified) fact.

    Subject, relation, and the object actually used must be non-empty; a
    missing or empty description falls back to the fixed placeholder. The
    triple is serialized as ``<subject, relation, object>`` on its own line.
    """
    for field, value in (
        ("subject", subject),
        ("relation", relation),
        ("object_used", object_used),
    ):
        if not value:
            raise TemplateError(f"required field '{field}' is empty")
    triple = f"<{subject}, {relation}, {object_used}>"
    return _prompt(
        "generation_system.txt",
        "generation_user.txt",
        {
            "subject": subject,
            "description": description if description else NO_DESCRIPTION,
            "triple": triple,
        },
    )


def build_detection_prompt(statement: str) -> PromptText:
    """Render the real-or-fake judging prompt around one statement.

    The statement is inserted verbatim, without escaping; containment is a
    property of the single-pass rendering, not of the value.
    """
    if not statement:
        raise TemplateError("required field 'statement' is empty")
    return _prompt(
        "detection_system.txt", "detection_user.txt", {"statement": statement}
    )


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    raw = (resources.files(__package__) / "templates" / name).read_text(
        encoding="utf-8"
    )
    # Template files end with a POSIX newline; the rendered part does not.
    return raw[:-1] if raw.endswith("\n") else raw


def _render(template: str, values: dict[str, str]) -> str:
    counts = {name: 0 for name in values}

    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in values:
            raise TemplateError(f"template references unknown slot '{name}'")
        counts[name] += 1
        return values[name]

    rendered = _SLOT.sub(substitute, template)
    for name, n in counts.items():
        if n != 1:
            raise TemplateError(
                f"slot '{name}' must appear exactly once in the template, found {n}"
            )
    return rendered


def _prompt(system_template: str, user_template: str, values: dict[str, str]) -> PromptText:
    system_part = _template(system_template)
    user_part = _render(_template(user_template), values)
    return PromptText(system_part, user_part, _fingerprint(system_part, user_part))


def _fingerprint(system_part: str, user_part: str) -> str:
    digest = hashlib.sha256()
    digest.update(system_part.encode("utf-8"))
    digest.update(b"\x1e")
    digest.update(user_part.encode("utf-8"))
    return digest.hexdigest()
