"""Prompt template assets and placeholder substitution.

Templates are loaded from ``assets/*.txt`` and are never inlined in code.
Substitution is single-pass and simultaneous: filled values are never
rescanned, so data that happens to contain ``{placeholder}`` text survives
verbatim.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

from .errors import MissingPromptAsset, UnfilledPlaceholder

GOAL_CONSTRUCTION = "goal_construction"
CONTEXTUAL_GROUNDING = "contextual_grounding"
WORKFLOW_SCAFFOLDING = "workflow_scaffolding"
ADAPTIVE_EXECUTOR_SYSTEM = "adaptive_executor_system"
ADAPTIVE_EXECUTOR_REFLECTION = "adaptive_executor_reflection"

_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    """Return the raw template text for an asset name (without ``.txt``)."""
    try:
        ref = resources.files("dana").joinpath("assets", f"{name}.txt")
        return ref.read_text(encoding="utf-8")
    except (FileNotFoundError, ModuleNotFoundError) as exc:
        raise MissingPromptAsset(f"prompt asset {name!r} not found") from exc


def template_placeholders(template: str) -> set[str]:
    return set(_PLACEHOLDER_RE.findall(template))


def fill_template(template: str, values: dict[str, str]) -> str:
    """Substitute every ``{name}`` slot of the template in one pass.

    Raises UnfilledPlaceholder if the template declares a slot that
    ``values`` does not cover. Extra keys are ignored.
    """
    slots = template_placeholders(template)
    missing = sorted(slots - set(values))
    if missing:
        raise UnfilledPlaceholder(f"unfilled placeholders: {', '.join(missing)}")

    def _sub(match: re.Match[str]) -> str:
        return str(values[match.group(1)])

    return _PLACEHOLDER_RE.sub(_sub, template)


def render(name: str, values: dict[str, str]) -> str:
    return fill_template(load_template(name), values)
