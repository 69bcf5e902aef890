"""Backend selection for the closed-loop kernels.

The compiled ``_core`` extension is used when it imports; otherwise the
pure-Python ``_fallback``.  Set ``SOURCESEEK_BACKEND=python`` to force the
fallback.
"""

from __future__ import annotations

import os

from . import _fallback

STATUS_COMPLETED = _fallback.STATUS_COMPLETED
STATUS_DOMAIN_EXIT = _fallback.STATUS_DOMAIN_EXIT
STATUS_SETTLED = _fallback.STATUS_SETTLED

_BACKENDS = {"python": _fallback}

try:
    from . import _core
except ImportError:  # extension not built
    _core = None
else:
    _BACKENDS["compiled"] = _core


def available_backends() -> tuple[str, ...]:
    return tuple(_BACKENDS)


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (``"compiled"``/``"python"``), or the default."""
    if name is None:
        name = os.environ.get("SOURCESEEK_BACKEND", "compiled" if _core is not None else "python")
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {', '.join(_BACKENDS)}") from None


def default_backend_name() -> str:
    mod = get_backend()
    return "compiled" if mod is _core else "python"
