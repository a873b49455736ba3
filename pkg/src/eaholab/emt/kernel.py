"""Selects the integration kernel: compiled extension when importable,
otherwise the pure-Python reference."""
from __future__ import annotations

from types import ModuleType

from . import _kernel_py

try:
    from . import _kernel_ext
except ImportError:  # extension not built
    _kernel_ext = None

BACKENDS: dict[str, ModuleType] = {"python": _kernel_py}
if _kernel_ext is not None:
    BACKENDS["compiled"] = _kernel_ext

_active = "compiled" if _kernel_ext is not None else "python"


def get_backend(name: str | None = None) -> ModuleType:
    name = name or _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None


def active_backend() -> str:
    return _active


def use_backend(name: str) -> None:
    """Make ``name`` ("compiled" or "python") the default for new runs."""
    global _active
    get_backend(name)
    _active = name
