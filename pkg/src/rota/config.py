"""Process-wide switches (audit mode)."""

from __future__ import annotations

import contextlib
import threading

_state = threading.local()


def audit_enabled() -> bool:
    return getattr(_state, "audit", False)


def set_audit(flag: bool) -> None:
    _state.audit = bool(flag)


@contextlib.contextmanager
def audit_mode(flag: bool = True):
    """Temporarily enable slow cross-checks inside the solvers."""
    old = audit_enabled()
    set_audit(flag)
    try:
        yield
    finally:
        set_audit(old)
