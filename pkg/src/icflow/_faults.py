"""Deliberate fault injection used to prove that checks can fail.

Faults are held in a context variable so concurrent suites never see each
other's faults.
"""
import contextlib
import contextvars

FAULTS = ("flip_h_sign", "binomial_off_by_one", "drop_qk_term")

_active = contextvars.ContextVar("icflow_faults", default=frozenset())


def active(name):
    return name in _active.get()


@contextlib.contextmanager
def inject_fault(name):
    """Enable the named fault inside the ``with`` block."""
    if name not in FAULTS:
        raise ValueError(f"unknown fault {name!r}; choose from {FAULTS}")
    token = _active.set(_active.get() | {name})
    try:
        yield
    finally:
        _active.reset(token)
