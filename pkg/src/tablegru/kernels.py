"""Backend selection for the recurrent scan kernels.

The compiled extension is used when it imports; otherwise the numpy
loops in ``_scan_py`` take over. ``use_backend`` switches explicitly,
which the tests and the kernel benchmark rely on.
"""

from . import _scan_py

try:
    from . import _scan_ext
except ImportError:  # extension not built
    _scan_ext = None

_BACKENDS = {"python": _scan_py}
if _scan_ext is not None:
    _BACKENDS["compiled"] = _scan_ext

_active = _scan_ext if _scan_ext is not None else _scan_py
BACKEND = "compiled" if _scan_ext is not None else "python"


def available_backends():
    return sorted(_BACKENDS)


def use_backend(name):
    """Select the scan implementation by name ("compiled" or "python")."""
    global _active, BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _active = _BACKENDS[name]
    BACKEND = name


def gru_forward(xg, u):
    return _active.gru_forward(xg, u)


def gru_backward(dhs, gates, hs, u):
    return _active.gru_backward(dhs, gates, hs, u)


def lstm_forward(xg, u):
    return _active.lstm_forward(xg, u)


def lstm_backward(dhs, gates, hs, cs, u):
    return _active.lstm_backward(dhs, gates, hs, cs, u)
