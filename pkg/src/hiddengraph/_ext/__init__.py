"""Hot kernels, compiled when available.

The Cython module ``_kernels`` is preferred; if it was not built (or
``HIDDENGRAPH_PURE=1`` is set) the numpy implementations in ``_fallback`` are
used instead. Both expose the same functions and a ``BACKEND`` string.

The compiled dense kernels (message passing, gating, attention) are plain
loops, which beat numpy's call overhead at small feature widths but lose to
BLAS at wide ones. :data:`kernels` therefore routes those kernels by feature
width: compiled up to ``DENSE_MAX_DIM``, numpy above. Geometry kernels are
always compiled when available.
"""
import os
from types import SimpleNamespace

from . import _fallback

DENSE_MAX_DIM = 24

_DENSE = ("softmax_message_forward", "softmax_message_backward", "gated_merge_forward",
          "gated_merge_backward", "attend_forward", "attend_backward")
_GEOMETRY = ("iou_matrix", "l1_normalize_columns", "shift_boxes")


def _routed(name, compiled):
    small, large = getattr(compiled, name), getattr(_fallback, name)

    def call(first, *rest):
        fn = small if first.shape[-1] <= DENSE_MAX_DIM else large
        return fn(first, *rest)

    call.__name__ = name
    call.__doc__ = f"``{name}``: compiled for feature width <= {DENSE_MAX_DIM}, numpy above."
    return call


def _hybrid(compiled):
    funcs = {n: getattr(compiled, n) for n in _GEOMETRY}
    funcs.update({n: _routed(n, compiled) for n in _DENSE})
    return SimpleNamespace(BACKEND=compiled.BACKEND, **funcs)


def _load_compiled():
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = None if os.environ.get("HIDDENGRAPH_PURE") else _load_compiled()
kernels = _fallback if _compiled is None else _hybrid(_compiled)

BACKEND = kernels.BACKEND


def available_backends():
    """Importable kernel modules keyed by name (unrouted, for comparisons)."""
    found = {"numpy": _fallback}
    compiled = _load_compiled()
    if compiled is not None:
        found["cython"] = compiled
    return found
