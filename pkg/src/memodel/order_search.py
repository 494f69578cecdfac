"""Backend selection for the global-order witness search.

The compiled extension is used when it imported cleanly; the pure-Python
fallback is selected otherwise, or when MEMODEL_PURE_PYTHON=1 is set in the
environment.  Both backends implement the same order_outcomes contract (see
memodel._order_search_py) and are cross-checked in the test suite.
"""

import os

from . import _order_search_py

if os.environ.get("MEMODEL_PURE_PYTHON") == "1":
    _impl = _order_search_py
else:
    try:
        from . import _order_search_c as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _order_search_py

BACKEND = _impl.BACKEND
order_outcomes = _impl.order_outcomes


def available_backends():
    backends = {"python": _order_search_py}
    try:
        from . import _order_search_c
        backends["c"] = _order_search_c
    except ImportError:
        pass
    return backends
