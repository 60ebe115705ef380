"""Hot numeric kernels for the safety QP.

The compiled extension is preferred when it was built; otherwise the
numpy fallback is selected at import. Both expose the same functions:

    solve_active_set(unx, uny, a_flat, b, lo, hi) -> (ux, uy, found, active, obj)
    grid_min(unx, uny, a_flat, b, lo, hi, n0, refinements, expand, walk_limit)
        -> (found, obj, ux, uy)
"""

try:
    from . import _qpcore as _impl
    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on the build
    from . import _pyfallback as _impl
    BACKEND = "python"

from . import _pyfallback as fallback

solve_active_set = _impl.solve_active_set
grid_min = _impl.grid_min
