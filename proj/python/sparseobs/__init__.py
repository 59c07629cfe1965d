"""Sparse observation systems on random bipartite factor graphs.

Exact posterior inference at desk scale, belief propagation, and density
evolution, backed by the C++ core in ``sparseobs._core``.
"""

try:
    from ._core import *  # noqa: F401,F403
    from ._core import __version__  # noqa: F401
except ImportError:  # pragma: no cover - dev tree with the module on sys.path
    from _core import *  # noqa: F401,F403
    from _core import __version__  # noqa: F401
