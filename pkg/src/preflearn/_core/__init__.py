"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The hit-and-run chain update dominates runtime everywhere posterior samples
are drawn, so it is implemented twice with one interface: a Cython extension
(``_hitrun``) built at install time when a C compiler is available, and a
numpy reference (``_pyref``) used otherwise. Both consume pre-drawn random
streams, so a fixed seed gives reproducible chains on either backend.
"""

try:
    from . import _hitrun as _backend

    BACKEND = "compiled"
except ImportError:  # extension not built on this install
    from . import _pyref as _backend

    BACKEND = "python"

run_chain = _backend.run_chain


def available_backends() -> dict:
    """Map backend name -> kernel module, for benchmarks and tests."""
    backends = {}
    try:
        from . import _hitrun

        backends["compiled"] = _hitrun
    except ImportError:
        pass
    from . import _pyref

    backends["python"] = _pyref
    return backends
