"""Edit-distance kernel selection.

Imports the compiled extension when available, otherwise the pure-Python
fallback. Set POPLENS_PURE_PYTHON=1 to force the fallback (used by the
benchmark and for debugging).
"""

from __future__ import annotations

import os

if os.environ.get("POPLENS_PURE_PYTHON"):
    from poplens import _editdist_py as _impl

    BACKEND = "python"
else:
    try:
        from poplens import _editdist as _impl  # type: ignore[no-redef]

        BACKEND = "c"
    except ImportError:
        from poplens import _editdist_py as _impl  # type: ignore[no-redef]

        BACKEND = "python"

levenshtein = _impl.levenshtein
similarity = _impl.similarity
best_match = _impl.best_match

__all__ = ["BACKEND", "levenshtein", "similarity", "best_match"]
