"""Backend selection for the SHA-256 Merkle kernels.

Prefers the compiled OpenSSL extension, falls back to the hashlib
implementation. Set VANETRUST_KERNEL=python to force the fallback
(useful for the backend comparison benchmark).
"""

from __future__ import annotations

import os

from vanetrust import _kernel_py

if os.environ.get("VANETRUST_KERNEL", "").lower() in ("python", "py"):
    _impl = _kernel_py
else:
    try:
        from vanetrust import _kernel as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernel_py

DIGEST_LEN = _impl.DIGEST_LEN

sha256 = _impl.sha256
hash_leaves = _impl.hash_leaves
parent_level = _impl.parent_level
root_from_level = _impl.root_from_level
fold_path = _impl.fold_path


def backend() -> str:
    """Name of the active kernel backend ("compiled" or "python")."""
    return _impl.BACKEND
