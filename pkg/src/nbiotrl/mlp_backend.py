"""Kernel backend selection.

The value-network math exists twice: a numpy reference (`mlp_numpy`) and a
compiled extension (`_mlpkern`) for the training hot path. Both expose
``forward``, ``loss_and_grads`` and ``train_step`` with identical
semantics. Selection happens once at import:

* ``NBIOTRL_KERNEL=auto`` (default): compiled if importable, else numpy;
* ``NBIOTRL_KERNEL=cython``: compiled, raise if the build is missing;
* ``NBIOTRL_KERNEL=python``: numpy reference, always available.
"""

import os

from . import mlp_numpy
from .errors import ConfigError

_requested = os.environ.get("NBIOTRL_KERNEL", "auto").lower()

if _requested not in ("auto", "cython", "python"):
    raise ConfigError(
        f"NBIOTRL_KERNEL must be auto, cython or python, got {_requested!r}")

if _requested == "python":
    _impl = mlp_numpy
    BACKEND = "python"
else:
    try:
        from . import _mlpkern as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = mlp_numpy
        BACKEND = "python"

forward = _impl.forward
loss_and_grads = _impl.loss_and_grads
train_step = _impl.train_step
init_params = mlp_numpy.init_params
