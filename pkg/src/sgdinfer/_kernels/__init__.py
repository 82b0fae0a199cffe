"""Chain inner-loop kernels: compiled extension with a pure-Python twin.

The compiled backend is preferred when its extension module built; setting
SGDINFER_FORCE_PYTHON_KERNELS=1 forces the fallback (used by the benchmark
and the backend-parity tests). Both backends implement the identical
``run_chain_block`` contract and consume identical driver-generated random
streams.
"""

import os

from ._pyloops import MODEL_IDENTITY, MODEL_LINEAR, MODEL_LOGISTIC, MODEL_SOFTMAX

if os.environ.get("SGDINFER_FORCE_PYTHON_KERNELS"):
    from ._pyloops import run_chain_block

    BACKEND = "python"
else:
    try:
        from ._chainloops import run_chain_block

        BACKEND = "cython"
    except ImportError:
        from ._pyloops import run_chain_block

        BACKEND = "python"

__all__ = [
    "BACKEND",
    "MODEL_IDENTITY",
    "MODEL_LINEAR",
    "MODEL_LOGISTIC",
    "MODEL_SOFTMAX",
    "run_chain_block",
]
