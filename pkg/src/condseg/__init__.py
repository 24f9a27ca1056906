"""condseg: a desk-scale dense-prediction laboratory.

Two per-pixel classifiers over the same convolutional features: a fixed
("global") 1x1 classifier, and a conditional one whose per-class kernels
are regenerated for every input from that input's own class centers.
Everything trains with a small hand-rolled reverse-mode autodiff core so
each gradient can be checked against a finite-difference oracle.
"""

import os

# Numeric kernels must produce bit-identical results regardless of how many
# threads the host allows, so the BLAS pools are pinned to one thread. The
# env vars only take effect if numpy has not been imported yet; threadpoolctl
# below covers the already-imported case.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ[_var] = "1"
del _var

try:
    import threadpoolctl as _threadpoolctl

    _BLAS_LIMIT = _threadpoolctl.threadpool_limits(limits=1, user_api="blas")
except Exception:  # pragma: no cover - threadpoolctl is optional
    _BLAS_LIMIT = None

__version__ = "0.1.0"
