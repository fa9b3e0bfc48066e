"""Pin BLAS to one thread before numpy loads: the determinism guarantees
are stated for single-threaded execution, and thread pools only add overhead
at these tensor sizes."""

import os

for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(var, "1")
