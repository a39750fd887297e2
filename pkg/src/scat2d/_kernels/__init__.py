"""Kernel backend selection.

The compiled Cython core is preferred; the numpy fallback keeps the package
fully functional without a C toolchain. `SCAT2D_KERNELS=numpy` forces the
fallback, `SCAT2D_KERNELS=compiled` makes a missing extension a hard error.
"""

import os

from . import pure

_choice = os.environ.get("SCAT2D_KERNELS", "auto")

if _choice == "numpy":
    _impl = pure
elif _choice == "compiled":
    from . import _core as _impl
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND
locate_points = _impl.locate_points
assemble_p1 = _impl.assemble_p1
# the reductions below vectorize well already; they stay in numpy
mass_adjoint = pure.mass_adjoint
stiff_adjoint = pure.stiff_adjoint
