"""Numerical workbench for the linear and nonlinear stability of symmetric
shear flows in a channel (Chebyshev collocation in y, Fourier in x).

Submodules are imported lazily so that ``shearstab.cli`` can pin BLAS
thread counts before numpy loads.
"""

__version__ = "0.1.0"

__all__ = ["profiles", "spectral", "rayleigh", "orr_sommerfeld", "boundary_layer",
           "evolution", "nonlinear", "acceptance", "cli"]


def __getattr__(name):
    if name in __all__:
        import importlib
        return importlib.import_module(f"{__name__}.{name}")
    raise AttributeError(name)
