"""Block preconditioners and spectral bound validation for double
saddle-point systems arising in mixed discretizations of poroelasticity."""

__version__ = "0.1.0"
