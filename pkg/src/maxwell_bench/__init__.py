"""Edge-element Maxwell scattering benchmark: assembly, Krylov solvers, preconditioners."""

__version__ = "0.1.0"
