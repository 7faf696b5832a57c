"""Time-dependent classical and quantum mechanics on fibre bundles over the time axis."""

from . import bundle, hamiltonian, integrate, lagrangian, quantum, symexpr, systemfile

__all__ = ["bundle", "hamiltonian", "integrate", "lagrangian", "quantum", "symexpr", "systemfile"]
__version__ = "0.1.0"
