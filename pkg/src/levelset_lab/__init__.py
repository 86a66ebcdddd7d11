"""Spectral simulation and fractal analysis of level sets on the 2-D torus.

Subpackages:

- ``spectral``  : Fourier-lattice state, transforms, spectral operators
- ``noise``     : power-law forcing spectrum and reproducible increments
- ``linear``    : exactly solvable linear (Ornstein-Uhlenbeck) field
- ``galerkin``  : truncated nonlinear solver with exponential time stepping
- ``fractal``   : level-set extraction, box counting, dimension estimation
- ``synthetic`` : calibration sets of known dimension
- ``harness``   : experiment configs, manifests, replica orchestration
- ``cli``       : command-line entry points
"""

__version__ = "0.1.0"
