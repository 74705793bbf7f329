"""Four-dimensional path integrals with quantum fluctuations in time.

Modules
-------
kernels
    Closed-form free kernels and Gaussian packets.
lattice
    Trotter-product lattice used as the numerical oracle.
classical
    Trajectories, actions, gauge changes and the van Vleck kernel.
normalization
    Per-packet kernel normalization.
dipole, schrodinger
    The dipole pulse in the 4D and the Schrödinger treatments.
experiment, cli
    End-to-end harness and its command-line front end.
"""

__version__ = "0.1.0"
