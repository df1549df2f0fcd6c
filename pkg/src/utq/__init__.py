"""Numerical toolkit for quantized loop space.

Modules
-------
fourier      truncated Fourier loops, the H^1/2 symplectic form and complex structure
circle_maps  circle homeomorphisms (Mobius, flows, zigzag) and the cross-ratio test
composition  the pullback operator T_h and its W+/W- blocks
siegel       the truncated Siegel disc and the fractional-linear action
qcalc        quantum differentials d^q f = [S, M_f]
fock         truncated bosonic Fock space, coherent states and representations
cli          the ``utq`` command line
"""

__version__ = "0.1.0"
