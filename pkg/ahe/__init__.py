"""
AHE inpainting
==============

Image inpainting by averaging and hypoelliptic evolution. Images are
lifted to a position × orientation space, evolved by a hypoelliptic
diffusion integrated on the Fourier side with Crank–Nicolson, projected
back and combined with neighbourhood averaging heuristics.

The numerical engine lives in :mod:`ahe.services`; :mod:`ahe.main` is the
command-line surface.
"""

__version__ = "1.0.0"
