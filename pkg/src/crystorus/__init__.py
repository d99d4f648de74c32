"""Crystallographic groups, flat torus bundles and acoustic phonons.

Submodules
----------
exactalg
    Smith normal form and linear congruences over Z, exact.
crystal
    Lattices, point groups, space-group cocycles, symmorphicity.
bundle
    Flat torus bundles on chart complexes: holonomy, fixed points, gluing.
phonon
    Elastic tensors, Christoffel matrices, dispersion and a 1-D wave solver.
config, fixtures, cli
    TOML configuration, built-in examples and the command line tool.
"""

from . import bundle, crystal, exactalg, phonon
from .bundle import FlatBundle, equilibrium_sections, holonomy
from .crystal import Lattice, SpaceGroup, build_space_group, cocycle, is_symmorphic
from .exactalg import smith_normal_form, solve_mod_lattice
from .phonon import CubicModuli, DensityMatrix, ElasticTensor, IsotropicModuli, dispersion

__version__ = "0.1.0"

__all__ = [
    "CubicModuli",
    "DensityMatrix",
    "ElasticTensor",
    "FlatBundle",
    "IsotropicModuli",
    "Lattice",
    "SpaceGroup",
    "build_space_group",
    "bundle",
    "cocycle",
    "crystal",
    "dispersion",
    "equilibrium_sections",
    "exactalg",
    "holonomy",
    "is_symmorphic",
    "phonon",
    "smith_normal_form",
    "solve_mod_lattice",
]
