"""
Screw axes, glides and a twisted circle of charts
=================================================

A screw rotation squares to a lattice translation, so no choice of origin
removes its fractional translation.  The same obstruction shows up as a
bundle with no equilibrium section.
"""

from fractions import Fraction

from crystorus import bundle as bd
from crystorus import crystal as cr

###############################################################################
# The two-fold screw along z
# --------------------------

Z3 = cr.Lattice.cubic(3)
screw = ((-1, 0, 0), (0, -1, 0), (0, 0, 1))
sg = cr.build_space_group(Z3, [(screw, (0, 0, Fraction(1, 2)))])

print("order:", sg.order)
print("c(s, s) =", cr.cocycle(sg, 1, 1))
print("symmorphic:", cr.is_symmorphic(sg).symmorphic)

###############################################################################
# Dropping the half translation gives the symmorphic twin.  Moving the origin
# changes the translation parts but never the verdict.

twin = cr.symmorphic_space_group(Z3, [screw])
moved = cr.shift_representatives(twin, origin=(Fraction(1, 4), Fraction(1, 3), 0))
verdict = cr.is_symmorphic(moved)
print("shifted twin:", cr.TorusPoint(moved.translation(1)), "witness", cr.TorusPoint(verdict.origin_shift))

###############################################################################
# A circle of three charts
# ------------------------
#
# Glue three intervals into a circle; the last overlap carries the screw.
# Going around once applies it, and a screw has no fixed point on the torus.

base = bd.BaseComplex(3, [(0, 1), (1, 2), (2, 0)])
b = bd.FlatBundle(base, sg, {(0, 1): 0, (1, 2): 0, (2, 0): 1})
for loop in bd.loop_basis(base):
    print("holonomy:", bd.holonomy(b, loop))
print("equilibrium sections:", bd.equilibrium_sections(b).describe())

###############################################################################
# Replacing the screw by the plain rotation leaves a circle of fixed points
# along the axis.

b0 = bd.FlatBundle(base, twin, {(0, 1): 0, (1, 2): 0, (2, 0): 1})
print("with the rotation:", bd.equilibrium_sections(b0).describe())

###############################################################################
# The one-dimensional reflection gives the two fixed points 0 and 1/2.

refl = cr.symmorphic_space_group(cr.Lattice.cubic(1), [((-1,),)])
mob = bd.FlatBundle(base, refl, {(0, 1): 0, (1, 2): 0, (2, 0): 1})
print("Mobius:", bd.equilibrium_sections(mob).describe())
