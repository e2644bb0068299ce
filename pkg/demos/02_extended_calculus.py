"""
Calculus with jumps and Dirac masses
====================================

Piecewise-polynomial functions with breakpoints, the mean-value product
rule, Volpert's jump ratio for compositions, and shift variations that
move a discontinuity.
"""

import numpy as np

from adjeuler.calculus import (PiecewiseFunction1D as PF, extended_chain_variation,
                               extended_product_variation, heaviside_variation, jump,
                               mean_value, shift_variation_apply, volpert_ratio)

# a shock from 1 to 3 at x = 0
rho = PF.heaviside(0.0, 1.0, 3.0)
print("mean", mean_value(rho, 0.0), "jump", jump(rho, 0.0))

# the derivative of a product carries the Dirac mass of the product's jump
u = PF((0.0,), ([2.0, 1.0], [0.5]))
d = (rho * u).derivative()
print("d(rho u) Dirac weight:", d.dirac_at(0.0), "= [rho u] =", jump(rho * u, 0.0))
rule = rho.derivative() * u + rho * u.derivative()
print("mean-value product rule gives", rule.dirac_at(0.0))

# Volpert: f'(rho) at a jump is replaced by [f(rho)]/[rho]
f = lambda r: 0.5 * r * r  # noqa: E731
print("[f]/[rho] =", volpert_ratio(f, 1.0, 3.0), "(mean of rho is 2)")

# varying the shock position by s: the variation is a Dirac mass -s [rho]
s = 0.25
drho = heaviside_variation(0.0, 0.0, 0.0, 1.0, 3.0, s)
print("delta rho Dirac weight", drho.dirac_at(0.0))
dF = extended_chain_variation(f, rho, drho, df=lambda r: r)
print("delta f(rho) Dirac weight", dF.dirac_at(0.0), "= -s [f] =", -s * (f(3.0) - f(1.0)))
print("product variation", extended_product_variation(rho, PF.constant(1.0), drho,
                                                      PF.constant(0.0)).dirac_at(0.0))

# the same shift written as a narrow box: same integral, no Dirac mass
box = shift_variation_apply(rho, {0.0: 0.05})
x = np.array([-0.01, 0.02, 0.06])
print("box values", box(x), "integral", box.integral(-1, 1))
