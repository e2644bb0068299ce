"""
Ground pressure functional and shape gradients
==============================================

A wedge hangs from the upper wall; J measures the pressure signature on
the ground. On the ground the adjoint's third component follows the
pressure perturbation. Two shape gradients are compared with a re-solve
after a small wall displacement: the boundary formula and the discrete
gradient obtained by differentiating the residual in the wall coordinates.
"""

import numpy as np

from adjeuler import adjoint as ad
from adjeuler.mesh import body_vertices, generate_wedge_channel
from adjeuler.solver import SolverConfig, solve_steady

cfg = SolverConfig(muscl=False, jacobian="exact", cfl=5, convergence_tol=1e-12)
mesh = generate_wedge_channel(h=0.04, length=3.5, wedge_start=0.2, wedge_end=0.6, wedge_angle=5,
                              profile="arc", wall="top", bottom_tag="ground")
W = solve_steady(mesh, cfg).field
fn = ad.Functional("ground_pressure_target")
lam = ad.solve_adjoint(W, mesh, fn, cfg).field
J0 = ad.functional_value(W, mesh, fn, cfg)

rep = ad.ground_adjoint_check(lam, W, mesh, fn, cfg, sign=-1.0)
print(f"ground: correlation {rep.correlation():.4f}, max rel error {rep.max_rel_smooth:.1%}")

body = body_vertices(mesh)
sg = ad.shape_gradient(lam, W, mesh, 1.0, cfg, wall_vertices=body)
d = ad.discrete_shape_gradient(lam, W, mesh, cfg, sg.vertices, sg.normals, fn)
d[[0, -1]] = 0.0


def trial(alpha, pred, label):
    m2 = ad.displace_wall(mesh, sg.vertices, sg.normals, alpha)
    dJ = ad.functional_value(solve_steady(m2, cfg, W0=W).field, m2, fn, cfg) - J0
    print(f"{label}: predicted {pred:+.3e}  actual {dJ:+.3e}")


a1 = -1e-4 * sg.density / np.abs(sg.density).max()
trial(a1, float(np.sum(sg.weights * sg.density * a1)), "boundary formula")
a2 = -1e-4 * d / np.abs(d).max()
trial(a2, float(d @ a2), "discrete gradient")
