"""Compare the closed form moments (xi = 0) with quadrature and simulation."""
import numpy as np

from spegarch import ModelParams, closed_moments_theta_only, general_moments_quadrature, simulate
from spegarch.networks import grid_contiguity

p = ModelParams(alpha=0.1, rho0=0.3, rho1=0.3, lambda0=0.2, lambda1=0.3, theta=0.4, xi=0.0)
w = grid_contiguity(2, 2, "rook")

closed = closed_moments_theta_only(p, w, w, i=0, j=1)
quad = general_moments_quadrature(p, w, w, i=0, order="second")
print("closed form:", closed)
print("quadrature E Y^2:", quad.value, "with", quad.terms, "product terms")

# xi = 1 has no closed form; compare quadrature against a long simulation
p1 = ModelParams(alpha=0.1, rho0=0.3, rho1=0.3, lambda0=0.2, lambda1=0.3, theta=0.4)
q1 = general_moments_quadrature(p1, w, w, i=0, order="second").value
y = simulate(p1, w, w, t_len=200_000, seed=0).y.values
print(f"xi=1  quadrature {q1:.4f}  simulated {np.mean(y[0] ** 2):.4f}")
