"""
Why project in the time domain
==============================

Optimizing the expansion coefficients directly replaces the projector
B+ B by B^t B. For this basis the nonzero eigenvalues of B^t B span eight
orders of magnitude, so a gradient step barely moves along the weak
directions. Re-expressing the subspace in an orthonormal basis removes the
distortion.
"""

import numpy as np

from pinvcontrol import BasisSpec, OptimizerConfig, OscillatorControlProblem, build_basis, compare_strategies
from pinvcontrol.optimize import ProjectionStrategy

problem = OscillatorControlProblem()
B = build_basis(BasisSpec.standard(N=problem.N))

T = ProjectionStrategy.coeff(B).direction_matrix()
eig = np.linalg.eigvalsh(T)[-12:]
print("eigenvalues of B^t B on the subspace: %.1e ... %.1e" % (eig.min(), eig.max()))

cfg = OptimizerConfig(algorithm="steepest_descent", epsilon=1e-12, max_iters=40)
comparison = compare_strategies(problem, B, cfg)
iterations, objectives = comparison.aligned_objectives()
print(" it      PINV      COEFF      ORTHO")
for i in range(0, iterations.size, 5):
    print("%3d  %.3e  %.3e  %.3e" % (i, objectives["PINV"][i], objectives["COEFF"][i], objectives["ORTHO"][i]))
