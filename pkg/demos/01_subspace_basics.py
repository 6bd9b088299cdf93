"""
Projecting controls onto a waveform subspace
============================================

Build the 12-waveform basis, look at its conditioning, and check that the
pseudoinverse projector behaves like an orthogonal projector even though the
waveforms themselves are far from orthogonal.
"""

import numpy as np

from pinvcontrol import BasisSpec, build_basis, gram_condition, pinv, projector
from pinvcontrol.subspace import coefficients, orthonormal_basis, synthesize

spec = BasisSpec.standard(N=1500)
B = build_basis(spec)
print("basis shape:", B.shape)

# four sines, four cosines and four enveloped monomials; the monomials are
# nearly parallel, which is what makes B B^t badly conditioned
print("cond(B B^t) = %.3e" % gram_condition(B))
print("singular values squared:", np.round(np.linalg.svd(B, compute_uv=False) ** 2, 10))

P = projector(B)
M = P.matrix
print("||P P - P|| = %.2e" % np.linalg.norm(M @ M - M))
print("||P - P^t|| = %.2e" % np.linalg.norm(M - M.T))
print("trace(P) = %.6f (rank %d)" % (np.trace(M), P.rank))

# an arbitrary signal: its projection is what synthesizing the
# minimum-norm coefficients gives back
rng = np.random.default_rng(0)
u = rng.standard_normal(spec.grid.N)
Bp = pinv(B)
c = coefficients(Bp, u)
print("round-trip error: %.2e" % np.abs(synthesize(Bp, c) - P.apply(u)).max())
print("fraction of ||u|| kept: %.3f" % (np.linalg.norm(P.apply(u)) / np.linalg.norm(u)))

# an orthonormal basis of the same subspace, from the SVD
V = orthonormal_basis(B)
print("V V^t vs P: %.2e" % np.linalg.norm(V.T @ V - M))
