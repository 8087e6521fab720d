"""
Level repulsion in small antitrees
==================================

Nearest-neighbour gaps of the GOE endpoint matrices follow the Wigner
surmise, far from the exponential gaps of independent levels. At desk
scale the antitree spectrum near an elliptic energy already moves from
Poisson-like towards that reference as the graph grows.
"""
import numpy as np

from antitree.disorder import DisorderSpec
from antitree.experiments import goe_reference_gaps, pipeline_gaps
from antitree.pointstats import gap_density_at_zero, ks_distance, pooled_gaps

ref = pooled_gaps(goe_reference_gaps(400, 50, seed=11))
print(f"GOE reference: {ref.size} gaps, KS to surmise {ks_distance(ref, 'wigner_surmise_beta1'):.4f}, "
      f"KS to Exp(1) {ks_distance(ref, 'poisson_exp'):.4f}")

# lam = 1 + sqrt(2) gives h = 2, so with w = 2 the effective energy is 0
spec = DisorderSpec("two_point_symmetric", sigma=1.0)
lam, w = 1 + np.sqrt(2), 2.0
seeds = range(100)  # the acceptance test uses 400
for n, r, m in [(20, 3, 2), (30, 4, 4)]:
    gaps, info = pipeline_gaps(spec, lam, w, n, r, m, seeds, 12.0, 0.3)
    g = pooled_gaps(gaps)
    print(f"(n, r, m) = ({n}, {r}, {m}), {info['dimension']} sites: {g.size} gaps, "
          f"KS(GOE) {ks_distance(g, ref):.3f}, KS(Exp) {ks_distance(g, 'poisson_exp'):.3f}, "
          f"density at 0 {gap_density_at_zero(g):.3f}")
