"""
Exact class evolution on the blow-up of the plane
==================================================

The class of the evolving metric moves on a straight line in H^{1,1}.  On
the blow-up of P^2 at one point every Kähler class is β(H-E) + γH, and the
line runs until the class leaves the Kähler cone.  Which wall it hits decides
what the flow does there.
"""
from fractions import Fraction

from krflow.classflow import class_at, class_path, classify_singularity, mmp_run, volume_polynomial
from krflow.lattice import blowup_class, blowup_p2, pair

g = blowup_p2()
print("pairing", g.to_json()["pairing"], "canonical", g.canonical_class)

# three starting classes, three different behaviours
for beta0, gamma0 in [(1, 3), (2, 2), (1, 2)]:
    path = class_path(g, blowup_class(beta0, gamma0))
    report = classify_singularity(g, path)
    q = volume_polynomial(g, path)
    print(f"(β0, γ0) = ({beta0}, {gamma0}): {report.kind} at T = {report.T.value}, "
          f"volume {q[0]} + {q[1]}t + {q[2]}t², order {report.vanishing_order()}")

# the class at an intermediate time stays Kähler
path = class_path(g, blowup_class(1, 3))
alpha = class_at(path, Fraction(1, 2))
print("class at t=1/2:", alpha, "self-intersection", pair(g, alpha, alpha))

# continue past a contraction on the blown-down surface
trace = mmp_run(g, blowup_class(1, 3))
for step in trace.steps:
    print(f"rank {step.geometry.rank}: {step.event} after {step.report.T.value}, "
          f"total time {step.cumulative.value}")
