# Distances and kernels on SPD matrices.
#
# Two ways to measure how far apart covariance matrices are, and the
# Log-Euclidean kernels built on top of the log map.

import numpy as np

from aidcov import KernelKind, KernelSpec, airm_dist, exp_sym, gram, kernel_eval, lem_dist, log_spd

rng = np.random.default_rng(0)


def random_spd(n):
    a = rng.normal(size=(n, n))
    return exp_sym(0.5 * (a + a.T))


# Diagonal matrices commute, so both metrics agree on them.
a, b = np.diag([1.0, 2.0]), np.diag([3.0, 4.0])
print("diag pair   AIRM %.6f   LEM %.6f" % (airm_dist(a, b), lem_dist(a, b)))

# For general pairs they differ, but AIRM ignores any congruence W . W^T.
a, b = random_spd(4), random_spd(4)
w = rng.normal(size=(4, 4))
print("random pair AIRM %.6f   LEM %.6f" % (airm_dist(a, b), lem_dist(a, b)))
print("after W.W^T AIRM %.6f   LEM %.6f" % (airm_dist(w @ a @ w.T, w @ b @ w.T), lem_dist(w @ a @ w.T, w @ b @ w.T)))

# log and exp are inverse maps between SPD matrices and symmetric matrices.
print("roundtrip error", np.linalg.norm(exp_sym(log_spd(a)) - a))

# Kernels. The linear one is just tr(log a log b); the others wrap it.
specs = [
    KernelSpec(KernelKind.LOGE_LINEAR),
    KernelSpec(KernelKind.LOGE_POLY),  # (tr log a log b)^2
    KernelSpec(KernelKind.LOGE_EXP, coeffs=(0.0, 0.2)),
    KernelSpec(KernelKind.LOGE_GAUSS, bandwidth=0.5),
]
mats = [random_spd(3) for _ in range(12)]
for spec in specs:
    k = gram(spec, mats)
    w = np.linalg.eigvalsh(k)
    print(f"{spec.kind.value:12s} k(a,b)={kernel_eval(spec, mats[0], mats[1]):9.4f}  "
          f"Gram eig range [{w[0]:.2e}, {w[-1]:.2e}]")
