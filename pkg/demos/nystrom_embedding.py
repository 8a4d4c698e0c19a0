# Nystrom embedding of SPD matrices.
#
# A handful of landmark matrices define a D-dimensional feature map whose
# inner products approximate the kernel. With D = M the landmarks are
# reproduced exactly; below that the error is the discarded eigenvalue tail.

import numpy as np

from aidcov import KernelKind, KernelSpec, exp_sym, gram, nystrom_batch_embed, nystrom_fit

rng = np.random.default_rng(1)


def random_spd(n, spread=0.5):
    a = rng.normal(size=(n, n)) * spread
    return exp_sym(0.5 * (a + a.T))


spec = KernelSpec(KernelKind.LOGE_GAUSS, bandwidth=0.3)
landmarks = [random_spd(5) for _ in range(20)]
probes = [random_spd(5) for _ in range(10)]
k_land = gram(spec, landmarks)
k_probe = gram(spec, probes)
tail = np.sort(np.linalg.eigvalsh(k_land))[::-1]

print("  D   landmark err   tail norm   probe err (mean abs)")
for d in (1, 2, 4, 8, 12, 16, 20):
    model = nystrom_fit(landmarks, spec, d)
    z = model.landmark_features()
    zp = nystrom_batch_embed(model, probes)
    print(f"{d:3d}   {np.linalg.norm(z.T @ z - k_land):12.3e}   {np.linalg.norm(tail[d:]):9.3e}"
          f"   {np.mean(np.abs(zp.T @ zp - k_probe)):9.3e}")

# The embedding of a Gaussian-kernel point never exceeds unit norm: it is a
# projection of a unit vector in feature space.
norms = np.sum(nystrom_batch_embed(nystrom_fit(landmarks, spec, 20), probes) ** 2, axis=0)
print("largest squared norm of a probe embedding:", norms.max())
