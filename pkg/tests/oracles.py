"""Independent reference implementations shared by the tests."""

import numpy as np


def naive_pair(system, clf, x):
    """a and b by explicit loops over one state at a time."""
    a = np.empty(len(x))
    b = np.empty((len(x), system.k))
    for s, xs in enumerate(x):
        grad = clf.gradient(xs)
        hess = clf.hessian(xs)
        f = system.drift(xs)
        g = system.input(xs)
        sig = system.diffusion(xs, np.zeros(system.k))
        total = 0.0
        for i in range(system.n):
            total += f[i] * grad[i]
        for i in range(system.n):
            for j in range(system.n):
                c_ij = 0.0
                for l in range(system.k_w):
                    c_ij += sig[i, l] * sig[j, l]
                total += 0.5 * c_ij * hess[i, j]
        a[s] = total
        for j in range(system.k):
            acc = 0.0
            for i in range(system.n):
                acc += g[i, j] * grad[i]
            b[s, j] = acc
    return a, b


def rel(x, ref):
    x, ref = np.asarray(x), np.asarray(ref)
    return np.max(np.abs(x - ref) / np.maximum(np.abs(ref), 1e-300))


def trolley_pieces(z):
    z1, z2, z3 = z[:, 0], z[:, 1], z[:, 2]
    r = z1**2 + z2**2
    s = z3**2 / 2
    p = (r / 2) ** (1 + s)
    L = np.log(r / 2)
    return z1, z2, z3, r, s, p, L


# three candidate closed forms for the trolley b1; only the second one is
# consistent with the analytic gradient of V
def closed_form_b1_second(z):
    z1, z2, z3, r, s, p, L = trolley_pieces(z)
    return -z1 * (z3**2 + 1) + 4 * p * (1 + s) * z1 / r + z2 * (2 - r * z3 + 2 * p * z3 * L)


def closed_form_b1_first(z):
    z1, z2, z3, r, s, p, L = trolley_pieces(z)
    return -z1 * (z3**2 + 1) + 4 * p * (1 + s) * z1 / r + z2 * (2 - r * z3)


def closed_form_b1_literal_sum(z):
    z1, z2, z3, r, s, p, L = trolley_pieces(z)
    return closed_form_b1_first(z) + z2 * (2 - r * z3 + 2 * p * z3 * L)


def closed_form_b2(z):
    z1, z2, z3, r, s, p, L = trolley_pieces(z)
    return -z2 * (z3**2 + 1) + 4 * p * (1 + s) * z2 / r


def rk4(f, x, t_final, dt):
    for _ in range(int(round(t_final / dt))):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x
