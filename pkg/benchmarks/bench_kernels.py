"""Timing comparison of the numpy and numba kernel backends.

Runs each hot kernel on study-sized inputs (S=500 sites, tau=5 visits,
the shapes the simulation studies hammer) and prints per-call times for
both implementations. Usage:

    python3 benchmarks/bench_kernels.py [--sites N] [--visits T] [--repeat K]
"""

import argparse
import time

import numpy as np

from occufit.kernels import numpy_impl


def build_inputs(n_sites, n_visits, seed=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n_sites), rng.normal(size=n_sites)])
    U = np.stack(
        [
            np.ones((n_sites, n_visits)),
            np.repeat(rng.normal(size=n_sites)[:, None], n_visits, axis=1),
            rng.normal(size=(n_sites, n_visits)),
        ],
        axis=2,
    )
    alpha = np.array([1.0, 1.0])
    beta = np.array([-1.5, -0.5, -0.5])
    psi = numpy_impl.logistic(X @ alpha)
    p = numpy_impl.detection_probs(U, beta)
    theta = numpy_impl.theta_rows(p)
    z = rng.uniform(size=n_sites) < psi
    y = (z[:, None] & (rng.uniform(size=(n_sites, n_visits)) < p)).astype(np.float64)
    w = (y.sum(axis=1) > 0).astype(np.float64)
    offs = np.log(np.clip(theta, 1e-12, None))
    return dict(y=y, w=w, X=X, U=U, alpha=alpha, beta=beta, p=p, theta=theta,
                psi=psi, offs=offs)


def calls(d):
    """(name, zero-argument callable) pairs, closed over the inputs."""
    return [
        ("cond_loglik", lambda m: m.cond_loglik(d["y"], d["w"], d["U"], d["beta"])),
        ("cond_loglik_grad_hess",
         lambda m: m.cond_loglik_grad_hess(d["y"], d["w"], d["U"], d["beta"])),
        ("partial_loglik",
         lambda m: m.partial_loglik(d["w"], d["X"], d["theta"], d["alpha"])),
        ("partial_score_info",
         lambda m: m.partial_score_info(d["w"], d["X"], d["theta"], d["alpha"])),
        ("iwls_system", lambda m: m.iwls_system(d["w"], d["X"], d["theta"], d["alpha"])),
        ("cross_term",
         lambda m: m.cross_term(d["w"], d["X"], d["U"], d["p"], d["theta"], d["psi"])),
        ("full_loglik",
         lambda m: m.full_loglik(d["y"], d["w"], d["X"], d["U"], d["alpha"], d["beta"])),
        ("full_loglik_grad",
         lambda m: m.full_loglik_grad(d["y"], d["w"], d["X"], d["U"], d["alpha"], d["beta"])),
        ("offset_loglik_grad_hess",
         lambda m: m.offset_loglik_grad_hess(d["w"], d["X"], d["offs"], d["alpha"])),
    ]


def time_call(fn, module, repeat):
    fn(module)  # warm up (numba compiles here)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(module)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sites", type=int, default=500)
    ap.add_argument("--visits", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    try:
        from occufit.kernels import numba_impl
    except ImportError:
        numba_impl = None

    d = build_inputs(args.sites, args.visits)
    print(f"S={args.sites} sites, tau={args.visits} visits, "
          f"best of {args.repeat} calls\n")
    header = f"{'kernel':<26} {'numpy':>12} {'numba':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, fn in calls(d):
        t_np = time_call(fn, numpy_impl, args.repeat)
        if numba_impl is None:
            print(f"{name:<26} {t_np * 1e6:>10.1f}us {'n/a':>12} {'n/a':>9}")
            continue
        t_nb = time_call(fn, numba_impl, args.repeat)
        print(f"{name:<26} {t_np * 1e6:>10.1f}us {t_nb * 1e6:>10.1f}us "
              f"{t_np / t_nb:>8.1f}x")
    if numba_impl is None:
        print("\nnumba is not importable; only the numpy backend was timed.")


if __name__ == "__main__":
    main()
