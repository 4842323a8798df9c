"""Smoke test for the Python bindings. Run after `pip install -e crates/python`."""

import math
from pathlib import Path

import bergmann2d as b

CONFIGS = Path(__file__).resolve().parent.parent / "crates" / "cli" / "configs"


def check(name, ok, detail=""):
    print(f"{name}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def main():
    results = []

    vac = b.Medium.vacuum("TE")
    smooth, dirac = b.amplitude(vac, 0.3, -40.0, order=2)
    results.append(check("vacuum", all(f == 0 for _, f in smooth + dirac), f"{len(smooth)} smooth, {len(dirac)} dirac"))

    g = b.Grating()
    k = 2.5
    t = g.tau(1, 0, "-", k) + 0j
    t2 = g.tau(2, 0, "-", k)
    results.append(check("brewster tau0-", abs(t.real - 7.48) < 5e-3 and abs(t2.imag - 11.15) < 5e-3, f"{t} {t2}"))
    results.append(check("brewster kappa0", abs(g.brewster()["kappa0"] * 0.1 - 0.16033) < 5e-5))

    med = b.Medium.load(CONFIGS / "gaussian_medium.json")
    thetas = [-60.0, 0.0, 45.0, 120.0, 200.0]
    lf, _ = b.amplitude(med, 0.1, 30.0, thetas, order=2)
    dy, _ = b.oracle_amplitude(med, 0.1, 30.0, thetas, order=2, nodes=24)
    peak = max(abs(f) for _, f in lf)
    diff = max(abs(a - c) for (_, a), (_, c) in zip(lf, dy))
    results.append(check("oracle agreement", diff < 1e-6 * peak, f"{diff / peak:.2e}"))

    cols = b.gaussian_exp_design(0.4, 3.0, 5.0, 1.0, 1 / 3, [-5.0, 0.0, 5.0])
    rho = b.gaussian_exp_real_part(0.4, 3.0, 1.0, 1 / 3)
    results.append(check(
        "cloak design",
        all(abs(c["eps_minus"].real - rho) < 1e-9 and c["eps_plus"].imag < 0 < c["eps_minus"].imag for c in cols)
        and abs(rho - 0.8736) < 5e-5,
        f"rho={rho:.5f}",
    ))

    try:
        b.Grating(z0=3 + 0.5j).brewster()
        results.append(check("error mapping", False))
    except b.BergmannError as e:
        results.append(check("error mapping", e.kind == "NonRealZ0", e.kind))

    if not all(results):
        raise SystemExit(1)
    print(f"{len(results)} checks pass")


if __name__ == "__main__":
    main()
