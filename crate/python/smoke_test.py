"""Quick end-to-end check of the Python bindings.

Build first:  maturin develop -m crates/python/Cargo.toml
"""

import math

import pyoptoent as oe


def main():
    params = oe.Params.reference_setup()
    params.validate()

    plus, minus = oe.mode_pair(params)
    assert plus.label == "common" and minus.label == "differential"
    assert plus.quality > minus.quality

    v = oe.conditional_covariance(minus)
    u = oe.lyapunov_covariance(minus)
    assert v[0] * v[2] - v[1] ** 2 >= 1.0 - 1e-9
    assert u[0] > v[0]

    point = oe.evaluate_point(params)
    eps = oe.epsilon_cr(params)
    assert math.isclose(point["epsilon_cr"], eps, rel_tol=1e-9)
    assert math.isclose(oe.epsilon_cr_closed_form(params), eps, rel_tol=1e-9)

    ground = oe.wigner_ellipse((1.0, 0.0, 1.0), points=16)
    assert all(abs(math.hypot(q, p) - 1.0) < 1e-12 for q, p in ground)

    cells = oe.figure("fig2", resolution=4)
    assert len(cells) == 16 and "epsilon_cr" in cells[0]

    small = oe.Mode(10.0, 5.0, 1.0, 0.2, 1.0)
    mc = oe.simulate_ensemble(small, n_traj=200, collect_relaxations=20.0, seed=1)
    assert all(math.isfinite(x) for x in mc["covariance"])

    params.eta = 2.0
    try:
        params.validate()
    except ValueError:
        pass
    else:
        raise AssertionError("efficiency above one accepted")

    print(f"ok: epsilon_cr = {eps:.5f}, Q+ = {plus.quality:.0f}, Q- = {minus.quality:.0f}")


if __name__ == "__main__":
    main()
