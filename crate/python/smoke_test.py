"""Smoke test for the pysteadyscan extension: run after installing it with
`pip install ./crates/python` (or `maturin develop -m crates/python/Cargo.toml`)."""

import math

import pysteadyscan as ss


def main():
    pre = ss.Model.load("pre_revision")
    assert pre.contract() is None
    sets = pre.explain()
    assert any("tfr1_stabilization" in s for s in sets), sets

    iron = ss.Model.load("iron_v2")
    assert len(iron.states) == 15
    box = iron.contract()
    assert box is not None and box["dp_Ft"][0] >= 3.8e-6

    sols = iron.sample(seed=7, target=20, jobs=2)
    assert len(sols) == 20
    again = iron.sample(seed=7, target=20, jobs=1)
    assert sols == again, "same seed must reproduce the same solutions"
    s = sols[0]
    assert math.isclose(s["Ft_f_eq"] + s["Ft_b_eq"], s["p_Ft"] / s["dr_Ft"], rel_tol=1e-9)

    r = iron.cutoff_response(s)
    assert r["stability"] == "stable", r["stability"]
    assert r["satisfied"] and r["robustness"] > 0
    assert len(r["times"]) == len(r["signals"]["Fe"])

    rho = ss.robustness("eventually[0, 2] (x > 0.5)", [0.0, 1.0, 2.0], {"x": [0.0, 1.0, 0.0]})
    assert math.isclose(rho, 0.5)
    print("smoke test passed: %d solutions, robustness %.3g" % (len(sols), r["robustness"]))


if __name__ == "__main__":
    main()
