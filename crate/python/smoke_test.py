"""Smoke test for the tribvp extension module.

Build and install first:
    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml
"""

import math

import tribvp


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    assert tribvp.presets() == ["example31", "example32", "bounded_demo"]

    k = tribvp.GreenKernel(2 / 3)
    close(k.psi_star_norm, 10 / 81, 1e-14)
    close(k.b0, 1 / 3, 1e-14)
    close(k.value(0.2, 0.5), 0.2 * 0.5 - 0.02, 1e-15)
    assert k.dt(2 / 3, 0.9) == 0.0
    assert k.check(101)["pass"]
    try:
        tribvp.GreenKernel(0.4)
    except ValueError:
        pass
    else:
        raise AssertionError("eta = 0.4 accepted")

    e = tribvp.Expr("t*x^2 + sin(pi*t)")
    close(e.eval(0.5, 3.0), 5.5, 1e-15)
    assert e.free_vars == ["t", "x"]

    p = tribvp.Problem.preset("example31")
    close(p.eta, 2 / 3, 0.0)
    assert p.spec["M"] == 1

    shell = tribvp.constants(p)["shell"]
    assert 0 < shell["r_prime"] < 1 < shell["R"]
    assert shell["lambda"] < shell["lambda_bar"]

    report = tribvp.solve(p)
    assert report["status"] == "two_solutions", report["error"]
    small, large = report["small"], report["large"]
    assert small["norm_inf"] < 1 < large["norm_inf"]
    assert small["passed"] and large["passed"]
    assert all(v > 0 for v in small["values"])

    xs = tribvp.nodes(p.eta)
    assert xs == small["nodes"]
    cert = tribvp.certify(p, report["lambda"], large["values"])
    assert cert["passed"]

    demo = tribvp.Problem.preset("bounded_demo")
    constants = tribvp.constants(demo)
    assert constants["theorem_A_bound"] == 1.0
    assert constants["shell"] is None

    lb = tribvp.lambda_bar(tribvp.Problem.example32())
    rows = tribvp.sweep(tribvp.Problem.example32(), [lb / 4, 10 * lb])
    assert [r["outcome"] for r in rows][0] == "two_solutions"
    assert rows[1]["outcome"] != "two_solutions"
    assert not math.isnan(rows[0]["norm_large"])

    text = '[problem]\npreset = "example32"\n[solver]\nmesh_n = 512\n'
    assert tribvp.run_toml(text, "solve")["certified"]

    print("python smoke test passed")


if __name__ == "__main__":
    main()
