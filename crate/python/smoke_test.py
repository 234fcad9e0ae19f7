"""Smoke test for the nlfem_py extension.

Build and install it first:

    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml

then run `python python/smoke_test.py`.
"""

import math

import nlfem_py as nl


def main():
    mesh = nl.Mesh.generate(2, 10, 0.2)
    assert mesh.dim == 2
    assert mesh.interior_count() == 200
    h_avg, h_min = mesh.edge_stats()
    assert 0 < h_min <= h_avg

    cmap = mesh.to_cmap()
    assert cmap.validate() == []
    assert cmap.dart_count == 3 * len(mesh.cells)
    assert len(cmap.neighbors(0)) in (1, 2, 3)
    assert cmap.orbit(0, 2) == [0, 1, 2]

    t = cmap.locate([0.5, 0.5])
    assert t is not None
    vol = cmap.ball_volume([0.5, 0.5], 0.2, "nocaps")
    assert 0.9 * math.pi * 0.04 < vol <= math.pi * 0.04 + 1e-12

    problem = nl.Problem.poly2d(0.2)
    x = [0.3, 0.6]
    assert abs(problem.f(x) + 0.04 * 1.6) < 1e-12
    assert abs(problem.u(x) - (0.09 * 0.6 + 0.36)) < 1e-12

    system = nl.assemble(cmap, problem, "nocaps", threads=2)
    assert system.max_asymmetry() == 0.0
    rows, cols, vals = system.triplets()
    assert len(rows) == len(cols) == len(vals) > system.dof
    u, iterations, residual = system.solve()
    assert residual < 1e-9 and iterations < 5 * math.sqrt(system.dof)

    out = nl.solve(cmap, problem, "nocaps")
    assert out["l2_error"] < 1e-2, out["l2_error"]

    rows, order = nl.convergence(2, "nocaps", [0.1, 0.05], "fixed:0.2")
    assert len(rows) == 2 and rows[1]["lambda"] is not None
    assert order > 1.5, order

    rows, order = nl.geoerr(2, "overlap", 0.2, [0.05, 0.025], mc=20000)
    assert rows[1][1] < rows[0][1]

    try:
        nl.Mesh.generate(4, 4, 0.2)
    except ValueError as e:
        assert "dimension" in str(e)
    else:
        raise AssertionError("4D mesh accepted")

    assert set(nl.STRATEGIES) == {"inside", "overlap", "barycenter", "nocaps", "approxcaps", "fullcaps"}
    print("smoke test passed")


if __name__ == "__main__":
    main()
