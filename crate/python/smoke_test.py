"""Quick end-to-end check of the bvcontrol_py extension."""

import json
import math

import bvcontrol_py as bv


def main():
    mesh = bv.Mesh.uniform(16)
    assert len(mesh) == 16 and abs(mesh.h_max - 1 / 16) < 1e-15

    u = bv.JumpControl(0.5, [(0.25, 1.0), (0.75, -2.0)])
    assert u(0.1) == 0.5 and u(0.5) == 1.5 and u(0.9) == -0.5
    assert abs(u.bv_seminorm() - 3.0) < 1e-15
    back = bv.JumpControl.from_json(u.to_json())
    assert back.l1_distance(u) == 0.0
    avg = u.project(mesh)
    assert len(avg) == 16 and abs(avg[8] - 1.5) < 1e-14

    ex = bv.Example("example1")
    res = ex.solve(128)
    assert res.converged, res.termination
    assert res.kkt_residual < 1e-8
    assert len(res.nodes) == 129 and len(res.y) == 128
    assert max(abs(v) for v in res.phi) <= ex.alpha * (1 + 1e-6)
    print(f"example1 N=128: {res.termination}, objective {res.objective:.6e}, "
          f"{len(res.control.jumps)} jumps")

    report = json.loads(bv.Example("example2").study(levels=(2, 5), reference_level=8))
    assert len(report["records"]) == 4

    rp = bv.ReducedProblem(mesh, ex.yd_cells(mesh), ex.alpha, [4, 8, 12])
    a, c, obj, kkt = rp.solve()
    assert kkt < 1e-8 and math.isfinite(obj)
    assert abs(rp.objective(a, c) - obj) < 1e-12

    assert abs(bv.eoc(1e-2, 2.5e-3, 0.5, 0.25) - 2.0) < 1e-12
    print("smoke test passed")


if __name__ == "__main__":
    main()
