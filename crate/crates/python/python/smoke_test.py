"""Smoke test for the Python bindings: build with `maturin develop` first."""

import math

import elastmix_py as em


def main():
    grid = em.TensorGrid.unit(2, 2)
    material = em.LameParams(0.5, 1.0)
    system = em.assemble(grid, material)
    assert (system.stress_len, system.disp_len, len(system)) == (29, 16, 45)

    load = system.manufactured_load("sine")
    out = em.solve(system, load)
    assert out["relative_residual"] <= 1e-11
    x = out["sigma"] + out["u"]
    kx = system.apply(x)
    residual = math.sqrt(sum(v * v for v in kx[: system.stress_len]))
    residual += math.sqrt(sum((a - b) ** 2 for a, b in zip(kx[system.stress_len:], load)))
    assert residual <= 1e-10 * math.sqrt(sum(v * v for v in load))

    rows, cols, vals = system.triplets()
    assert len(rows) == len(cols) == len(vals) > 0

    hs = [0.5, 0.25, 0.125]
    assert abs(em.fit_rate(hs, [2.0 * h**1.5 for h in hs]) - 1.5) < 1e-12

    beta = em.infsup_probe(grid)
    alpha = em.kernel_ellipticity_probe(grid, material)
    assert beta > 0.05 and alpha >= 1.0 / 3.0 - 1e-10

    study = em.run_study(2, [4, 8, 16])
    assert 0.85 <= study["rates"]["err_sigma_hdiv"] <= 1.3
    assert study["rates"]["super_sigma_hdiv"] >= 1.4

    try:
        em.TensorGrid.unit(2, 0)
    except ValueError:
        pass
    else:
        raise AssertionError("zero subdivisions accepted")

    print(f"smoke test ok: beta_h={beta:.4f}, rates={study['rates']['err_sigma_hdiv']:.3f}/"
          f"{study['rates']['super_sigma_hdiv']:.3f}")


if __name__ == "__main__":
    main()
