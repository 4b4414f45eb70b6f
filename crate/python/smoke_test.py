"""Smoke test for the pyfockfilter extension.

Build and install first:

    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/pyfockfilter-*.whl
"""

import math

import pyfockfilter as ff


def close(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


def main():
    dist = ff.hom_distribution(2, 0)
    assert close(dist[2], 0.5) and close(dist[-2], 0.5) and close(dist[0], 0.0), dist

    dist = ff.hom_distribution(200, 0)
    assert abs(ff.threshold_probability(dist, 30) - 0.905) < 5e-4

    amps = ff.bs_transform(1, 1)
    assert close(abs(amps[(2, 0)]), math.sqrt(0.5))

    state = ff.TwoModeState.uniform_fixed_sum(200)
    settings = ff.FilterSettings(0.1, condition="adt >= 120")
    p_outcome, p_pass = ff.shutter_probability(state, settings, 20, 20)
    assert p_outcome > 0
    assert abs((1 - p_pass) - 0.982) < 1e-3

    prob, conditioned = ff.conditional_state(ff.TwoModeState.fock(3, 3), ff.FilterSettings(0.1), 2, 0)
    assert prob > 0 and close(conditioned.norm_sqr(), 1.0, 1e-10)
    assert all(n + m == 4 for (n, m) in conditioned.amplitudes())

    assert ff.conditional_state(ff.TwoModeState.fock(1, 0), ff.FilterSettings(0.1), 2, 0) is None

    small = ff.TwoModeState.uniform_fixed_sum(6)
    prob, mixed = ff.noisy_filtered_state(small, ff.FilterSettings(0.1), 2, 0, ff.DetectorModel.binomial(0.8))
    assert 0 < mixed.purity() <= 1.0
    assert close(sum(w for w, _ in mixed.terms()), 1.0, 1e-10)

    response = ff.DetectorModel.gaussian(1.5).response(10)
    assert close(sum(response.values()), 1.0, 1e-10)

    try:
        ff.FilterSettings(1.2)
    except ValueError:
        pass
    else:
        raise AssertionError("reflectivity 1.2 accepted")

    try:
        ff.FilterSettings(0.1, condition="adt >")
    except ValueError as e:
        assert "column" in str(e)
    else:
        raise AssertionError("bad condition accepted")

    table = ff.run_scenario(
        'quantity = "hom-dist"\nthreshold = 2\n[input]\nkind = "fock"\nsi = 2\ndi = 0\n'
    )
    assert "delta,probability" in table

    print("pyfockfilter smoke test passed")


if __name__ == "__main__":
    main()
