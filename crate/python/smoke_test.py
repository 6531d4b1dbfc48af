"""Smoke test for the isonfs_py extension. Build first:

    cd crates/python && maturin develop --release
"""

import math

import isonfs_py as m


def close(a, b, rel):
    return abs(a - b) <= rel * abs(b)


def main():
    rows = dict(m.flux_table())
    assert close(rows["undulator exit"], 2.2, 0.03), rows
    assert close(rows["NFS target"], 0.3, 0.03), rows

    r0 = m.nfs_rate(0.0, 2.25, le_ratio=0.0)
    assert close(r0, 2 * math.pi / 0.47 * 2.25**2, 1e-3), r0
    assert close(m.nfs_rate(1e-4, 2.25, thin=True), m.nfs_rate(1e-4, 2.25), 1e-3)

    t, rate = m.time_spectrum(2.25, dgamma=10.0, t_max=0.1, samples=4096)
    assert len(t) == len(rate) == 4097
    assert all(a >= b for a, b in zip(rate, rate[1:]))

    assert close(m.window_integral(2.25, 500.0), 3.0, 0.3)

    levels = m.quadrupole_levels("3/2", 4.0, 0.0)
    assert all(close(abs(e), 1.0, 1e-10) for e in levels), levels
    assert m.transition_span("ScN") == 0.0
    assert 3e6 <= m.transition_span("Sc") <= 3e7

    alpha, sigma = m.conversion_coefficient(328.0, 6.0, 7.3, 0.9, 0.9)
    assert abs(alpha - 390.0) <= 10.0 and 45.0 <= sigma <= 80.0, (alpha, sigma)
    assert 182.0 <= m.snr(328.0, 1.8) <= 183.0

    events = m.simulate(seed=1, duration_s=9000.0)
    assert events == m.simulate(seed=1, duration_s=9000.0)
    rate4, err4 = m.band_rate(events, (3.75, 4.75), (0.015, 0.1), 9000.0)
    assert abs(rate4 - 328.0) < 4 * err4, (rate4, err4)

    ts = [0.03 + (k + 0.5) * 1e-3 for k in range(60)]
    fit = m.fit_exponential(ts, [1e4 * math.exp(-ts_k / 0.46) for ts_k in ts])
    assert close(fit["gamma"], 1 / 0.46, 1e-9), fit

    res = m.fit_lifetime(events)
    assert res["n_fits"] + res["n_failed"] == 20130, res

    try:
        m.transition_span("nope")
    except KeyError:
        pass
    else:
        raise AssertionError("unknown target should raise KeyError")

    print("smoke test ok")


if __name__ == "__main__":
    main()
