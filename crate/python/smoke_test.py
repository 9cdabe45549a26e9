"""Smoke test for the pyalgtrend extension.

Uses an installed pyalgtrend if importable, otherwise the library produced by
`cargo build -p algtrend-py --release --features extension-module`.
"""
import importlib
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def import_module():
    try:
        return importlib.import_module("pyalgtrend")
    except ImportError:
        pass
    for name in ("libpyalgtrend.so", "libpyalgtrend.dylib", "pyalgtrend.dll"):
        built = ROOT / "target" / "release" / name
        if built.exists():
            break
    else:
        sys.exit("pyalgtrend not found: build it with "
                 "`cargo build -p algtrend-py --release --features extension-module`")
    tmp = pathlib.Path(tempfile.mkdtemp())
    suffix = ".pyd" if built.suffix == ".dll" else ".so"
    shutil.copy(built, tmp / ("pyalgtrend" + suffix))
    sys.path.insert(0, str(tmp))
    return importlib.import_module("pyalgtrend")


def main():
    at = import_module()

    bank = at.KernelBank(degree=1, window=3)
    for got, want in zip(bank.weights(0), (-1 / 6, 1 / 3, 5 / 6)):
        assert abs(got - want) < 1e-12, (got, want)
    assert bank.noise_gain(0) > 0

    prices = [100 + 10 * math.sin(2 * math.pi * i / 250) + 0.5 * math.sin(1.7 * i) for i in range(600)]
    dec = at.sliding_trend(prices, at.KernelBank())
    w = dec["warmup"]
    assert all(t + f == p for t, f, p in zip(dec["trend"], dec["fluctuation"], prices[w:]))
    osc = at.oscillation_score(dec["fluctuation"], scale=100.0)
    assert osc["quickly_fluctuating"], osc

    tracks = at.moment_tracks(dec["fluctuation"], 100)
    assert tracks["start"] == 100 and all(s >= 0 for s in tracks["std"])
    assert len(at.rolling_central_moment(dec["fluctuation"], 2, 100)) == len(tracks["std"])

    lo, hi = at.confidence_band(100.0, 10.0, 0.95)
    assert abs(lo - 80.40036015459947) < 1e-9 and abs(hi - 119.59963984540053) < 1e-9
    assert at.taylor_extrapolate(1.0, 2.0, 2.0, 3.0) == 16.0
    assert at.classify_position(1.0, 0.0, 0.5) == "above"
    assert at.classify_position(0.2, 0.0, 0.5) == "no_decision"

    simple = at.returns([1.0, 2.0, 1.0], "simple")
    log = at.returns([1.0, 2.0, 1.0], "log")
    assert simple == [1.0, -0.5] and abs(log[0] - math.log(2)) < 1e-15

    report = at.walk_forward(prices)
    for h in (1, 5):
        row = report[h]
        assert abs(row["exact_pct"] + row["nodecision_pct"] + row["wrong_pct"] - 100) < 1e-9

    paths = at.simulate_paths(sigma=0.0, steps=10, paths=2)
    assert abs(paths[0][-1] - math.exp(0.05)) < 1e-12
    p_hat, se = at.oscillation_probability(paths=2000, steps=200)
    assert 0.6 < p_hat < 0.75 and se > 0, (p_hat, se)

    try:
        at.KernelBank(degree=3, window=3)
    except ValueError as e:
        assert "underdetermined" in str(e)
    else:
        raise AssertionError("expected ValueError")

    print("pyalgtrend smoke test ok: h=1 exact %.2f%%, p_hat %.4f" % (report[1]["exact_pct"], p_hat))


if __name__ == "__main__":
    main()
