"""Smoke test for the ripple extension module."""

import math
import os
import sys
import tempfile

import ripple


def close(a, b, rel=1e-9):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


def main():
    assert ripple.mape([100.0, 200.0], [110.0, 180.0]) == 10.0

    dt = 1.0 / (60.0 * 256)
    n = 256 * 10
    sig = [3.0 + 2.0 * math.sin(2 * math.pi * 120.0 * i * dt) for i in range(n)]
    rms, h2, h4 = ripple.extract_harmonics(sig, dt, 60.0, 10)
    assert close(h2, 2.0, 1e-9), h2
    assert h4 < 1e-9
    assert close(rms, math.sqrt(9.0 + 2.0), 1e-9), rms

    sim = ripple.simulate("bridge", 700.0, cycles=30)
    assert len(sim["i_cap"]) == len(sim["v_out"]) > 0

    data = ripple.Dataset.sweep("bridge", [500.0 + 30.0 * i for i in range(16)], seed=1)
    assert len(data) == 16
    again = ripple.Dataset.from_csv(data.to_csv())
    assert again.targets == data.targets
    train, test = data.split(4, 0)
    assert len(train) == 12 and len(test) == 4

    text = ripple.serialize_prompt([(500.0, 6.0, 5.0, 4.0)], 600.0, 6)
    assert text.endswith("x=600.000 -> "), text
    assert ripple.parse_completion("rms=1.5, h2=2, h4=3;") == (1.5, 2.0, 3.0)

    poly = ripple.fit_poly(train)
    gbt = ripple.fit_gbt(train, n_trees=20)
    x = test.xs[0]
    actual = test.targets[0]
    assert ripple.mape([actual[0]], [poly.predict(x)[0]]) < 5.0
    assert len(gbt.predict(x)) == 3

    pairs = train.prompts(2, 6, seed=0, digits=3)
    model = ripple.Model(layers=1, heads=2, embed_dim=16, max_context=128, seed=0)
    losses = model.train(pairs, epochs=2, batch_size=3)
    assert len(losses) == 4 and all(math.isfinite(l) for l in losses)
    out = model.generate(pairs[0][0], temperature=0.0, max_tokens=8)
    assert isinstance(out, str)

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "m.ckpt")
        model.save(path)
        loaded = ripple.Model.load(path)
        assert loaded.n_params == model.n_params
        assert loaded.generate(pairs[0][0], temperature=0.0, max_tokens=8) == out

    print("ripple smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
