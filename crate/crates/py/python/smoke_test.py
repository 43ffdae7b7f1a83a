"""Smoke test for the Python bindings: python python/smoke_test.py"""

import json
import random

import nmlsdr


def clusters(rng, per):
    centers = [(0.0, 0.0, 0.0), (6.0, 0.0, 0.0), (0.0, 6.0, 0.0)]
    x, y = [], []
    for i in range(3 * per):
        c = i % 3
        x.append([v + rng.random() - 0.5 for v in centers[c]])
        y.append([int(c == j) for j in range(3)])
    return x, y


def main():
    rng = random.Random(0)
    x, y = clusters(rng, 30)
    x_test, y_test = clusters(rng, 10)

    f = nmlsdr.propagate(x, y, labeled=45)
    assert len(f) == 90 and all(0.0 <= v <= 1.0 for row in f for v in row)

    p = nmlsdr.Projection.fit_nmlsdr(x, y, labeled=45, d=2)
    z = p.transform(x)
    assert len(z[0]) == 2 and len(p.basis) == 3

    model = nmlsdr.MlknnModel.train(z, y, k=5)
    hard, score = model.predict(p.transform(x_test))
    metrics = nmlsdr.evaluate(y_test, hard, score)
    assert metrics["hl_prime"] > 0.9, metrics
    assert nmlsdr.MlknnModel.from_json(model.to_json()).priors == model.priors

    hard, score = nmlsdr.semi_supervised_classify(x, y, 45, x_test, json.dumps({"d": 2}))
    assert len(hard) == len(x_test)

    flipped = nmlsdr.flip_labels(y, 0.1, 1)
    assert sum(a != b for r, s in zip(y, flipped) for a, b in zip(r, s)) == 27
    initial, labeled, order = nmlsdr.mask_labels(y, 0.5, 1)
    assert labeled == 45 and sorted(order) == list(range(90))

    a = [0.5 + 0.01 * i for i in range(10)]
    assert nmlsdr.wilcoxon_pair_score(a, [0.4] * 10) == (1.0, 0.0)

    try:
        nmlsdr.Projection.fit_pca(x, 7)
    except ValueError:
        pass
    else:
        raise AssertionError("d > D must raise")

    print("smoke test passed:", {k: round(v, 3) for k, v in metrics.items()})


if __name__ == "__main__":
    main()
