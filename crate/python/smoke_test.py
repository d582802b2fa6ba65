"""Smoke test for the floquet_edge extension; run python/build.sh first."""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import floquet_edge as fe  # noqa: E402


def edge_side(mode):
    mags = [abs(complex(*z)) ** 2 for z in mode]
    return "left" if sum(mags[:3]) > sum(mags[-3:]) else "right"


def main():
    assert fe.__version__
    assert json.loads(fe.SCHEMA)["properties"]["schema_version"]["const"] == 1

    c = fe.capacitance([[0.0, 0.0, 0.0]], 1.0, gamma=1.0, backend="boundary")
    assert abs(c[0][0] / (4 * math.pi) - 1) < 1e-10, c

    centers = fe.supercell_centers(2)
    assert len(centers) == 12
    c = fe.capacitance(centers, 0.1)
    assert all(abs(c[i][j] - c[j][i]) < 1e-12 for i in range(12) for j in range(12))

    modes = fe.floquet_spectrum(1, 0.2, steps=400)
    assert len(modes) == 12 and all(isinstance(z, complex) for z in modes)
    assert all(abs(z.imag) < 1e-6 for z in modes)

    pred = fe.predict_edge_split(4, 0.2, degenerate=False)
    assert {edge_side(pred["w_red"]), edge_side(pred["q_red"])} == {"left", "right"}

    config = json.dumps({"schema_version": 1, "geometry": {"type": "supercell", "cells": 1}})
    out = fe.run_scenario(config, "capmat")
    assert sorted(out) == ["capmat.csv", "capmat.json", "run-manifest.json"]
    try:
        fe.run_scenario(json.dumps({"schema_version": 1, "geometry": {}, "bogus": 1}), "capmat")
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
