"""Smoke test for the shatter_py extension.

Build first:  pip install --no-build-isolation ./crates/py
Then run:     python3 python/smoke_test.py
"""

import sys

import shatter_py as sp


def main() -> int:
    g = sp.Graph.d_regular(400, 32, 3)
    assert (g.n, g.m, g.max_degree) == (400, 6400, 32), g
    assert len(g.neighbors(0)) == 32
    assert sp.Graph.from_edge_list(g.to_edge_list()).edges() == g.edges()

    out = sp.split(g, 2, eps=0.5, seed=11)
    assert len(out["parts"]) == g.n
    assert sp.check_split(g, out["parts"], 2, 0.5)["pass"]
    assert sp.split(g, 2, eps=0.5, seed=11)["parts"] == out["parts"]
    print(f"split: path={out['stats']['path']} rounds={out['rounds']} bits={out['bits']}")

    slots = sp.q_divide(g, 4, seed=2)
    assert len(slots) == g.n and max(slots) < 4

    palette, colors = sp.color_edges(g, eps=0.5, seed=5)
    assert len(colors) == g.m
    for v in range(g.n):
        at = [c for (a, b, c) in colors if v in (a, b)]
        assert len(at) == len(set(at)), f"clash at {v}"
    print(f"edge coloring: palette {palette} for max degree {g.max_degree}")

    assert sp.misra_gries_color(sp.Graph(2, [(0, 1)])) == (1, [(0, 1, 0)])

    colors = sp.color_defective(g, 2, eps=0.5, seed=1)
    assert sp.check_defect(g, colors, 1.5 * 32 / 2)["pass"]

    assert sp.generate("dregular:100:4", 9).count("\n") == 200

    for algo in sp.ALGORITHMS:
        source = "lists:120:12:4" if algo == "list-color" else "gnp:200:12"
        result = sp.run(algo, source, seed=4)
        print(f"run {algo}: pass={result['check']['pass']} rounds={result['report']['rounds']}")
    assert sp.run("split", g, seed=1, k=1)["check"]["pass"]
    assert sp.run("split", g, seed=1, model="congest")["check"]["pass"]

    try:
        sp.run("split", g, bogus=1)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown option accepted")
    try:
        sp.Graph(3, [(0, 0)])
    except ValueError:
        pass
    else:
        raise AssertionError("self loop accepted")

    print("smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
