"""Compare the multiscale methods on a random high-contrast inclusion field.

Builds lod, lssi-n and lksi-n coarse spaces on the same mesh pair and prints
an error/cost table (energy error, L2 error, coarse DoF, number of local
solves).  Solution heatmaps are written to demos/out/.
"""

import pathlib

from mslab import cli, coeff, grid

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

pair = grid.NestedPair(10, 100)
field = coeff.gen_inclusions(pair, density=0.12, contrast=1e4, seed=1)
methods = [("lod", 1), ("lssi", 1), ("lssi", 2), ("lssi", 4), ("lksi", 4)]

rows, ctx = cli.run_methods(pair, field, "diffusion", 4, methods)

print(f"{'method':8s} {'e_energy':>10s} {'e_L2':>10s} {'DoF':>6s} {'NoLP':>6s}")
for row in rows:
    print(f"{row.method:8s} {row.e_energy:10.3e} {row.e_L2:10.3e}"
          f" {row.DoF:6d} {row.NoLP:6d}")

cli.write_pgm(OUT / "inclusions_coeff.pgm", field.values, log10=True)
n1 = pair.fine.n + 1
cli.write_pgm(OUT / "inclusions_u_ref.pgm", ctx["u_ref_pad"].reshape(n1, n1))
for label, u in ctx["solutions"].items():
    cli.write_pgm(OUT / f"inclusions_u_{label}.pgm", u.reshape(n1, n1))
print(f"heatmaps written to {OUT}")
