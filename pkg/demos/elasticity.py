"""Plane-strain elasticity with rough Lame coefficients.

The same coarse-space constructions apply verbatim to vector problems: the
seeds become per-component shapes (8 bilinear seeds for lssi, a 2-column
constant block for lksi), everything else is unchanged.
"""

from mslab import cli, coeff, grid

pair = grid.NestedPair(8, 48)
field = coeff.gen_inclusions(pair, density=0.12, contrast=1e3, seed=3)
methods = [("lod", 1), ("lssi", 2), ("lksi", 4)]

rows, _ = cli.run_methods(pair, field, "elasticity", 3, methods)
print(f"{'method':8s} {'e_energy':>10s} {'e_L2':>10s} {'DoF':>6s} {'NoLP':>6s}")
for row in rows:
    print(f"{row.method:8s} {row.e_energy:10.3e} {row.e_L2:10.3e}"
          f" {row.DoF:6d} {row.NoLP:6d}")
