"""Stability with respect to the length of a high-contrast channel.

Sweeps the length of a horizontal channel and prints the energy error of the
baseline and of the iterate-based spaces.  The baseline degrades once the
channel outgrows what an oversampling patch can see; the iterate-based
spaces hold on much longer.
"""

from mslab import cli, coeff, grid

pair = grid.NestedPair(10, 50)
m = 3
methods = [("lod", 1), ("lssi", 2), ("lksi", 4)]

print(f"{'len':>4s}" + "".join(f" {cli.method_label(mth):>10s}" for mth in methods))
for length in (2, 3, 4, 5, 6, 8, 10):
    spec = coeff.ChannelSpec(length_coarse=length, thickness_fine=1, count=1,
                             seed=0, contrast=1e4)
    field = coeff.gen_channels(pair, spec)
    rows, _ = cli.run_methods(pair, field, "diffusion", m, methods)
    print(f"{length:4d}" + "".join(f" {r.e_energy:10.3e}" for r in rows))
