"""Project training time from op counts and per-op cost lines.

Counts come from the analytical model (checked against live counters in the
test suite); costs are affine in the input bit width. Swap in your own
measurements with ``--costs file.json`` (see README for the format).
"""
import argparse

from blindeval import DEFAULT_COST_MODEL, CostModel, count_ops

parser = argparse.ArgumentParser()
parser.add_argument("--costs", default=None)
parser.add_argument("--rows", type=int, default=300)
parser.add_argument("--features", type=int, default=7)
parser.add_argument("--bits", type=int, default=4)
args = parser.parse_args()

model = CostModel.load(args.costs) if args.costs else DEFAULT_COST_MODEL
x = args.bits
print(f"per-op seconds at {x} bits: compare {model.f(x):.2f}, select {model.g(x):.2f}, order {model.h(x):.2f}")
print(f"{'depth':>5} {'compare':>8} {'select':>8} {'order':>7} {'hours':>10}")
for d in range(1, 5):
    ops = count_ops(args.rows, args.features, d)
    hours = float(model.total(x, ops.comparisons, ops.selections, ops.orderings)) / 3600
    print(f"{d:>5} {ops.comparisons:>8} {ops.selections:>8} {ops.orderings:>7} {hours:>10.1f}")
