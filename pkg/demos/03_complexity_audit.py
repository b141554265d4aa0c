# Audit a full model: per-layer parameter and multiply-accumulate counts,
# group subtotals, and verification against the bundled target fixture.
#
# Counting convention: one MAC per multiply-accumulate inside a convolution
# or linear layer. Normalization, bias adds, activations, and elementwise
# products are excluded.

import os

import tempconv as tc
from tempconv.complexity import audit, emit_report, verify_fixture, emit_verify

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIGS = os.path.join(HERE, "..", "configs")
FIXTURE = os.path.join(HERE, "..", "fixtures", "paper_tables.json")

# Build the default-width model with the starv temporal block and audit it
# at the reference input: one clip, 29 frames, 88x88 pixels.
config = tc.load_config_file(os.path.join(CONFIGS, "starv.cfg"))
model = tc.build_model(config, init=False)   # no weights needed to count
report = audit(model, (1, 29, 88, 88))

print(emit_report(report, fmt="text"))

params, macs = report.group_totals()
print("\ngroup shares of total MACs:")
for group in ("stem", "extractor", "tcn", "classifier"):
    print(f"  {group:<11} {macs[group] / report.total_macs:6.1%}")

# The temporal stack is the part the block zoo changes; the fixture pins its
# published parameter and MAC targets with explicit tolerances.
print("\nfixture verification (all block kinds):")
results = verify_fixture(FIXTURE)
print(emit_verify(results, fmt="text"))

# One target is out of reach by design of this implementation: the linear
# block's published 1.0M is ~7% below what its stated layer sequence costs
# at width 512. The row stays red rather than bending the tolerance.
