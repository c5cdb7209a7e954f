"""A Takagi-Sugeno model by hand.

Two rules over one input: a "low" regime around x = 0 and a "high" regime
around x = 10, each with its own affine output.  The model output blends the
two lines with the rule firing strengths.
"""

import numpy as np

from fuzzyrunoff import GaussianMf, TsModel, TsRule, predict, predict_batch
from fuzzyrunoff.core import dump_model, firing_strength, parse_model, rule_output

low = TsRule((GaussianMf(mean=0.0, width=1.5),), np.array([2.0, 0.5]))
high = TsRule((GaussianMf(mean=10.0, width=1.5),), np.array([-3.0, 1.5]))
model = TsModel((low, high))

print("membership of x=1 in the low rule:", firing_strength(low, [1.0]))
print("low-rule line at x=1: ", rule_output(low, [1.0]))
print("high-rule line at x=1:", rule_output(high, [1.0]))
print()

# near a premise the model follows that rule's line; in between it blends
for x in (0.0, 1.0, 5.0, 9.0, 10.0):
    print(f"predict({x:4.1f}) = {predict(model, [x]):8.4f}")
print()

xs = np.linspace(-2.0, 12.0, 8)[:, None]
print("batch prediction over a grid:")
print(np.column_stack([xs, predict_batch(model, xs)[:, None]]).round(4))
print()

# serialisation round-trips every parameter bit-exactly
text = dump_model(model)
print("serialised form:")
print(text)
back = parse_model(text)
assert np.array_equal(back.consequents, model.consequents)
print("round-trip exact:", np.array_equal(back.premise_means, model.premise_means))
