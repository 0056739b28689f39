"""Pendulum with reversed control: the learned gain is negative, so the
corrected action opposes the mapped source action."""

import numpy as np

from tatl.alignment import InterTaskMap
from tatl.apprentice import ApprenticeConfig, learn_apprentice
from tatl.envs import InvertedPendulum
from tatl.harness import default_config, train_source
from tatl.transfer import TransferContext, composite_action, run_transfer

q, (ret, _) = train_source(default_config("negative_transfer"))
flipped = InvertedPendulum(control_sign=-1.0)
model = learn_apprentice(flipped, ApprenticeConfig(5, 100), seed=0).model
ctx = TransferContext.build(q, InvertedPendulum(), model, InterTaskMap.identity(2), flipped)
print(f"learned control gain {model.gain:.4f} (mixture gain {ctx.gain:.2f})")
for s in ([-3.0, 0.0], [0.3, 0.5], [-0.2, -1.0]):
    d = composite_action(ctx, np.array(s))
    base = ctx.source_env.action_set.value(d.source_action)[0]
    print(f"state {s}: source action {base:+.1f} -> applied {d.applied_value[0]:+.3f}")
res = run_transfer(ctx, flipped, episodes=5, seed=0)
print(f"source return on its own task {ret:.0f}; TA-TL on the flipped task {res.average_reward:.0f}")
