"""Target-apprentice transfer learning.

A policy learned in a source task runs in a related target task through a
learned inter-task state map, corrected at every step by the gap between
where the source dynamics would take the mapped state and where a learned
control-affine model of the target says the equivalent action goes.

Subpackages and modules:

``tatl.mdp``        action sets, transitions, trajectories, rollouts
``tatl.envs``       grid world, inverted pendulum, mountain car, cart-pole, bicycle
``tatl.fqi``        linear fitted Q-iteration
``tatl.alignment``  inter-task state maps by manifold alignment
``tatl.apprentice`` control-affine target models and their learning loop
``tatl.transfer``   the corrected transfer policy
``tatl.baselines``  value-initialised transfer and learning from scratch
``tatl.harness``    experiments, records, summaries and the CLI
"""

from .errors import ActionCardinalityError, MissingArtifactError, NumericalFault, RankDeficiencyError, TatlError

__version__ = "0.1.0"

__all__ = [
    "TatlError",
    "NumericalFault",
    "ActionCardinalityError",
    "RankDeficiencyError",
    "MissingArtifactError",
]
