"""Transfer a calm-grid policy to the windy grid and draw one episode."""

from tatl.alignment import InterTaskMap
from tatl.apprentice import ApprenticeConfig, learn_apprentice
from tatl.envs import GridWorld
from tatl.harness import default_config, train_source
from tatl.transfer import TransferContext, run_transfer

q, (ret, _) = train_source(default_config("grid"))
windy = GridWorld.default(windy=True)
fit = learn_apprentice(windy, ApprenticeConfig(200, 5, max_refits=12), seed=0)
ctx = TransferContext.build(q, windy.without_wind(), fit.model, InterTaskMap.identity(2), windy)
res = run_transfer(ctx, windy, episodes=20, seed=0)
print(f"source greedy return {ret:.1f}; apprentice used {fit.samples} target samples")
print(f"TA-TL average reward over 20 windy episodes: {res.average_reward:.1f}")
path = [tuple(int(v) for v in s) for s in res.trajectories[0].states]
print(windy.render(path))
print(f"episode 0 reached the goal in {len(path) - 1} steps: {res.trajectories[0].terminated}")
