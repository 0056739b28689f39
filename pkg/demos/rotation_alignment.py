"""Recover a known rotation between two point clouds with the manifold
alignment, then map a point there and back."""

import numpy as np

from tatl.alignment import AlignmentDataset, fit_alignment

g = np.random.default_rng(0)
x = g.gamma([2.0, 5.0], size=(800, 2))
x = (x - x.mean(0)) @ np.linalg.inv(np.linalg.cholesky(np.cov(x.T)).T)
theta = 0.7
R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
m = fit_alignment(AlignmentDataset(x, x @ R.T))
print("fitted source-to-target matrix:\n", np.round(m.forward_A, 6))
print("true rotation:\n", np.round(R, 6))
print(f"round-trip error {m.round_trip_error(x):.2e}")
