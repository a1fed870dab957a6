"""pagfit: part-affordance-guided 4D human-object interaction fitting.

Subpackages:
  pag          part affordance graphs (parse, validate, resolve)
  geom         point clouds, poses, rotations, cameras, meshes, SDF grids
  partseg      multi-view 2D mask to 3D label voting
  hoiopt       trajectory optimization losses, optimizer, point-map alignment
  synth        synthetic ground-truth scenes and brute-force oracles
  evalmetrics  smoothness / diversity / plausibility metrics
  cli          the `pagfit` command line tool
"""

__version__ = "0.1.0"
