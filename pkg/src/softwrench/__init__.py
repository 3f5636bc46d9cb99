"""softwrench: visual wrench sensing for soft grippers, end to end in numpy.

Subpackages follow the pipeline order: gripper/contact simulation (gripper),
camera rendering (render), dataset scripting and persistence (dataset), the
image-to-wrench regressor (estimator, nn), comparison baselines (baselines),
metrics and figure data (evaluation), and closed-loop task controllers
(control). `cli` ties them into reproducible commands.
"""

__version__ = "0.1.0"
