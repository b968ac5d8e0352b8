"""Thermal-infrared to daytime-RGB translation via multi-level GAN pipelines.

Modules: data (manifests, PNG I/O, toy dataset), networks (generators and
patch discriminators), losses (adversarial/cycle/L1/perceptual/TV), training
(schedules, trainers, checkpoints), pipelines (the four pipeline variants and
batch inference), evaluation (IoU matching, PR curves, mAP@0.5), cli.
"""

__version__ = "0.1.0"

from . import data, evaluation, losses, networks, pipelines, training

__all__ = ["data", "evaluation", "losses", "networks", "pipelines", "training", "__version__"]
