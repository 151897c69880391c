"""Image preprocessing catalog, quality metrics, VOC dataset statistics and a
seeded linear-SVM convergence benchmark for comparing preprocessing pipelines."""

__version__ = "0.1.0"
