"""
dsgc: depthwise separable graph convolution on spatial graphs.

A numpy autodiff engine with graph operators (kNN graphs, scaled Laplacians,
K-means coarsening), the convolution layer family built on them, and a
config-driven benchmark harness.
"""

__version__ = "0.1.0"
