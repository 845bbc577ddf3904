"""Exact tree-based neighbor search and policy-driven k-means clustering."""

from .covertree import CoverTree, build_cover_tree
from .data import SeededRng, as_data_matrix, generate_uniform, load_csv, save_csv
from .errors import DataFormatError, DimensionMismatch, InvalidParameter, MlcoreError
from .kdtree import HRectBound, KdTree, build_kdtree
from .kmeans import ClusteringResult, KMeans, KMeansConfig, kmeans_cluster, lloyd_step
from .metrics import EuclideanDistance, LpMetric, ManhattanDistance, lp_distance
from .neighbors import (
    FURTHEST, NEAREST, SELF, NeighborSearch, brute_force_search, knn_search, range_search,
)

__version__ = "0.1.0"
