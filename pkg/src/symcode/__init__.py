"""Symmetry-aware surface encoding for pose estimation.

The package covers the full pipeline: mesh and annotation loading, vertex
symmetry classification, one-to-many correspondence groups, hierarchical
binary surface codes, ground-truth label map rendering, PnP pose recovery
with symmetry-canonical mapping, and BOP-style evaluation metrics. A CLI
(`symcode`) and an HTTP annotation service sit on top.
"""

from .config import ProjectConfig, load_config
from .correspondence import (CorrespondenceGroup, CorrespondenceSet,
                             build_correspondences, canonicalize_continuous,
                             load_correspondences, main_vertex,
                             main_vertex_index, orbit, save_correspondences)
from .encoding import (SplitNode, SurfaceEncoding, balanced_two_means,
                       build_encoding, code_bit, content_hash, decode,
                       encode_mesh_one_to_one, encode_mesh_symcode,
                       load_encoding, save_encoding)
from .errors import (BehindCamera, BitOutOfRange, ConfigMismatch,
                     DegenerateConfiguration, DegenerateInput, DegenerateMesh,
                     InvalidBits, InvalidOrder, NoConsensus, NonPositiveDepth,
                     OrbitMismatch, ParseError, ShapeMismatch, SymcodeError,
                     TooFewPoints, UnassignedCode, UnknownPart,
                     UnsupportedFeature)
from .geometry import (CameraIntrinsics, Pose, axis_angle_rotation,
                       geodesic_angle, is_rotation, orthonormalize,
                       rotation_aligning)
from .mesh import (Mesh, decimate_mesh, extract_part, farthest_pair,
                   load_mesh, load_part_labels, nearest_vertex,
                   object_diameter, save_mesh, save_part_labels)
from .metrics import (MetricConfig, PoseEstimate, add_distance,
                      adds_distance, ar_scores, load_results_csv, mspd, mssd,
                      sample_points, save_results_csv, vsd_error, vsd_recall,
                      write_report)
from .render import (LabelMaps, RenderGeometry, extract_bit_map,
                     labels_from_geometry, project, project_points,
                     read_code_map, read_depth_raw, read_mask_pgm,
                     render_depth, render_geometry, render_labels,
                     write_code_map, write_depth_raw, write_mask_pgm)
from .solvers import (Correspondence2D3D, Correspondences, PoseSet, RoI,
                      closest_sym_pose, decode_map_to_correspondences, epnp,
                      r6d_to_rotation, ransac_pnp, rotation_to_r6d,
                      site_to_translation, translation_to_site)
from .symmetry import (RigidMotion, SymmetryAnnotation, SymmetrySpec,
                       SymmetryTransformSet, VertexClassification,
                       classify_vertices, discretize_continuous,
                       is_identity_motion, load_annotation, motion_about_axis,
                       nfold_transforms, save_annotation, symmetry_error,
                       symmetry_errors)

__version__ = "0.1.0"

__all__ = [
    "BehindCamera", "CameraIntrinsics", "ConfigMismatch",
    "Correspondence2D3D", "CorrespondenceGroup", "CorrespondenceSet",
    "Correspondences", "DegenerateConfiguration", "DegenerateInput",
    "InvalidBits", "InvalidOrder", "LabelMaps", "Mesh", "MetricConfig",
    "NoConsensus", "NonPositiveDepth", "OrbitMismatch", "ParseError", "Pose",
    "PoseEstimate", "PoseSet", "ProjectConfig", "RenderGeometry",
    "RigidMotion", "RoI", "ShapeMismatch", "SplitNode", "SurfaceEncoding",
    "SymcodeError", "SymmetryAnnotation", "SymmetrySpec",
    "SymmetryTransformSet", "UnassignedCode", "UnknownPart",
    "UnsupportedFeature", "VertexClassification", "add_distance",
    "adds_distance", "ar_scores", "axis_angle_rotation", "balanced_two_means",
    "BitOutOfRange", "DegenerateMesh", "TooFewPoints",
    "build_correspondences", "build_encoding", "canonicalize_continuous",
    "classify_vertices", "closest_sym_pose", "code_bit", "content_hash",
    "decimate_mesh", "decode", "decode_map_to_correspondences", "epnp",
    "encode_mesh_one_to_one", "encode_mesh_symcode", "extract_bit_map",
    "extract_part", "farthest_pair", "geodesic_angle", "is_identity_motion",
    "is_rotation", "labels_from_geometry",
    "load_annotation", "load_config", "load_correspondences", "load_encoding",
    "load_mesh", "load_part_labels", "load_results_csv", "main_vertex",
    "main_vertex_index", "motion_about_axis", "mspd", "mssd",
    "nearest_vertex", "nfold_transforms", "object_diameter", "orbit",
    "orthonormalize", "project", "project_points", "r6d_to_rotation",
    "ransac_pnp", "read_code_map", "read_depth_raw", "read_mask_pgm",
    "render_depth", "render_geometry", "render_labels", "rotation_aligning",
    "rotation_to_r6d", "sample_points", "save_annotation",
    "save_correspondences", "save_encoding", "save_mesh", "save_part_labels",
    "save_results_csv", "site_to_translation", "symmetry_error",
    "symmetry_errors", "translation_to_site", "discretize_continuous",
    "vsd_error", "vsd_recall", "write_code_map", "write_depth_raw",
    "write_mask_pgm", "write_report",
]
