"""Skeleton-based cylindrical reparameterization of tubular 3D point clouds.

Elongated, curvy structures (dendrites, vessels) are re-expressed as
generalized cylinders: a curve skeleton is extracted, each skeleton vertex
gets a moving orthonormal frame, and every point becomes (rho, phi, g)
relative to its nearest vertex. The transform is exactly invertible and
invariant to rigid motions, which the test suite verifies mechanically.
"""

from .errors import (
    BadSpec,
    BadWindow,
    CyclicParentage,
    DegenerateSkeleton,
    EmptyCloud,
    EmptyFragment,
    GencylError,
    IndexOutOfRange,
    LengthMismatch,
    MissingVotes,
    MixedArity,
    NoLeaves,
    NonOrthonormalRotation,
    NonPolygonalFace,
    OutOfGrid,
    ParseError,
    ShapeMismatch,
    TooFewPoints,
    UncoveredPoint,
)
from .geometry import (
    CylindricalCloud,
    CylindricalPoint,
    FramedSkeleton,
    PointCloud,
    RigidTransform,
    Skeleton,
    apply_rigid,
    compute_arc_length,
    compute_tnb,
    forward_transform,
    inverse_transform,
    nearest_vertex,
    random_rotation,
)
from .harness import (
    EvalReport,
    TubeSpec,
    dice,
    generate_tube,
    rho_threshold_segmenter,
    rotation_sweep,
    z_threshold_segmenter,
)
from .io import TriMesh, VolumeGrid, volume_to_points, voxelize_mesh, winding_number
from .sampling import (
    Batch,
    Fragment,
    LabelVote,
    assemble_prediction,
    fragment_cloud,
    majority_vote,
    make_batches,
    remap_to_volume,
)
from .skeletonize import (
    SkeletonGraph,
    SkeletonizeParams,
    cover_paths,
    l1_skeletonize,
    prune_short_branches,
    select_dendrite_path,
)

__version__ = "0.1.0"
