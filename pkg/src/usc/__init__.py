"""Safety-oriented spatial-constraint metrics for 3D object detectors.

The package provides the building blocks for scoring how well 3D detections
cover their ground-truth objects as seen from the ego vehicle: box geometry
and projections, the PV/BEV constraint checks with their quantitative
measures (IoGT, ADR, USC), a range-bucketed evaluation protocol (mAP, NDS,
mAUSC, USC-NDS), the safety-oriented loss family, and dataset tooling with
a deterministic synthetic-scenario generator.
"""

from . import errors
from .constraints import (RepresentativePoints, UscBreakdown, adr, azimuth,
                          bev_constraint, distance_ratio_geomean, iogt_pv,
                          pv_constraint, representative_points, usc_score,
                          usc_verdict)
from .evaluation import (Annotation, BucketSummary, ClassBucketMetrics,
                         Detection, MatchedPair, MatchSet, MetricsReport,
                         ProtocolConfig, UscAggregate, aggregate_usc,
                         average_precision, bev_center_distance, evaluate,
                         match_frame, nds, pearson, tp_error_means, usc_nds)
from .geometry import (EPS_DEPTH, EPS_GEOM, BevPolygon, Box3D, Point2,
                       Point3, Rect2D, Segment2D, box_corners, box_volume,
                       convex_intersection_area, intersection_volume, iogt3d,
                       iou3d, project_bev, project_pv_rect, segments_intersect,
                       shoelace_area, wrap_angle)
from .io import (FrameRecord, SyntheticSpec, format_report_table,
                 generate_synthetic, load_config, load_dataset, load_report,
                 merge_datasets, report_from_dict, report_to_dict,
                 save_dataset, write_report)
from .loss import LossConfig, iogt_loss, safety_loss, smooth_l1

__version__ = "0.1.0"
