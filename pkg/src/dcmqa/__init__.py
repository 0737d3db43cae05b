"""Quality assessment toolkit for dynamic colored meshes."""

from .distortion import (DecimationStalledError, DistortionSpec, apply_color_noise,
                         apply_distortion, apply_geometric_noise, decimate,
                         downsample_texture, geometric_noise_displacements,
                         run_external_codec)
from .image_metrics import (geo_psnr, ms_ssim, psnr_image, rgb_psnr, ssim,
                            video_metric, yuv_psnr_image)
from .mesh_io import (BoundingBox, MeshSequence, TextureMap, TriangleMesh,
                      compute_bbox, load_obj, load_ply_pointcloud, load_texture,
                      save_obj, save_ply_pointcloud)
from .pointcloud_metrics import (INF_SENTINEL, MetricResult, PcqmParams,
                                 SpatialIndex, cap_scores, d1_hausdorff, d1_psnr,
                                 d2_hausdorff, d2_psnr, pcqm, pcqm_psnr,
                                 rgb_to_yuv, sequence_metric, yuv_psnr_point)
from .render import (Camera, RenderedView, camera_path, fibonacci_viewpoints,
                     normalize_depth, rasterize)
from .rng import RandomSource, mix_seed
from .sampling import (ColoredPointCloud, SamplerConfig, ediv_sample, face_sample,
                       grid_sample, sample_mesh, sdiv_sample, texture_lookup)
from .subjective import (EvaluationReport, LogisticFit, MosTable, RatingRecord,
                         evaluate_metric, fit_logistic, plcc, remove_outliers,
                         screen_traps, srocc, viewer_correlation)

__version__ = "0.1.0"
