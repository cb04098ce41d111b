"""Proto-object audiovisual saliency maps from panoramic video and
spherical-microphone-array audio."""

from .core import (ConspicuityBundle, DataError, FeatureMap, FlowField,
                   GroundTruth, GroundTruthEvent, Pyramid, SaliencyMap,
                   SalientEvent)
from .vision import (color_opponency_maps, intensity_map, motion_magnitude,
                     optical_flow, orientation_maps, HornSchunckFlow)
from .pyramid import across_scale_add, build_pyramid, rescale01
from .grouping import (border_ownership, center_surround, collapse_grouping,
                       group_channel, grouping, normalize_itti)
from .audio import (AudioFrame, Beamformer, MicArrayGeometry, SteeringGrid,
                    beamform, frame_audio, mercator_pixel, project_to_panorama,
                    read_wav, write_wav)
from .fusion import (asm, avsm1, avsm2, avsm3, conspicuity, extract_events,
                     read_float_map, vsm, write_float_map)
from .scene import SceneScript, ground_truth, render_audio, render_video
from .pipeline import (DatasetManifest, PipelineConfig, eval_recall,
                       overlay_isocontours, run_pipeline)

__version__ = "0.1.0"
