"""Dense ViT descriptor exporter for the part-correspondence engine.

Runs a small patch-8 vision transformer over images and writes the
patch descriptors (plus an attention-derived saliency channel) in the
engine's AFDG binary format.
"""

__version__ = "0.1.0"

from .afdg import write_afdg
from .export import ExportJob, build_model, export_image, prepare_image, run_job
from .vit import VisionTransformer, load_pretrained
