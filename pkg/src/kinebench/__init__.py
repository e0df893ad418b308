"""Kinematic analysis workbench for plane bar structures.

Three parts, glued by one CLI:

* an exact stability oracle built on the rigidity matrix of the
  bar-joint model (``structures``, ``oracle``, ``catalog``),
* a procedural image dataset rendered from those structures with a
  deterministic software rasterizer (``raster``, ``png_io``,
  ``dataset``),
* a from-scratch convolutional classifier with training loop,
  checkpoints, and visual explanations (``nn``, ``trainer``,
  ``interpret``).
"""

from .structures import (Bar, Joint, JointKind, Structure, StructureError,
                         add_binary_unit, parse_structure,
                         serialize_structure)
from .oracle import (Classification, Verdict, binary_label,
                     classify_stability, label_structure)
from .catalog import Catalog, builtin_catalog
from .raster import DEFAULT_STYLE, IMAGE_SIZE, RenderError, RenderStyle, render
from .dataset import (AugmentationGrid, DatasetError, ImageSample, Manifest,
                      Split, augment, build_dataset, load_manifest,
                      rotate_image, save_manifest, stream_batches,
                      translate_image)
from .nn import (Table1Model, bce_loss, build_table1_model, load_checkpoint,
                 save_checkpoint)
from .trainer import (EpochRecord, PredictionRecord, TrainConfig,
                      TrainerError, evaluate, resume, train)
from .interpret import (ActivationSheet, FilterPattern, Heatmap,
                        InterpretError, class_activation_heatmap,
                        intermediate_activations, maximize_filter, overlay)

__version__ = "0.1.0"

__all__ = [
    "ActivationSheet", "AugmentationGrid", "Bar", "Catalog",
    "Classification", "DEFAULT_STYLE", "DatasetError", "EpochRecord",
    "FilterPattern", "Heatmap", "IMAGE_SIZE", "ImageSample",
    "InterpretError", "Joint", "JointKind", "Manifest", "PredictionRecord",
    "RenderError", "RenderStyle", "Split", "Structure", "StructureError",
    "Table1Model", "TrainConfig", "TrainerError", "Verdict",
    "add_binary_unit", "augment", "bce_loss", "binary_label",
    "build_dataset", "build_table1_model", "builtin_catalog",
    "class_activation_heatmap", "classify_stability", "evaluate",
    "intermediate_activations", "label_structure", "load_checkpoint",
    "load_manifest", "maximize_filter", "overlay", "parse_structure",
    "render", "resume", "rotate_image", "save_checkpoint", "save_manifest",
    "serialize_structure", "stream_batches", "train", "translate_image",
    "__version__",
]
