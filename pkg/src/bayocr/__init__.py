"""Baybayin handwriting detection toolkit.

Preprocessing, dataset handling, detector post-processing, transliteration,
evaluation, and benchmarking for character-level detection of the Philippine
syllabary. Detector models themselves are external; this package speaks to
them through stored sidecar files or a line-oriented child process.
"""

from .dataset import (
    Annotation,
    AugmentSpec,
    BBox,
    DatasetIndex,
    DatasetItem,
    augment,
    build_dataset_index,
    compute_class_weights,
    index_from_dirs,
    parse_label_file,
    read_class_list,
    split_dataset,
    write_label_file,
)
from .detection import (
    Detection,
    ReadingOrder,
    assemble_reading_order,
    filter_confidence,
    iou,
    nms,
)
from .errors import (
    AmbiguityError,
    BackendError,
    BayocrError,
    ConfigError,
    DatasetError,
    InputError,
    LabelParseError,
    SidecarError,
)
from .evaluate import (
    EvalReport,
    MatchResult,
    average_precision,
    confusion_matrix,
    evaluate_detections,
    f1_score,
    match_detections,
    mean_ap,
    precision_recall_f1,
)
from .imgproc import (
    PipelineConfig,
    Raster,
    letterbox,
    load_raster,
    otsu_binarize,
    run_pipeline,
    save_raster,
    sharpen,
    to_grayscale,
    tv_denoise,
)
from .runtime import (
    BenchReport,
    DetectionSidecar,
    ProcessBackend,
    ReplayBackend,
    benchmark,
    detect,
    load_sidecar,
    parse_sidecar,
    summarize_latencies,
    write_sidecar,
)
from .script import (
    AmbiguitySet,
    ClassInventory,
    Glyph,
    Lexicon,
    disambiguate,
    expand_ambiguities,
    glyph_to_latin,
    levenshtein,
    load_lexicon,
    transliterate,
    transliterate_lines,
)

__version__ = "0.1.0"
