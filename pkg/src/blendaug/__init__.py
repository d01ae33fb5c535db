"""Phoneme-level mispronunciation data augmentation.

Blends a good-pronunciation candidate phoneme with a confusable donor
phoneme under parameterized mask templates, labels the result, and splices
it back into the utterance; also computes 84-dim GOP features and the
text-level and GOP-level baseline augmenters.
"""

from .audio import (
    AudioBuffer,
    AudioFormatError,
    SampleSpan,
    SilentDonorError,
    normalize_energy,
    read_wav,
    rms,
    splice,
    write_wav,
)
from .align import (
    CtmParseError,
    PhonemeInterval,
    UtteranceRecord,
    extract_segment,
    parse_ctm,
    serialize_ctm,
    to_span,
)
from .closedict import (
    CloseDict,
    DictFormatError,
    default_inventory,
    load_dict,
    load_inventory,
    pick_distant,
    pick_donor,
    starter_dict_path,
)
from .mask import (
    CUTMIX,
    CUTPASTE,
    SMOOTH_CONCATENATION,
    SMOOTH_GAUSSIAN_OVERLAY,
    SMOOTH_OVERLAY,
    MaskProperty,
    MixCurve,
    SegmentTooShortError,
    dump_mask,
    generate_mask,
    get_property,
)
from .blender import (
    BlendResult,
    FRAME_WEIGHTED,
    REGION_FLOOR,
    analytic_score,
    blend,
    label,
    speech_blend,
)
from .gopfeat import (
    EmptyBankError,
    GopBank,
    GopVector,
    PosteriorMatrix,
    gop_augment,
    gop_vector,
    lpp,
    lpr,
    read_posteriors,
    text_augment,
)
from .pipeline import (
    AugConfig,
    AugmentedSample,
    Corpus,
    MaskChoice,
    RunSummary,
    augment_utterance,
    derive_seed,
    find_donor_occurrence,
    load_corpus,
    run,
    select_candidates,
)

__version__ = "0.1.0"
