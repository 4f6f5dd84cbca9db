from .types import (
    ACTIONS,
    CLASS_LABELS,
    EDIT_TYPES,
    GLOBAL_ATTRIBUTE_VALUES,
    SCENE_TYPE_VALUES,
    SEASON_VALUES,
    TIME_OF_DAY_VALUES,
    VEHICLE_CLASSES,
    WEATHER_VALUES,
    Box,
    EditSpec,
    FramePose,
    GlobalAttributes,
    InstanceRecord,
    LangMask,
    LossWeights,
    SceneAnnotation,
    TrainingSample,
    annotation_from_dict,
    annotation_to_dict,
    box_area,
    instance_from_dict,
    instance_to_dict,
    spec_from_dict,
    spec_to_dict,
)
from .serialization import (
    CheckpointFormatError,
    ManifestEntry,
    ManifestResult,
    MaskFormatError,
    deserialize_mask,
    load_arrays,
    load_sample,
    mask_from_bytes,
    mask_to_bytes,
    read_manifest,
    save_arrays,
    save_sample,
    serialize_mask,
    write_manifest,
)
from .images import (
    as_float_image,
    crop,
    decode_image_bytes,
    encode_gray_png,
    encode_png,
    from_uint8,
    load_image,
    resize_image,
    save_image,
    to_uint8,
)

__all__ = [name for name in dir() if not name.startswith("_")]
