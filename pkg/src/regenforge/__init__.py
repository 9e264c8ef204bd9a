"""regenforge: turn a prompt-driven image generator into a segmentation data factory.

Library surface: taxonomy/palette handling and mask codecs, prompt
planning, split-pair extraction and QA, mask statistics, dataset distance
metrics, spatial fold construction, multi-source batch mixing,
sliding-window pseudo-labelling, segmentation scoring, and the curation
review service. The ``regenforge`` command wires all of it together.
"""

__version__ = "0.1.0"

from .errors import ConfigError, ContractError, RegenforgeError
from .taxonomy import (
    ClassDef,
    ClassTaxonomy,
    Rank,
    SemanticMask,
    UnmappedReport,
    decode_mask,
    default_taxonomy,
    encode_mask,
    load_taxonomy,
)
from .manifest import (
    DatasetManifest,
    DefectTag,
    ReviewStatus,
    SampleRecord,
    Source,
    read_manifest,
    write_manifest,
)

__all__ = [
    "__version__",
    "RegenforgeError",
    "ConfigError",
    "ContractError",
    "ClassDef",
    "ClassTaxonomy",
    "Rank",
    "SemanticMask",
    "UnmappedReport",
    "decode_mask",
    "encode_mask",
    "load_taxonomy",
    "default_taxonomy",
    "DatasetManifest",
    "SampleRecord",
    "Source",
    "ReviewStatus",
    "DefectTag",
    "read_manifest",
    "write_manifest",
]
