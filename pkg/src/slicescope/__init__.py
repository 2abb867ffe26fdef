"""Error-slice discovery and data-centric model repair over tagged datasets."""

from .schema import (
    Attribute,
    AttributeSchema,
    DatasetError,
    IndicatorIndex,
    Sample,
    SchemaError,
    TaggedDataset,
    build_index,
    load_dataset,
    load_schema,
    validate_assignment,
)
from .lattice import (
    EnumConfig,
    EnumerationCapExceeded,
    Slice,
    SliceLattice,
    enumerate_efficient,
    enumerate_naive,
    enumerate_tree,
    intersect_candidate,
    match_pairs,
)
from .analyze import (
    ErrorSliceReport,
    ModelSliceView,
    attach_model,
    identify_error_slices,
    postprocess,
    slice_overlap,
)
from .llm import HTTPLLMClient, LLMClient, ReplayLLMClient, StubLLMClient, TransportError
from .predict import (
    HashEmbedding,
    PredictedSlice,
    TableEmbedding,
    evaluate_predicted,
    instruct_predict,
    substitute_tags,
)
from .generate import (
    GenerationConfig,
    GenerationError,
    GenerationSession,
    assign_tags,
    determine_tags,
    generate_attributes_comparative,
    generate_attributes_task,
    refine_tags_from_data,
)
from .repair import RepairPlan, prioritize_groups, prioritize_pool

__version__ = "0.1.0"
