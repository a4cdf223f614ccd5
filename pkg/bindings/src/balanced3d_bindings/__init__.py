"""Array-in/array-out wrappers over the balanced3d pipeline.

The four bound operations accept and return contiguous numeric arrays so a
training loop can drive the pipeline without touching its object model.
Inputs are borrowed read-only for the duration of each call; every returned
array is freshly allocated and owned by the caller. All functions are pure
and safe to call from multiple threads (the heavy lifting happens inside
numpy, which drops the interpreter lock for large operations).
"""

from .bindings import (
    bound_assign_targets,
    bound_build_epoch,
    bound_decode,
    bound_voxelize,
    load_pipeline_config,
)

__version__ = "0.1.0"
