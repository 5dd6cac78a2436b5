"""Image recombination kernels and parallel compositing schedules."""

from compound_render.compositing.image import FAR_DEPTH, Image, ImageError
from compound_render.compositing.kernels import (
    BlendOrder,
    CompositeOp,
    accumulate_average,
    assemble_out_of_order,
    assemble_tile,
    blend_over,
    clear,
    gather_pixels,
    scatter_pixels,
    z_composite,
)
from compound_render.compositing.schedules import (
    CompositeSchedule,
    ScheduleError,
    Step,
    build_23_swap,
    build_binary_swap,
    build_direct_send,
    build_stream_chain,
    execute_schedule,
    sequential_composite,
)

__all__ = [
    "BlendOrder",
    "CompositeOp",
    "CompositeSchedule",
    "FAR_DEPTH",
    "Image",
    "ImageError",
    "ScheduleError",
    "Step",
    "accumulate_average",
    "assemble_out_of_order",
    "assemble_tile",
    "blend_over",
    "build_23_swap",
    "build_binary_swap",
    "build_direct_send",
    "build_stream_chain",
    "clear",
    "execute_schedule",
    "gather_pixels",
    "scatter_pixels",
    "sequential_composite",
    "z_composite",
]
