from compound_render.config.display import (
    DestinationChannel,
    channel_pvp,
    derive_destination_channels,
    find_destination,
)
from compound_render.config.model import (
    COLOR,
    DEPTH,
    Canvas,
    Channel,
    Compound,
    Config,
    DestinationRef,
    EqualizerKind,
    EqualizerSpec,
    FrameSpec,
    Layout,
    Node,
    Pipe,
    ProjectionSpec,
    QueueSpec,
    Segment,
    TaskKind,
    View,
    Window,
)
from compound_render.config.parser import ConfigError, load_config, parse_config, print_config, tokenize
from compound_render.config.validate import Diagnostic, dplex_coverage, validate

__all__ = [
    "COLOR",
    "Canvas",
    "Channel",
    "Compound",
    "Config",
    "ConfigError",
    "DEPTH",
    "DestinationChannel",
    "DestinationRef",
    "Diagnostic",
    "EqualizerKind",
    "EqualizerSpec",
    "FrameSpec",
    "Layout",
    "Node",
    "Pipe",
    "ProjectionSpec",
    "QueueSpec",
    "Segment",
    "TaskKind",
    "View",
    "Window",
    "channel_pvp",
    "derive_destination_channels",
    "dplex_coverage",
    "find_destination",
    "load_config",
    "parse_config",
    "print_config",
    "tokenize",
    "validate",
]
