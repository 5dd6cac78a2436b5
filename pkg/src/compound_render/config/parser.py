"""Tokenizer, recursive-descent parser and canonical printer for config files.

The format is brace-delimited blocks of ``keyword value`` lines::

    compound {
        channel "draw"
        buffer [ COLOR DEPTH ]
        range [ 0 0.5 ]
        viewport [ 0 0 0.5 1 ]
        outputframe { name "left_half" }
    }

Numbers are decimals; ``#`` starts a comment. Angles (fov, hpr) are degrees.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from compound_render.config.model import (
    COLOR,
    DEPTH,
    OFF,
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
from compound_render.geometry import (
    Eye,
    FocusMode,
    GeometryError,
    Observer,
    PixelKernel,
    Range,
    SubpixelKernel,
    Viewport,
    Wall,
)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class Token:
    kind: str  # STRING NUMBER IDENT PUNCT
    value: object
    line: int


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[0-9]+[A-Za-z_][A-Za-z0-9_]*|[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>[-+]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][-+]?[0-9]+)?)
  | (?P<punct>[{}\[\]()])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line = 1
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ConfigError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        raw = m.group()
        end = m.end()
        if kind == "nl":
            line += 1
        elif kind == "string":
            tokens.append(Token("STRING", bytes(raw[1:-1], "utf-8").decode("unicode_escape"), line))
        elif kind == "number":
            if end < len(text) and (text[end].isalnum() or text[end] in "/_."):
                raise ConfigError(f"malformed number near {text[pos:end + 1]!r}", line)
            tokens.append(Token("NUMBER", float(raw), line))
        elif kind == "ident":
            tokens.append(Token("IDENT", raw, line))
        elif kind == "punct":
            tokens.append(Token("PUNCT", raw, line))
        pos = end
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token helpers -----------------------------------------------------------

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    @property
    def line(self) -> int | None:
        tok = self.peek()
        if tok is not None:
            return tok.line
        return self.tokens[-1].line if self.tokens else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ConfigError("unexpected end of input", self.line)
        self.pos += 1
        return tok

    def expect(self, kind: str, value=None) -> Token:
        tok = self.next()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value if value is not None else kind.lower()
            raise ConfigError(f"expected {want}, got {tok.value!r}", tok.line)
        return tok

    def at(self, kind: str, value=None) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == kind and (value is None or tok.value == value)

    def string(self) -> str:
        return self.expect("STRING").value

    def number(self) -> float:
        return self.expect("NUMBER").value

    def integer(self) -> int:
        tok = self.expect("NUMBER")
        if tok.value != int(tok.value):
            raise ConfigError(f"expected an integer, got {tok.value}", tok.line)
        return int(tok.value)

    def ident(self) -> str:
        return self.expect("IDENT").value

    def numbers(self, count: int | None = None) -> list[float]:
        line = self.line
        self.expect("PUNCT", "[")
        out = []
        while not self.at("PUNCT", "]"):
            out.append(self.number())
        self.expect("PUNCT", "]")
        if count is not None and len(out) != count:
            raise ConfigError(f"expected {count} numbers, got {len(out)}", line)
        return out

    def idents(self) -> list[str]:
        self.expect("PUNCT", "[")
        out = []
        while not self.at("PUNCT", "]"):
            out.append(self.ident())
        self.expect("PUNCT", "]")
        return out

    def block(self, handlers: dict, what: str) -> None:
        self.expect("PUNCT", "{")
        while not self.at("PUNCT", "}"):
            tok = self.next()
            if tok.kind != "IDENT" or tok.value not in handlers:
                raise ConfigError(f"unknown keyword {tok.value!r} in {what}", tok.line)
            try:
                handlers[tok.value]()
            except (GeometryError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(str(exc), tok.line) from exc
        self.expect("PUNCT", "}")

    # -- top level ---------------------------------------------------------------

    def config(self) -> Config:
        cfg = Config()

        def latency():
            cfg.latency = self.integer()

        def stereo_mode():
            cfg.stereo_mode = self.ident()

        handlers = {
            "latency": latency,
            "stereo_mode": stereo_mode,
            "node": lambda: cfg.nodes.append(self.node()),
            "observer": lambda: cfg.observers.append(self.observer()),
            "layout": lambda: cfg.layouts.append(self.layout()),
            "canvas": lambda: cfg.canvases.append(self.canvas()),
            "compound": lambda: cfg.compounds.append(self.compound()),
        }
        while self.peek() is not None:
            tok = self.next()
            if tok.kind != "IDENT" or tok.value not in handlers:
                raise ConfigError(f"unknown top-level keyword {tok.value!r}", tok.line)
            try:
                handlers[tok.value]()
            except (GeometryError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(str(exc), tok.line) from exc
        return cfg

    # -- resources -----------------------------------------------------------------

    def node(self) -> Node:
        node = Node("")

        def name():
            node.name = self.string()

        self.block({"name": name, "pipe": lambda: node.pipes.append(self.pipe())}, "node")
        return node

    def pipe(self) -> Pipe:
        pipe = Pipe(None)

        def name():
            pipe.name = self.string()

        self.block({"name": name, "window": lambda: pipe.windows.append(self.window())}, "pipe")
        return pipe

    def window(self) -> Window:
        win = Window(None)

        def name():
            win.name = self.string()

        def viewport():
            line = self.line
            v = self.numbers(4)
            if any(c != int(c) for c in v) or v[2] <= 0 or v[3] <= 0:
                raise ConfigError("window viewport must be positive integer pixels", line)
            win.viewport = tuple(int(c) for c in v)

        self.block(
            {"name": name, "viewport": viewport, "channel": lambda: win.channels.append(self.channel())},
            "window",
        )
        return win

    def channel(self) -> Channel:
        ch = Channel("")

        def name():
            ch.name = self.string()

        def viewport():
            ch.viewport = Viewport(*self.numbers(4))

        self.block({"name": name, "viewport": viewport}, "channel")
        return ch

    # -- display model ---------------------------------------------------------------

    def wall(self) -> Wall:
        pts = {}
        self.block(
            {
                k: (lambda k=k: pts.__setitem__(k, tuple(self.numbers(3))))
                for k in ("bottom_left", "bottom_right", "top_left")
            },
            "wall",
        )
        if len(pts) != 3:
            raise ConfigError("wall needs bottom_left, bottom_right and top_left", self.line)
        return Wall(pts["bottom_left"], pts["bottom_right"], pts["top_left"])

    def projection(self) -> ProjectionSpec:
        vals = {}
        self.block(
            {
                "origin": lambda: vals.__setitem__("origin", tuple(self.numbers(3))),
                "distance": lambda: vals.__setitem__("distance", self.number()),
                "fov": lambda: vals.__setitem__("fov_deg", tuple(self.numbers(2))),
                "hpr": lambda: vals.__setitem__("hpr_deg", tuple(self.numbers(3))),
            },
            "projection",
        )
        spec = ProjectionSpec(**vals)
        spec.projection()  # validates
        return spec

    def observer(self) -> Observer:
        vals: dict = {}

        def focus_mode():
            mode = self.ident()
            try:
                vals["focus_mode"] = FocusMode[mode]
            except KeyError as exc:
                raise ConfigError(f"unknown focus mode {mode}", self.line) from exc

        def head_matrix():
            m = self.numbers(16)
            vals["head_matrix"] = tuple(tuple(m[4 * r : 4 * r + 4]) for r in range(4))

        self.block(
            {
                "name": lambda: vals.__setitem__("name", self.string()),
                "eye_left": lambda: vals.__setitem__("eye_left", tuple(self.numbers(3))),
                "eye_right": lambda: vals.__setitem__("eye_right", tuple(self.numbers(3))),
                "eye_cyclop": lambda: vals.__setitem__("eye_cyclop", tuple(self.numbers(3))),
                "focus_distance": lambda: vals.__setitem__("focus_distance", self.number()),
                "focus_mode": focus_mode,
                "head_matrix": head_matrix,
            },
            "observer",
        )
        return Observer(**vals)

    def layout(self) -> Layout:
        layout = Layout("")

        def name():
            layout.name = self.string()

        self.block({"name": name, "view": lambda: layout.views.append(self.view())}, "layout")
        return layout

    def view(self) -> View:
        view = View("")

        def set_(attr, fn):
            return lambda: setattr(view, attr, fn())

        self.block(
            {
                "name": set_("name", self.string),
                "viewport": set_("viewport", lambda: Viewport(*self.numbers(4))),
                "observer": set_("observer", self.string),
                "wall": set_("wall", self.wall),
                "projection": set_("projection", self.projection),
                "model_unit": set_("model_unit", self.number),
            },
            "view",
        )
        return view

    def canvas(self) -> Canvas:
        canvas = Canvas("")

        def set_(attr, fn):
            return lambda: setattr(canvas, attr, fn())

        def active_layout():
            if self.at("IDENT", OFF):
                self.next()
                canvas.active_layout = OFF
            else:
                canvas.active_layout = self.string()

        self.block(
            {
                "name": set_("name", self.string),
                "wall": set_("wall", self.wall),
                "projection": set_("projection", self.projection),
                "segment": lambda: canvas.segments.append(self.segment()),
                "layout": lambda: canvas.layouts.append(self.string()),
                "active_layout": active_layout,
            },
            "canvas",
        )
        return canvas

    def segment(self) -> Segment:
        seg = Segment("")

        def set_(attr, fn):
            return lambda: setattr(seg, attr, fn())

        self.block(
            {
                "name": set_("name", self.string),
                "viewport": set_("viewport", lambda: Viewport(*self.numbers(4))),
                "channel": set_("channel", self.string),
                "wall": set_("wall", self.wall),
                "projection": set_("projection", self.projection),
                "swapbarrier": set_("swapbarrier", self.string),
            },
            "segment",
        )
        return seg

    # -- compounds -------------------------------------------------------------------

    def buffers(self) -> frozenset:
        line = self.line
        names = self.idents()
        bad = [n for n in names if n not in (COLOR, DEPTH)]
        if bad or not names:
            raise ConfigError(f"invalid buffer list {names}", line)
        return frozenset(names)

    def frame(self, output: bool) -> FrameSpec | str:
        spec = FrameSpec("")

        def name():
            spec.name = self.string()

        handlers = {"name": name}
        if output:

            def buffer():
                spec.buffers = self.buffers()

            def viewport():
                spec.viewport = Viewport(*self.numbers(4))

            def zoom():
                spec.zoom = tuple(self.numbers(2))

            def type_():
                line = self.line
                t = self.ident()
                if t not in ("MEMORY", "TEXTURE"):
                    raise ConfigError(f"unknown frame type {t}", line)
                spec.type = t

            handlers.update(buffer=buffer, viewport=viewport, zoom=zoom, type=type_)
        line = self.line
        self.block(handlers, "outputframe" if output else "inputframe")
        if not spec.name:
            raise ConfigError("frame without a name", line)
        return spec if output else spec.name

    def queue(self, output: bool) -> QueueSpec | str:
        q = QueueSpec("")

        def name():
            q.name = self.string()

        handlers = {"name": name}
        if output:

            def tilesize():
                v = self.numbers(2)
                q.tilesize = (int(v[0]), int(v[1]))

            def chunksize():
                q.chunksize = self.number()

            def prefetch():
                q.prefetch = self.integer()

            handlers.update(tilesize=tilesize, chunksize=chunksize, prefetch=prefetch)
        line = self.line
        self.block(handlers, "outputqueue" if output else "inputqueue")
        if not q.name:
            raise ConfigError("queue without a name", line)
        if output and (q.tilesize is None) == (q.chunksize is None):
            raise ConfigError("an output queue needs exactly one of tilesize or chunksize", line)
        if output and q.tilesize is not None and min(q.tilesize) < 1:
            raise ConfigError("tile size must be positive", line)
        if output and q.chunksize is not None and not 0 < q.chunksize <= 1:
            raise ConfigError("chunk size must lie in (0, 1]", line)
        return q if output else q.name

    def equalizer(self, kind: EqualizerKind) -> EqualizerSpec:
        eq = EqualizerSpec(kind)

        def mode():
            eq.mode = self.ident()

        def setnum(attr):
            return lambda: setattr(eq, attr, self.number())

        def tilesize():
            v = self.numbers(2)
            eq.tilesize = (int(v[0]), int(v[1]))

        self.block(
            {
                "mode": mode,
                "damping": setnum("damping"),
                "resistance": setnum("resistance"),
                "boundary": setnum("boundary"),
                "framerate": setnum("framerate"),
                "target": setnum("target"),
                "tilesize": tilesize,
            },
            kind.value,
        )
        if eq.mode is not None and eq.mode not in ("2D", "VERTICAL", "HORIZONTAL", "DB"):
            raise ConfigError(f"unknown equalizer mode {eq.mode}", self.line)
        if eq.damping is not None and not 0 <= eq.damping <= 1:
            raise ConfigError("damping must lie in [0, 1]", self.line)
        return eq

    def compound(self) -> Compound:
        c = Compound(line=self.line or 0)

        def channel():
            if self.at("PUNCT", "("):
                self.next()
                refs = {}
                while not self.at("PUNCT", ")"):
                    key = self.ident()
                    if key not in ("segment", "view"):
                        raise ConfigError(f"unknown channel reference {key}", self.line)
                    refs[key] = self.string()
                self.expect("PUNCT", ")")
                if set(refs) != {"segment", "view"}:
                    raise ConfigError("destination reference needs segment and view", self.line)
                c.destination = DestinationRef(refs["segment"], refs["view"])
            else:
                c.channel = self.string()

        def tasks():
            line = self.line
            names = self.idents()
            try:
                c.tasks = frozenset(TaskKind[n] for n in names)
            except KeyError as exc:
                raise ConfigError(f"unknown task in {names}", line) from exc

        def buffer():
            c.buffers = self.buffers()

        def eye():
            line = self.line
            names = self.idents()
            try:
                c.eyes = frozenset(Eye[n] for n in names)
            except KeyError as exc:
                raise ConfigError(f"unknown eye in {names}", line) from exc

        def pixel():
            v = self.numbers(4)
            c.pixel = PixelKernel(*(int(x) for x in v))

        def subpixel():
            v = self.numbers(2)
            c.subpixel = SubpixelKernel(size=int(v[1]), index=int(v[0]))

        def period():
            line = self.line
            c.period = self.integer()
            if c.period < 1:
                raise ConfigError("period must be at least 1", line)

        def phase():
            line = self.line
            c.phase = self.integer()
            if c.phase < 0:
                raise ConfigError("phase must be non-negative", line)

        def zoom():
            line = self.line
            c.zoom = tuple(self.numbers(2))
            if min(c.zoom) <= 0:
                raise ConfigError("zoom must be positive", line)

        def usage():
            line = self.line
            c.usage = self.number()
            if not 0 <= c.usage <= 1:
                raise ConfigError("usage must lie in [0, 1]", line)

        def name():
            c.name = self.string()

        def viewport():
            c.viewport = Viewport(*self.numbers(4))

        def range_():
            c.range = Range(*self.numbers(2))

        def wall():
            c.wall = self.wall()

        def projection():
            c.projection = self.projection()

        def output_queue():
            c.output_queue = self.queue(True)

        def input_queue():
            c.input_queue = self.queue(False)

        handlers = {
            "channel": channel,
            "name": name,
            "task": tasks,
            "buffer": buffer,
            "eye": eye,
            "viewport": viewport,
            "range": range_,
            "pixel": pixel,
            "subpixel": subpixel,
            "period": period,
            "phase": phase,
            "zoom": zoom,
            "usage": usage,
            "wall": wall,
            "projection": projection,
            "outputframe": lambda: c.output_frames.append(self.frame(True)),
            "inputframe": lambda: c.input_frames.append(self.frame(False)),
            "outputqueue": output_queue,
            "inputqueue": input_queue,
            "compound": lambda: c.children.append(self.compound()),
        }
        for kind in EqualizerKind:
            handlers[kind.value] = lambda kind=kind: c.equalizers.append(self.equalizer(kind))
        self.block(handlers, "compound")
        return c


def parse_config(text: str, strict: bool = True) -> Config:
    """Parse and resolve a configuration.

    With ``strict`` any error diagnostic from :func:`validate` is raised as a
    :class:`ConfigError` carrying the offending line.
    """
    cfg = _Parser(tokenize(text)).config()
    if strict:
        from compound_render.config.validate import validate

        errors = [d for d in validate(cfg) if d.severity == "error"]
        if errors:
            raise ConfigError(errors[0].message, errors[0].line)
    return cfg


def load_config(path, strict: bool = True) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), strict)


# -- canonical printer -----------------------------------------------------------


def _num(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


def _nums(vals) -> str:
    return "[ " + " ".join(_num(v) for v in vals) + " ]"


def _str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


class _Printer:
    def __init__(self):
        self.lines: list[str] = []
        self.depth = 0

    def emit(self, text: str):
        self.lines.append("    " * self.depth + text)

    def open(self, head: str):
        self.emit(head + " {")
        self.depth += 1

    def close(self):
        self.depth -= 1
        self.emit("}")

    def viewport(self, key: str, vp: Viewport | None):
        if vp is not None:
            self.emit(f"{key} {_nums((vp.x, vp.y, vp.w, vp.h))}")

    def wall(self, wall: Wall | None):
        if wall is None:
            return
        self.open("wall")
        self.emit(f"bottom_left {_nums(wall.bottom_left)}")
        self.emit(f"bottom_right {_nums(wall.bottom_right)}")
        self.emit(f"top_left {_nums(wall.top_left)}")
        self.close()

    def projection(self, p: ProjectionSpec | None):
        if p is None:
            return
        self.open("projection")
        self.emit(f"origin {_nums(p.origin)}")
        self.emit(f"distance {_num(p.distance)}")
        self.emit(f"fov {_nums(p.fov_deg)}")
        self.emit(f"hpr {_nums(p.hpr_deg)}")
        self.close()

    def config(self, cfg: Config):
        self.emit(f"latency {cfg.latency}")
        if cfg.stereo_mode != "QUAD":
            self.emit(f"stereo_mode {cfg.stereo_mode}")
        for node in cfg.nodes:
            self.open("node")
            self.emit(f"name {_str(node.name)}")
            for pipe in node.pipes:
                self.open("pipe")
                if pipe.name:
                    self.emit(f"name {_str(pipe.name)}")
                for win in pipe.windows:
                    self.open("window")
                    if win.name:
                        self.emit(f"name {_str(win.name)}")
                    self.emit(f"viewport {_nums(win.viewport)}")
                    for ch in win.channels:
                        self.open("channel")
                        self.emit(f"name {_str(ch.name)}")
                        self.viewport("viewport", ch.viewport)
                        self.close()
                    self.close()
                self.close()
            self.close()
        for o in cfg.observers:
            self.open("observer")
            self.emit(f"name {_str(o.name)}")
            self.emit(f"eye_left {_nums(o.eye_left)}")
            self.emit(f"eye_right {_nums(o.eye_right)}")
            self.emit(f"eye_cyclop {_nums(o.eye_cyclop)}")
            self.emit(f"focus_distance {_num(o.focus_distance)}")
            self.emit(f"focus_mode {o.focus_mode.name}")
            self.emit(f"head_matrix {_nums([c for row in o.head_matrix for c in row])}")
            self.close()
        for layout in cfg.layouts:
            self.open("layout")
            self.emit(f"name {_str(layout.name)}")
            for v in layout.views:
                self.open("view")
                self.emit(f"name {_str(v.name)}")
                self.viewport("viewport", v.viewport)
                if v.observer:
                    self.emit(f"observer {_str(v.observer)}")
                self.wall(v.wall)
                self.projection(v.projection)
                if v.model_unit != 1.0:
                    self.emit(f"model_unit {_num(v.model_unit)}")
                self.close()
            self.close()
        for canvas in cfg.canvases:
            self.open("canvas")
            self.emit(f"name {_str(canvas.name)}")
            self.wall(canvas.wall)
            self.projection(canvas.projection)
            for name in canvas.layouts:
                self.emit(f"layout {_str(name)}")
            if canvas.active_layout == OFF:
                self.emit("active_layout OFF")
            elif canvas.active_layout is not None:
                self.emit(f"active_layout {_str(canvas.active_layout)}")
            for seg in canvas.segments:
                self.open("segment")
                self.emit(f"name {_str(seg.name)}")
                self.viewport("viewport", seg.viewport)
                if seg.channel:
                    self.emit(f"channel {_str(seg.channel)}")
                self.wall(seg.wall)
                self.projection(seg.projection)
                if seg.swapbarrier:
                    self.emit(f"swapbarrier {_str(seg.swapbarrier)}")
                self.close()
            self.close()
        for c in cfg.compounds:
            self.compound(c)

    def compound(self, c: Compound):
        self.open("compound")
        if c.destination is not None:
            self.emit(f"channel ( segment {_str(c.destination.segment)} view {_str(c.destination.view)} )")
        elif c.channel is not None:
            self.emit(f"channel {_str(c.channel)}")
        if c.name:
            self.emit(f"name {_str(c.name)}")
        if c.tasks is not None:
            order = [t.name for t in TaskKind if t in c.tasks]
            self.emit("task [ " + " ".join(order) + " ]")
        if c.buffers is not None:
            self.emit("buffer [ " + " ".join(b for b in (COLOR, DEPTH) if b in c.buffers) + " ]")
        if c.eyes is not None:
            self.emit("eye [ " + " ".join(e.name for e in Eye if e in c.eyes) + " ]")
        self.viewport("viewport", c.viewport)
        if c.range is not None:
            self.emit(f"range {_nums((c.range.lo, c.range.hi))}")
        if c.pixel is not None:
            self.emit(f"pixel {_nums((c.pixel.w, c.pixel.h, c.pixel.dx, c.pixel.dy))}")
        if c.subpixel is not None:
            self.emit(f"subpixel {_nums((c.subpixel.index, c.subpixel.size))}")
        if c.period is not None:
            self.emit(f"period {c.period}")
        if c.phase is not None:
            self.emit(f"phase {c.phase}")
        if c.zoom is not None:
            self.emit(f"zoom {_nums(c.zoom)}")
        if c.usage is not None:
            self.emit(f"usage {_num(c.usage)}")
        self.wall(c.wall)
        self.projection(c.projection)
        for eq in c.equalizers:
            self.open(eq.kind.value)
            if eq.mode is not None:
                self.emit(f"mode {eq.mode}")
            for attr in ("damping", "resistance", "boundary", "framerate", "target"):
                if getattr(eq, attr) is not None:
                    self.emit(f"{attr} {_num(getattr(eq, attr))}")
            if eq.tilesize is not None:
                self.emit(f"tilesize {_nums(eq.tilesize)}")
            self.close()
        if c.output_queue is not None:
            q = c.output_queue
            self.open("outputqueue")
            self.emit(f"name {_str(q.name)}")
            if q.tilesize is not None:
                self.emit(f"tilesize {_nums(q.tilesize)}")
            if q.chunksize is not None:
                self.emit(f"chunksize {_num(q.chunksize)}")
            if q.prefetch != 1:
                self.emit(f"prefetch {q.prefetch}")
            self.close()
        if c.input_queue is not None:
            self.emit(f"inputqueue {{ name {_str(c.input_queue)} }}")
        for child in c.children:
            self.compound(child)
        for f in c.output_frames:
            self.open("outputframe")
            self.emit(f"name {_str(f.name)}")
            if f.buffers is not None:
                self.emit("buffer [ " + " ".join(b for b in (COLOR, DEPTH) if b in f.buffers) + " ]")
            self.viewport("viewport", f.viewport)
            if f.zoom is not None:
                self.emit(f"zoom {_nums(f.zoom)}")
            if f.type != "MEMORY":
                self.emit(f"type {f.type}")
            self.close()
        for name in c.input_frames:
            self.emit(f"inputframe {{ name {_str(name)} }}")
        self.close()


def print_config(cfg: Config) -> str:
    """Canonical text form; ``parse_config(print_config(c))`` reproduces ``c``."""
    p = _Printer()
    p.config(cfg)
    return "\n".join(p.lines) + "\n"
