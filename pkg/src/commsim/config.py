"""Text serialization of components: registry, comment-eating tokenizer, payloads.

Every serializable component starts with its registered name token, followed by
a version integer and its parameters. Each value is preceded by a '#' comment
label line; whole lines whose first non-blank character is '#' are skipped on
input, so the labels are decorative and files may carry arbitrary comments.
"""

from __future__ import annotations

from typing import ClassVar, Iterator

__all__ = [
    "ParseError",
    "UnknownComponentError",
    "VersionError",
    "eat_comments",
    "TokenStream",
    "ConfigWriter",
    "Component",
    "register",
    "lookup",
    "registered_components",
    "serialize_component",
    "deserialize_component",
]


class ParseError(Exception):
    """Malformed configuration input."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class UnknownComponentError(ParseError):
    pass


class VersionError(ParseError):
    pass


def _lex(text: str) -> Iterator[tuple[str, int]]:
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.lstrip().startswith("#"):
            continue
        for tok in line.split():
            yield tok, lineno


def eat_comments(text: str) -> list[str]:
    """Whitespace-separated tokens of ``text`` with whole-line '#' comments removed."""
    return [tok for tok, _ in _lex(text)]


class TokenStream:
    """Sequential token reader with line tracking for error reporting."""

    def __init__(self, text: str) -> None:
        self._toks = list(_lex(text))
        self._pos = 0

    @property
    def line(self) -> int:
        if self._pos < len(self._toks):
            return self._toks[self._pos][1]
        return self._toks[-1][1] if self._toks else 0

    def exhausted(self) -> bool:
        return self._pos >= len(self._toks)

    def peek(self) -> str | None:
        if self.exhausted():
            return None
        return self._toks[self._pos][0]

    def next(self, what: str = "token") -> str:
        if self.exhausted():
            raise ParseError(f"unexpected end of input while reading {what}", self.line)
        tok, _ = self._toks[self._pos]
        self._pos += 1
        return tok

    def next_int(self, what: str = "integer") -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"expected integer for {what}, got {tok!r}", self.line) from None

    def next_float(self, what: str = "number") -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"expected number for {what}, got {tok!r}", self.line) from None


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ConfigWriter:
    """Accumulates the text payload of one or more components."""

    def __init__(self) -> None:
        self._lines: list[str] = []

    def comment(self, text: str) -> None:
        self._lines.append(f"# {text}")

    def token(self, value) -> None:
        self._lines.append(_fmt(value))

    def field(self, label: str, value) -> None:
        self.comment(label)
        self.token(value)

    def field_list(self, label: str, values) -> None:
        self.comment(label)
        for v in values:
            self.token(v)

    def child(self, label: str, component: "Component") -> None:
        self.comment(label)
        self._lines.append(serialize_component(component).rstrip("\n"))

    def text(self) -> str:
        return "\n".join(self._lines) + "\n"


class Component:
    """Base for everything that appears in a system configuration file.

    Subclasses set ``category``/``name`` class attributes, register themselves
    with :func:`register`, and implement ``write_params``/``read_params``.
    Structural equality compares serialized parameters, ignoring runtime state.
    """

    category: ClassVar[str]
    name: ClassVar[str]
    version: ClassVar[int] = 1

    def write_params(self, w: ConfigWriter) -> None:
        pass

    @classmethod
    def read_params(cls, ts: TokenStream) -> "Component":
        return cls()

    def description(self) -> str:
        return self.name

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return serialize_component(self) == serialize_component(other)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.description()}>"


_REGISTRY: dict[tuple[str, str], type[Component]] = {}


def register(cls: type[Component]) -> type[Component]:
    """Class decorator adding a component type to the global factory registry."""
    key = (cls.category, cls.name)
    if key in _REGISTRY:
        raise RuntimeError(f"duplicate component registration: {key}")
    _REGISTRY[key] = cls
    return cls


def lookup(category: str, name: str) -> type[Component] | None:
    return _REGISTRY.get((category, name))


def registered_components() -> list[type[Component]]:
    return list(_REGISTRY.values())


def serialize_component(c: Component) -> str:
    """Full text payload of a component: name, version, parameters."""
    if lookup(c.category, c.name) is not type(c):
        raise RuntimeError(f"component type {type(c).__name__} is not registered")
    w = ConfigWriter()
    w.token(c.name)
    w.field("Version", c.version)
    c.write_params(w)
    return w.text()


def deserialize_component(source, category: str) -> Component:
    """Parse one component of the given category from text or a token stream."""
    ts = source if isinstance(source, TokenStream) else TokenStream(str(source))
    name = ts.next(f"{category} component name")
    cls = _REGISTRY.get((category, name))
    if cls is None:
        raise UnknownComponentError(f"unknown {category} component {name!r}", ts.line)
    version = ts.next_int(f"{name} version")
    if version != cls.version:
        raise VersionError(f"unsupported {name} version {version} (expected {cls.version})", ts.line)
    try:
        return cls.read_params(ts)
    except ParseError:
        raise
    except (ValueError, TypeError) as exc:
        raise ParseError(f"invalid {name} parameters: {exc}", ts.line) from exc
