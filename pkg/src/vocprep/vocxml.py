"""Recursive-descent reader for the small XML dialect used by VOC annotations.

Supports elements, character data, attributes (parsed and discarded),
comments, processing instructions and a DOCTYPE line. The only entities
recognised are ``&amp;``, ``&lt;`` and ``&gt;``. Errors report line and
column of the offending character.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MalformedXml

_ENTITIES = {"amp": "&", "lt": "<", "gt": ">"}
_NAME_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_:")
_NAME_CHARS = _NAME_START | set("0123456789-.")


@dataclass
class Element:
    tag: str
    children: list[Element] = field(default_factory=list)
    text: str = ""

    def find(self, tag: str) -> Element | None:
        for child in self.children:
            if child.tag == tag:
                return child
        return None

    def findall(self, tag: str) -> list[Element]:
        return [c for c in self.children if c.tag == tag]


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def where(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def fail(self, message: str, pos: int | None = None):
        line, col = self.where(pos)
        raise MalformedXml(message, line, col)

    def peek(self, s: str) -> bool:
        return self.text.startswith(s, self.pos)

    def expect(self, s: str) -> None:
        if not self.peek(s):
            self.fail(f"expected {s!r}")
        self.pos += len(s)

    def skip_ws(self) -> None:
        n = len(self.text)
        while self.pos < n and self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def skip_until(self, end: str, what: str) -> None:
        idx = self.text.find(end, self.pos)
        if idx < 0:
            self.fail(f"unterminated {what}")
        self.pos = idx + len(end)

    def skip_misc(self) -> None:
        """Whitespace, comments, processing instructions and DOCTYPE."""
        while True:
            self.skip_ws()
            if self.peek("<!--"):
                self.skip_until("-->", "comment")
            elif self.peek("<?"):
                self.skip_until("?>", "processing instruction")
            elif self.peek("<!DOCTYPE"):
                self.skip_until(">", "DOCTYPE")
            else:
                return

    def name(self) -> str:
        start = self.pos
        if self.pos >= len(self.text) or self.text[self.pos] not in _NAME_START:
            self.fail("expected a name")
        self.pos += 1
        while self.pos < len(self.text) and self.text[self.pos] in _NAME_CHARS:
            self.pos += 1
        return self.text[start : self.pos]

    def attributes(self) -> None:
        while True:
            self.skip_ws()
            if self.peek(">") or self.peek("/>"):
                return
            self.name()
            self.skip_ws()
            self.expect("=")
            self.skip_ws()
            quote = self.text[self.pos : self.pos + 1]
            if quote not in ("'", '"'):
                self.fail("attribute value must be quoted")
            self.pos += 1
            self.skip_until(quote, "attribute value")

    def char_data(self) -> str:
        out = []
        n = len(self.text)
        while self.pos < n and self.text[self.pos] != "<":
            ch = self.text[self.pos]
            if ch == "&":
                end = self.text.find(";", self.pos)
                ent = self.text[self.pos + 1 : end] if end > 0 else ""
                if ent not in _ENTITIES:
                    self.fail("unsupported entity reference")
                out.append(_ENTITIES[ent])
                self.pos = end + 1
            else:
                out.append(ch)
                self.pos += 1
        return "".join(out)

    def element(self) -> Element:
        open_pos = self.pos
        self.expect("<")
        tag = self.name()
        self.attributes()
        if self.peek("/>"):
            self.pos += 2
            return Element(tag)
        self.expect(">")
        node = Element(tag)
        text = []
        while True:
            if self.pos >= len(self.text):
                self.fail(f"element <{tag}> is never closed", open_pos)
            if self.peek("</"):
                self.pos += 2
                close_pos = self.pos
                closing = self.name()
                if closing != tag:
                    self.fail(f"mismatched closing tag </{closing}> for <{tag}>", close_pos)
                self.skip_ws()
                self.expect(">")
                break
            if self.peek("<!--"):
                self.skip_until("-->", "comment")
            elif self.peek("<?"):
                self.skip_until("?>", "processing instruction")
            elif self.peek("<"):
                node.children.append(self.element())
            else:
                text.append(self.char_data())
        node.text = "".join(text).strip()
        return node


def parse_xml(text: str) -> Element:
    """Parse a document and return its root element."""
    if text.startswith("﻿"):
        text = text[1:]
    reader = _Reader(text)
    reader.skip_misc()
    if not reader.peek("<"):
        reader.fail("expected the root element")
    root = reader.element()
    reader.skip_misc()
    if reader.pos != len(text):
        reader.fail("content after the root element")
    return root
