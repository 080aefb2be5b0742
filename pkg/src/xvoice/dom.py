"""Tolerant HTML parsing into a small DOM tree with stable element ids."""
from __future__ import annotations

import codecs
import re
from dataclasses import dataclass, field
from html import escape
from html.parser import HTMLParser

VOID_ELEMENTS = {
    "area", "base", "br", "col", "command", "embed", "hr", "img", "input",
    "keygen", "link", "meta", "param", "source", "track", "wbr",
}

RAW_TEXT_ELEMENTS = {"script", "style"}

HEAD_ELEMENTS = {"title", "meta", "link", "base", "style", "script"}

HEADING_TAGS = {"h1", "h2", "h3", "h4", "h5", "h6"}

# Tags that implicitly close certain still-open tags when they start.
_SIBLING_CLOSERS = {
    "p": {"p"},
    "li": {"li"},
    "option": {"option"},
    "optgroup": {"option", "optgroup"},
    "tr": {"tr", "td", "th"},
    "td": {"td", "th"},
    "th": {"td", "th"},
    "dt": {"dt", "dd"},
    "dd": {"dt", "dd"},
}

# Block-level tags close an open <p> first.
_BLOCK_TAGS = {
    "address", "article", "aside", "blockquote", "div", "dl", "fieldset",
    "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr",
    "main", "nav", "ol", "p", "pre", "section", "table", "ul",
}

# Elements that must carry a unique id for the sync mechanism, plus headings
# which anchor readable content regions.
INTERACTIVE_TAGS = {"form", "select", "input", "textarea", "button"}


class EncodingUnsupported(ValueError):
    """A declared or hinted document encoding has no available codec."""


class Text:
    __slots__ = ("text", "parent")

    def __init__(self, text, parent=None):
        self.text = text
        self.parent = parent

    def __repr__(self):  # pragma: no cover - debug helper
        return f"Text({self.text!r})"


class Element:
    __slots__ = ("tag", "attrs", "children", "parent")

    def __init__(self, tag, attrs=None, parent=None):
        self.tag = tag
        self.attrs = attrs if attrs is not None else {}
        self.children = []
        self.parent = parent

    def append(self, node):
        node.parent = self
        self.children.append(node)

    def child_elements(self):
        return [c for c in self.children if isinstance(c, Element)]

    def __repr__(self):  # pragma: no cover - debug helper
        return f"Element({self.tag!r}, {self.attrs!r})"


@dataclass
class DomTree:
    """Parsed document: one <html> root with head and body always present."""

    root: Element
    encoding: str = "utf-8"
    source_bytes: bytes = b""

    @property
    def head(self) -> Element:
        return next(c for c in self.root.child_elements() if c.tag == "head")

    @property
    def body(self) -> Element:
        return next(c for c in self.root.child_elements() if c.tag == "body")


@dataclass
class IdReport:
    """What ensure_ids changed: fresh assignments and collision renames."""

    assigned: list[tuple[str, str]] = field(default_factory=list)
    collisions: list[tuple[str, str]] = field(default_factory=list)


class _TreeBuilder(HTMLParser):
    """Builds an Element tree from the tolerant stdlib tokenizer.

    Recovery policy: html/head/body are synthesized when absent, unmatched
    end tags are dropped, and p/li/option (and table/definition-list
    siblings) auto-close.
    """

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = Element("html")
        self.head_el = None
        self.body_el = None
        self.stack = []       # open elements inside the current section
        self.in_body = False

    # -- section management ------------------------------------------------

    def _ensure_head(self):
        if self.head_el is None:
            self.head_el = Element("head")
            self.root.append(self.head_el)
        return self.head_el

    def _ensure_body(self, attrs=None):
        self._ensure_head()
        if self.body_el is None:
            self.body_el = Element("body", attrs or {})
            self.root.append(self.body_el)
        elif attrs:
            for k, v in attrs.items():
                self.body_el.attrs.setdefault(k, v)
        if not self.in_body:
            self.in_body = True
            self.stack = [self.body_el]
        return self.body_el

    def _cursor(self):
        if self.stack:
            return self.stack[-1]
        if self.in_body:
            return self.body_el
        return self._ensure_head()

    # -- tokenizer callbacks -------------------------------------------------

    def handle_starttag(self, tag, attrs):
        attr_map = {}
        for k, v in attrs:
            if k not in attr_map:
                attr_map[k] = v if v is not None else ""

        if tag == "html":
            for k, v in attr_map.items():
                self.root.attrs.setdefault(k, v)
            return
        if tag == "head":
            self._ensure_head()
            return
        if tag == "body":
            self._ensure_body(attr_map)
            return

        if not self.in_body and tag in HEAD_ELEMENTS:
            parent = self._ensure_head()
            node = Element(tag, attr_map)
            parent.append(node)
            if tag not in VOID_ELEMENTS:
                self.stack.append(node)
            return

        self._ensure_body()
        self._auto_close(tag)
        node = Element(tag, attr_map)
        self._cursor().append(node)
        if tag not in VOID_ELEMENTS:
            self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        self.handle_starttag(tag, attrs)
        if tag not in VOID_ELEMENTS and tag not in ("html", "head", "body"):
            self.handle_endtag(tag)

    def _auto_close(self, tag):
        closers = _SIBLING_CLOSERS.get(tag, set())
        while len(self.stack) > 1 and self.stack[-1].tag in closers:
            self.stack.pop()
        if tag in _BLOCK_TAGS:
            while len(self.stack) > 1 and self.stack[-1].tag == "p":
                self.stack.pop()

    def handle_endtag(self, tag):
        if tag in ("html", "body"):
            return
        if tag == "head":
            # closing head just means subsequent content opens the body
            if self.stack and not self.in_body:
                self.stack = []
            return
        limit = 1 if self.in_body else 0
        for i in range(len(self.stack) - 1, limit - 1, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return
        # unmatched end tag: ignored

    def handle_data(self, data):
        if not data:
            return
        if not self.in_body:
            cursor = self.stack[-1] if self.stack else None
            if cursor is not None:
                cursor.append(Text(data))
                return
            if data.strip() == "":
                return
            self._ensure_body()
        self._cursor().append(Text(data))

    def unknown_decl(self, data):
        if data.startswith("CDATA["):
            self.handle_data(data[len("CDATA["):])

    def finish(self) -> Element:
        self._ensure_head()
        if self.body_el is None:
            self.body_el = Element("body")
            self.root.append(self.body_el)
        return self.root


_XML_DECL_RE = re.compile(rb'<\?xml[^>]*?encoding\s*=\s*["\']([A-Za-z0-9._:-]+)["\']', re.I)
_META_CHARSET_RE = re.compile(rb'<meta[^>]*?charset\s*=\s*["\']?([A-Za-z0-9._:-]+)', re.I)


def _declared_encoding(data: bytes) -> str | None:
    prefix = data[:2048]
    m = _XML_DECL_RE.search(prefix) or _META_CHARSET_RE.search(prefix)
    if m:
        return m.group(1).decode("ascii", "replace").lower()
    return None


def parse_html(data: bytes | str, encoding_hint: str | None = None) -> DomTree:
    """Parse arbitrary HTML bytes into a DomTree; never fails on bad markup.

    Encoding is resolved hint > document-declared > UTF-8. An unsupported
    declared or hinted label raises EncodingUnsupported.
    """
    if isinstance(data, str):
        text = data
        label = (encoding_hint or "utf-8").lower()
        try:
            codecs.lookup(label)
        except LookupError:
            raise EncodingUnsupported(f"unsupported encoding: {label}") from None
        source = data.encode("utf-8", "replace")
    else:
        source = data
        if data[:3] == b"\xef\xbb\xbf":
            data = data[3:]
            declared = _declared_encoding(data) or "utf-8"
        elif data[:2] in (b"\xff\xfe", b"\xfe\xff"):
            declared = "utf-16"
        else:
            declared = _declared_encoding(data)
        label = (encoding_hint or declared or "utf-8").lower()
        try:
            codec = codecs.lookup(label)
        except LookupError:
            raise EncodingUnsupported(f"unsupported encoding: {label}") from None
        text = data.decode(codec.name, errors="replace")

    builder = _TreeBuilder()
    try:
        builder.feed(text)
        builder.close()
    except Exception:
        # tokenizer hiccup on hostile input: keep whatever tree we built
        pass
    return DomTree(root=builder.finish(), encoding=label, source_bytes=source)


def iter_elements(root: Element):
    """All elements under (and including) root, in document order."""
    stack = [root]
    while stack:
        node = stack.pop()
        if isinstance(node, Element):
            yield node
            stack.extend(reversed(node.children))


def _walk_with_paths(root: Element):
    stack = [(root, "/html[1]")]
    while stack:
        node, path = stack.pop()
        yield node, path
        counts: dict[str, int] = {}
        entries = []
        for child in node.children:
            if not isinstance(child, Element):
                continue
            counts[child.tag] = counts.get(child.tag, 0) + 1
            entries.append((child, f"{path}/{child.tag}[{counts[child.tag]}]"))
        stack.extend(reversed(entries))


def _needs_id(el: Element) -> bool:
    if el.tag in INTERACTIVE_TAGS or el.tag in HEADING_TAGS:
        return True
    return el.tag == "a" and "href" in el.attrs


def ensure_ids(doc: DomTree) -> tuple[DomTree, IdReport]:
    """Give every interactive element (and heading) a unique document id.

    Deterministic and idempotent: fresh ids follow xv-auto-<n> in document
    order and duplicate ids are renamed <orig>-dup-<k>.
    """
    report = IdReport()
    used = set()
    for el in iter_elements(doc.root):
        val = el.attrs.get("id")
        if val:
            used.add(val)

    seen = set()
    counter = 1
    for el, path in _walk_with_paths(doc.root):
        if not isinstance(el, Element):
            continue
        val = el.attrs.get("id")
        if val:
            if val in seen:
                k = 1
                while f"{val}-dup-{k}" in used:
                    k += 1
                renamed = f"{val}-dup-{k}"
                el.attrs["id"] = renamed
                used.add(renamed)
                seen.add(renamed)
                report.collisions.append((val, renamed))
            else:
                seen.add(val)
        elif _needs_id(el):
            while f"xv-auto-{counter}" in used:
                counter += 1
            new_id = f"xv-auto-{counter}"
            counter += 1
            el.attrs["id"] = new_id
            used.add(new_id)
            seen.add(new_id)
            report.assigned.append((path, new_id))
    return doc, report


def extract_text(node: Element | Text) -> str:
    """Visible descendant text, whitespace-collapsed; script/style excluded."""
    parts = []
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Text):
            parts.append(n.text)
        elif isinstance(n, Element):
            if n.tag in RAW_TEXT_ELEMENTS:
                continue
            stack.extend(reversed(n.children))
    return re.sub(r"\s+", " ", "".join(parts)).strip()


def element_ids(doc: DomTree) -> dict[str, Element]:
    out = {}
    for el in iter_elements(doc.root):
        val = el.attrs.get("id")
        if val and val not in out:
            out[val] = el
    return out


def clone_tree(doc: DomTree) -> DomTree:
    """Deep structural copy (iterative; safe on very deep trees)."""
    new_root = Element(doc.root.tag, dict(doc.root.attrs))
    stack = [(doc.root, new_root)]
    while stack:
        old, new = stack.pop()
        for child in old.children:
            if isinstance(child, Text):
                new.append(Text(child.text))
            else:
                copy = Element(child.tag, dict(child.attrs))
                new.append(copy)
                stack.append((child, copy))
    return DomTree(root=new_root, encoding=doc.encoding, source_bytes=doc.source_bytes)


def _escape_attr(value: str) -> str:
    return escape(value, quote=True)


def serialize_html(doc: DomTree) -> bytes:
    """Re-serialize the tree as HTML in the document's encoding.

    parse_html(serialize_html(doc)) is structurally identical to doc.
    """
    out = []
    stack = [("open", doc.root)]
    while stack:
        action, node = stack.pop()
        if action == "close":
            out.append(f"</{node.tag}>")
            continue
        if isinstance(node, Text):
            parent = node.parent
            if parent is not None and parent.tag in RAW_TEXT_ELEMENTS:
                out.append(node.text)
            else:
                out.append(escape(node.text, quote=False))
            continue
        attrs = "".join(f' {k}="{_escape_attr(v)}"' for k, v in node.attrs.items())
        if node.tag in VOID_ELEMENTS:
            out.append(f"<{node.tag}{attrs}>")
            continue
        out.append(f"<{node.tag}{attrs}>")
        stack.append(("close", node))
        for child in reversed(node.children):
            stack.append(("open", child))
    return "".join(out).encode(doc.encoding, errors="xmlcharrefreplace")


def tree_equal(a: Element, b: Element) -> bool:
    """Structural equality: tags, attributes, whitespace-normalized text."""

    def significant(children):
        out = []
        buf = []

        def flush():
            if buf:
                collapsed = re.sub(r"\s+", " ", "".join(buf)).strip()
                if collapsed:
                    out.append(collapsed)
                buf.clear()

        for c in children:
            if isinstance(c, Text):
                buf.append(c.text)
            else:
                flush()
                out.append(c)
        flush()
        return out

    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if x.tag != y.tag or x.attrs != y.attrs:
            return False
        xc, yc = significant(x.children), significant(y.children)
        if len(xc) != len(yc):
            return False
        for cx, cy in zip(xc, yc):
            if isinstance(cx, str) or isinstance(cy, str):
                if cx != cy:
                    return False
            else:
                stack.append((cx, cy))
    return True
