"""Interactive-component extraction, page words, dialog paths and ranking."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from urllib.parse import urljoin, urlparse

from .dom import (
    HEADING_TAGS,
    RAW_TEXT_ELEMENTS,
    DomTree,
    Element,
    Text,
    extract_text,
)

_TEXT_INPUT_TYPES = {
    "text", "search", "email", "tel", "url", "number", "password",
    "date", "time", "datetime-local", "month", "week",
}

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass
class SelectionInput:
    id: str
    name: str
    options: list[tuple[str, str]]   # (canonical text, value attribute)
    multiple: bool
    doc_order: int = 0


@dataclass
class TextInput:
    id: str
    name: str
    suggested: list[str]
    doc_order: int = 0


@dataclass
class ChoiceGroup:
    id: str                          # id of the first input in the group
    name: str
    kind: str                        # "radio" | "checkbox"
    options: list[tuple[str, str]]   # (label text, value attribute)
    doc_order: int = 0


@dataclass
class Link:
    id: str
    href: str                        # absolute
    text: str
    doc_order: int = 0


@dataclass
class SubmitControl:
    id: str
    form_id: str
    label: str
    doc_order: int = 0


@dataclass
class OutputRegion:
    id: str                          # heading element id
    heading: str
    body: str
    doc_order: int = 0


Component = SelectionInput | TextInput | ChoiceGroup | Link | SubmitControl | OutputRegion

FIELD_KINDS = (SelectionInput, TextInput, ChoiceGroup)


@dataclass
class FormInfo:
    id: str
    action: str
    method: str
    member_ids: list[str]


@dataclass
class PageModel:
    page_url: str
    title: str
    components: list[Component]
    forms: list[FormInfo]
    words: Counter

    def by_id(self, component_id: str) -> Component | None:
        for c in self.components:
            if c.id == component_id:
                return c
        return None


@dataclass
class ShortcutLexicon:
    """Word -> positive weight; words are stored lowercase."""

    entries: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "ShortcutLexicon":
        entries: dict[str, float] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            word, sep, weight = line.partition("\t")
            if not sep:
                raise ValueError(f"lexicon line {lineno}: expected word<TAB>weight")
            value = float(weight.strip())
            if value <= 0:
                raise ValueError(f"lexicon line {lineno}: weight must be positive")
            entries[word.strip().lower()] = value
        return cls(entries)

    def __len__(self):
        return len(self.entries)


@dataclass
class DialogNode:
    kind: str                        # "page" | "form" | "field" | "submit" | "link" | "content"
    ref: str
    weight: float = 0.0
    children: list["DialogNode"] = field(default_factory=list)


@dataclass
class DialogTree:
    root: DialogNode

    def paths(self) -> list[list[DialogNode]]:
        out = []
        stack = [(self.root, [self.root])]
        while stack:
            node, trail = stack.pop()
            if not node.children:
                if node is not self.root:
                    out.append(trail)
                continue
            for child in reversed(node.children):
                stack.append((child, trail + [child]))
        return out


def _tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def extract_words(doc: DomTree) -> Counter:
    """Visible body text tokens, lowercased; script/style excluded."""
    return Counter(_tokenize(extract_text(doc.body)))


def _walk_with_form(body: Element):
    """Document-order elements paired with their outermost enclosing form."""
    stack = [(body, None)]
    while stack:
        node, form = stack.pop()
        yield node, form
        child_form = form
        if node.tag == "form" and form is None:
            child_form = node
        for child in reversed(node.child_elements()):
            stack.append((child, child_form))


def _select_options(select: Element) -> list[tuple[str, str]]:
    options = []
    for el in select.child_elements():
        if el.tag == "option":
            options.append(el)
        elif el.tag == "optgroup":
            options.extend(c for c in el.child_elements() if c.tag == "option")
    out = []
    for opt in options:
        text = extract_text(opt)
        value = opt.attrs.get("value", text)
        out.append((text, value))
    return out


def _label_map(body: Element) -> dict[str, str]:
    labels: dict[str, str] = {}
    for el, _ in _walk_with_form(body):
        if el.tag != "label":
            continue
        text = extract_text(el)
        if not text:
            continue
        target = el.attrs.get("for")
        if not target:
            wrapped = [c for c in el.child_elements() if c.tag in ("input", "select", "textarea")]
            if len(wrapped) == 1:
                target = wrapped[0].attrs.get("id")
        if target and target not in labels:
            labels[target] = text
    return labels


def _datalist_values(doc: DomTree, list_id: str | None) -> list[str]:
    if not list_id:
        return []
    for el, _ in _walk_with_form(doc.body):
        if el.tag == "datalist" and el.attrs.get("id") == list_id:
            return [extract_text(o) for o in el.child_elements()
                    if o.tag == "option" and extract_text(o)]
    return []


def _base_url(doc: DomTree, page_url: str) -> str:
    for el in doc.head.child_elements():
        if el.tag == "base" and el.attrs.get("href"):
            return urljoin(page_url, el.attrs["href"])
    return page_url


def _region_texts(body: Element) -> list[tuple[Element, str]]:
    """Headings paired with the collapsed text that follows until the next one."""
    events: list[tuple[str, object]] = []
    stack: list[object] = [body]
    skip = RAW_TEXT_ELEMENTS | {"select", "textarea", "button", "datalist"}
    while stack:
        node = stack.pop()
        if isinstance(node, Text):
            events.append(("text", node.text))
            continue
        if node.tag in skip:
            continue
        if node.tag in HEADING_TAGS:
            events.append(("heading", node))
            continue
        events.append(("text", " "))  # element boundaries separate words
        stack.extend(reversed(node.children))

    regions = []
    current: Element | None = None
    buf: list[str] = []
    for kind, payload in events:
        if kind == "heading":
            if current is not None:
                regions.append((current, re.sub(r"\s+", " ", "".join(buf)).strip()))
            current = payload
            buf = []
        elif current is not None:
            buf.append(payload)
    if current is not None:
        regions.append((current, re.sub(r"\s+", " ", "".join(buf)).strip()))
    return regions


def extract_components(doc: DomTree, page_url: str) -> PageModel:
    """Pull typed interactive components out of an id-stamped document."""
    body = doc.body
    base = _base_url(doc, page_url)
    labels = _label_map(body)

    ordered: list[tuple[int, Component]] = []
    forms: list[FormInfo] = []
    form_members: dict[str, list[str]] = {}
    groups: dict[tuple[str, str], ChoiceGroup] = {}
    position = 0

    def record(component: Component, form: Element | None):
        ordered.append((position, component))
        if form is not None and not isinstance(component, (Link, OutputRegion)):
            form_members[form.attrs["id"]].append(component.id)

    for el, form in _walk_with_form(body):
        position += 1
        if el.tag == "form" and form is None:
            fid = el.attrs["id"]
            forms.append(FormInfo(
                id=fid,
                action=el.attrs.get("action", ""),
                method=el.attrs.get("method", "get").lower(),
                member_ids=form_members.setdefault(fid, []),
            ))
        elif el.tag == "select":
            record(SelectionInput(
                id=el.attrs["id"],
                name=el.attrs.get("name", ""),
                options=_select_options(el),
                multiple="multiple" in el.attrs,
            ), form)
        elif el.tag == "textarea":
            record(TextInput(id=el.attrs["id"], name=el.attrs.get("name", ""),
                             suggested=[]), form)
        elif el.tag == "input":
            itype = el.attrs.get("type", "text").lower()
            if itype in _TEXT_INPUT_TYPES:
                record(TextInput(
                    id=el.attrs["id"],
                    name=el.attrs.get("name", ""),
                    suggested=_datalist_values(doc, el.attrs.get("list")),
                ), form)
            elif itype in ("radio", "checkbox"):
                key = (form.attrs["id"] if form is not None else "", el.attrs.get("name", ""))
                value = el.attrs.get("value", "on")
                label = labels.get(el.attrs["id"], value)
                group = groups.get((itype,) + key)
                if group is None:
                    group = ChoiceGroup(id=el.attrs["id"], name=key[1], kind=itype,
                                        options=[])
                    groups[(itype,) + key] = group
                    record(group, form)
                group.options.append((label, value))
            elif itype in ("submit", "image"):
                record(SubmitControl(
                    id=el.attrs["id"],
                    form_id=form.attrs["id"] if form is not None else "",
                    label=el.attrs.get("value", "submit"),
                ), form)
        elif el.tag == "button":
            if el.attrs.get("type", "submit").lower() == "submit":
                record(SubmitControl(
                    id=el.attrs["id"],
                    form_id=form.attrs["id"] if form is not None else "",
                    label=extract_text(el) or "submit",
                ), form)
        elif el.tag == "a" and el.attrs.get("href"):
            href = el.attrs["href"].strip()
            resolved = urljoin(base, href)
            if urlparse(resolved).scheme in ("http", "https"):
                record(Link(id=el.attrs["id"], href=resolved, text=extract_text(el)), form)

    for heading, body_text in _region_texts(body):
        position += 1
        ordered.append((position, OutputRegion(
            id=heading.attrs["id"],
            heading=extract_text(heading),
            body=body_text,
        )))

    ordered.sort(key=lambda pair: pair[0])
    components = []
    for index, (_, component) in enumerate(ordered):
        component.doc_order = index
        components.append(component)

    title_el = next((e for e in doc.head.child_elements() if e.tag == "title"), None)
    return PageModel(
        page_url=page_url,
        title=extract_text(title_el) if title_el is not None else "",
        components=components,
        forms=forms,
        words=extract_words(doc),
    )


def build_dialog_tree(model: PageModel, lexicon: ShortcutLexicon | None = None) -> DialogTree:
    """Tree of every dialog path: forms with their fields, links, content."""
    weights = {c.id: w for c, w in _entry_weights(model, lexicon or ShortcutLexicon())}
    root = DialogNode(kind="page", ref=model.page_url)
    by_id = {c.id: c for c in model.components}
    for form in model.forms:
        form_node = DialogNode(kind="form", ref=form.id)
        submit_ref = form.id
        for member_id in form.member_ids:
            component = by_id.get(member_id)
            if isinstance(component, FIELD_KINDS):
                form_node.children.append(DialogNode(kind="field", ref=member_id))
            elif isinstance(component, SubmitControl) and submit_ref == form.id:
                submit_ref = component.id
        form_node.children.append(DialogNode(kind="submit", ref=submit_ref))
        root.children.append(form_node)
    for c in model.components:
        if isinstance(c, Link):
            root.children.append(DialogNode(kind="link", ref=c.id, weight=weights.get(c.id, 0.0)))
    for c in model.components:
        if isinstance(c, OutputRegion):
            root.children.append(DialogNode(kind="content", ref=c.id, weight=weights.get(c.id, 0.0)))
    return DialogTree(root=root)


def _entry_text(component: Component) -> str:
    if isinstance(component, Link):
        return component.text
    if isinstance(component, OutputRegion):
        return f"{component.heading} {component.body}".strip()
    return ""


def _entry_weights(model: PageModel, lexicon: ShortcutLexicon):
    out = []
    for c in model.components:
        if isinstance(c, (Link, OutputRegion)):
            words = set(_tokenize(_entry_text(c)))
            out.append((c, sum(lexicon.entries.get(w, 0.0) for w in words)))
    return out


def rank_entries(model: PageModel, lexicon: ShortcutLexicon) -> list[Component]:
    """Links and output regions, heaviest shortcut weight first, ties in
    document order."""
    weighted = _entry_weights(model, lexicon)
    weighted.sort(key=lambda pair: (-pair[1], pair[0].doc_order))
    return [c for c, _ in weighted]
