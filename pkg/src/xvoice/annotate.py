"""Assemble XHTML+Voice documents: voice forms, verification, sync, links."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from html import escape
from urllib.parse import parse_qs, quote, urljoin, urlparse

from .dom import (
    VOID_ELEMENTS,
    DomTree,
    Element,
    IdReport,
    Text,
    clone_tree,
    element_ids,
    ensure_ids,
    iter_elements,
    parse_html,
)
from .jsgf import (
    EmptyGrammar,
    JsgfGrammar,
    content_grammar,
    grammar_for_links,
    grammar_for_options,
    sanitize_identifier,
    serialize_jsgf,
    shortcut_grammar,
    yes_no_grammar,
)
from .page import (
    ChoiceGroup,
    Link,
    OutputRegion,
    PageModel,
    SelectionInput,
    ShortcutLexicon,
    SubmitControl,
    TextInput,
    build_dialog_tree,
    extract_components,
    rank_entries,
)

XHTML_NS = "http://www.w3.org/1999/xhtml"
VXML_NS = "http://www.w3.org/2001/vxml"
EV_NS = "http://www.w3.org/2001/xml-events"
XV_NS = "http://www.voicexml.org/2002/xhtml+voice"

XV_DOCTYPE = (
    '<!DOCTYPE html PUBLIC "-//VoiceXML Forum//DTD XHTML+Voice 1.2//EN" '
    '"http://www.voicexml.org/specs/multimodal/x+v/12/dtd/xhtml+voice12.dtd">'
)

NAMESPACE_ATTRS = {
    "xmlns": XHTML_NS,
    "xmlns:vxml": VXML_NS,
    "xmlns:ev": EV_NS,
    "xmlns:xv": XV_NS,
}

_VOICE_PREFIXES = ("vxml:", "xv:", "ev:")


class NotVoiceEligible(ValueError):
    """The component has no grammar and cannot be voiced."""


class DanglingTarget(ValueError):
    """A sync binding points at an input id missing from the document."""


@dataclass
class AnnotationConfig:
    verification: bool = True
    encoding_override: str | None = None
    middleware_base: str | None = None


@dataclass
class VoiceField:
    field_name: str
    target_input_id: str
    modal: bool
    grammar: JsgfGrammar
    prompt_text: str
    bargein: bool
    noinput_text: str
    nomatch_text: str


@dataclass
class VerificationUnit:
    for_field: str
    confirm_field_name: str
    confirm_prompt_template: str = "You said {value}. Is that correct?"


@dataclass
class SyncBinding:
    field_ref: str     # "#voice_<input>_name"
    input_id: str


@dataclass
class AnnotationReport:
    page_url: str = ""
    voiced: list[tuple[str, str]] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    passthrough: bool = False
    middleware_base: str | None = None
    html_attrs_added: list[str] = field(default_factory=list)
    link_rewrites: dict[str, str] = field(default_factory=dict)  # element id -> original href
    id_report: IdReport = field(default_factory=IdReport)


@dataclass
class AnnotatedDocument:
    tree: DomTree
    report: AnnotationReport
    passthrough_bytes: bytes | None = None

    @property
    def encoding(self) -> str:
        return self.tree.encoding


def _humanize(name: str) -> str:
    spaced = re.sub(r"([a-z0-9])([A-Z])", r"\1 \2", name)
    spaced = re.sub(r"[_\-]+", " ", spaced)
    return re.sub(r"\s+", " ", spaced).strip().lower()


_AUTO_ID_RE = re.compile(r"^xv-auto-\d+$")


def make_voice_field(c, g: JsgfGrammar) -> VoiceField:
    """Voice field for a component: prompt and catch texts derive from the
    element's name (or id), selection inputs are modal."""
    if g is None:
        raise NotVoiceEligible(f"component {getattr(c, 'id', c)!r} has no grammar")
    name = getattr(c, "name", "") or ""
    if not name and _AUTO_ID_RE.match(c.id):
        prompt = "Please say your selection."
    else:
        prompt = f"Please say the {_humanize(name or c.id)}."
    return VoiceField(
        field_name=f"voice_{c.id}_name",
        target_input_id=c.id,
        modal=isinstance(c, (SelectionInput, ChoiceGroup)),
        grammar=g,
        prompt_text=prompt,
        bargein=True,
        noinput_text=f"Sorry, I did not hear you. {prompt}",
        nomatch_text=f"Sorry, I did not understand you. {prompt}",
    )


def make_verification_unit(f: VoiceField) -> VerificationUnit:
    return VerificationUnit(
        for_field=f.field_name,
        confirm_field_name=f"{f.field_name}_confirm",
    )


def make_sync(f: VoiceField, doc: DomTree, known_ids: set[str] | None = None) -> SyncBinding:
    if known_ids is None:
        known_ids = set(element_ids(doc))
    if f.target_input_id not in known_ids:
        raise DanglingTarget(f"input id {f.target_input_id!r} not in document")
    return SyncBinding(field_ref=f"#{f.field_name}", input_id=f.target_input_id)


def rewrite_links(doc: DomTree, middleware_base: str, page_url: str,
                  rewrites: dict[str, str] | None = None) -> DomTree:
    """Point every http(s) anchor back through the middleware's /annotate
    endpoint; other schemes and fragments stay untouched."""
    base = middleware_base.rstrip("/")
    effective = page_url
    for el in doc.head.child_elements():
        if el.tag == "base" and el.attrs.get("href"):
            effective = urljoin(page_url, el.attrs["href"])
    prefix = f"{base}/annotate?url="
    for el in iter_elements(doc.body):
        if el.tag != "a" or not el.attrs.get("href"):
            continue
        href = el.attrs["href"].strip()
        if href.startswith("#") or href.startswith(prefix):
            continue
        resolved = urljoin(effective, href)
        if urlparse(resolved).scheme not in ("http", "https"):
            continue
        el.attrs["href"] = prefix + quote(resolved, safe="")
        if rewrites is not None and el.attrs.get("id"):
            rewrites[el.attrs["id"]] = href
    return doc


def _component_grammar(c, lexicon: ShortcutLexicon, page_words, charset: str):
    """Grammar for a field component, or (None, reason) when not voiceable."""
    name = sanitize_identifier(getattr(c, "name", "") or c.id)
    if isinstance(c, SelectionInput):
        texts = [t for t, _ in c.options if t.strip()]
        if not texts:
            return None, "selection input has no speakable options"
        return grammar_for_options(name, texts, c.multiple, charset=charset), None
    if isinstance(c, ChoiceGroup):
        labels = [label for label, _ in c.options if label.strip()]
        if not labels:
            return None, "choice group has no speakable labels"
        return grammar_for_options(name, labels, c.kind == "checkbox", charset=charset), None
    if isinstance(c, TextInput):
        if c.suggested:
            return grammar_for_options(name, c.suggested, False, charset=charset), None
        matched = [w for w in lexicon.entries if page_words.get(w)]
        if matched:
            return grammar_for_options(name, matched, False, charset=charset), None
        return None, "open text input without suggested values"
    return None, "component kind is not a voice field"


@dataclass
class _FormPlan:
    html_form_id: str
    voice_form_id: str
    fields: list[VoiceField]
    verifications: list[VerificationUnit]
    submit_field_name: str


@dataclass
class _VoicePlan:
    forms: list[_FormPlan]
    nav_grammars: list[JsgfGrammar]
    nav_form_id: str | None
    voiced: list[tuple[str, str]]
    skipped: list[tuple[str, str]]


def _unique_id(candidate: str, used: set[str]) -> str:
    if candidate not in used:
        used.add(candidate)
        return candidate
    n = 2
    while f"{candidate}_{n}" in used:
        n += 1
    used.add(f"{candidate}_{n}")
    return f"{candidate}_{n}"


def _build_plan(doc: DomTree, model: PageModel, dialog_tree, lexicon: ShortcutLexicon,
                config: AnnotationConfig) -> _VoicePlan:
    charset = doc.encoding
    used = set(element_ids(doc))
    by_id = {c.id: c for c in model.components}
    in_form = {cid for f in model.forms for cid in f.member_ids}

    voiced: list[tuple[str, str]] = []
    skipped: list[tuple[str, str]] = []
    forms: list[_FormPlan] = []

    for form_node in dialog_tree.root.children:
        if form_node.kind != "form":
            continue
        html_form_id = form_node.ref
        fields: list[VoiceField] = []
        for child in form_node.children:
            if child.kind != "field":
                continue
            c = by_id[child.ref]
            grammar, reason = _component_grammar(c, lexicon, model.words, charset)
            if grammar is None:
                skipped.append((c.id, reason))
                continue
            voice_field = make_voice_field(c, grammar)
            voice_field.field_name = _unique_id(voice_field.field_name, used)
            fields.append(voice_field)
            voiced.append((c.id, voice_field.field_name))
        if not fields:
            skipped.append((html_form_id, "form has no voiceable fields"))
            continue
        voice_form_id = _unique_id(f"{html_form_id}_form", used)
        verifications = [make_verification_unit(f) for f in fields] if config.verification else []
        for unit in verifications:
            used.add(unit.confirm_field_name)
        submit_field_name = _unique_id(f"voice_{html_form_id}_submit", used)
        forms.append(_FormPlan(html_form_id, voice_form_id, fields,
                               verifications, submit_field_name))

    for c in model.components:
        if c.id in in_form or not isinstance(c, (SelectionInput, TextInput, ChoiceGroup)):
            continue
        grammar, reason = _component_grammar(c, lexicon, model.words, charset)
        skipped.append((c.id, reason if grammar is None else "input outside any form"))

    for c in model.components:
        if isinstance(c, SubmitControl):
            skipped.append((c.id, "submit handled by the form confirmation field"))

    ranked = rank_entries(model, lexicon)
    links = [c for c in ranked if isinstance(c, Link)]
    regions = [c for c in ranked if isinstance(c, OutputRegion)]
    nav_grammars = []
    for g in (grammar_for_links(links, charset=charset),
              shortcut_grammar(ranked, lexicon, charset=charset),
              content_grammar(regions, charset=charset)):
        if g is not None:
            nav_grammars.append(g)
    nav_form_id = _unique_id("voice_nav_form", used) if nav_grammars else None
    return _VoicePlan(forms, nav_grammars, nav_form_id, voiced, skipped)


# -- markup construction -------------------------------------------------------

def _el(tag: str, attrs: dict[str, str] | None = None, *children) -> Element:
    node = Element(tag, attrs or {})
    for child in children:
        node.append(child if isinstance(child, (Element, Text)) else Text(str(child)))
    return node


def _grammar_el(g: JsgfGrammar) -> Element:
    return _el("vxml:grammar", None, Text("\n" + serialize_jsgf(g)))


def _catch_els(noinput: str, nomatch: str) -> list[Element]:
    return [
        _el("vxml:catch", {"event": "noinput"}, noinput),
        _el("vxml:catch", {"event": "nomatch"}, nomatch),
    ]


def _field_el(f: VoiceField) -> Element:
    attrs = {"name": f.field_name, "xv:id": f.field_name}
    if f.modal:
        attrs["modal"] = "true"
    return _el(
        "vxml:field", attrs,
        _grammar_el(f.grammar),
        _el("vxml:prompt", {"bargein": "true" if f.bargein else "false"}, f.prompt_text),
        *_catch_els(f.noinput_text, f.nomatch_text),
    )


def _confirm_field_el(unit: VerificationUnit, charset: str) -> Element:
    prefix, _, suffix = unit.confirm_prompt_template.partition("{value}")
    name = unit.confirm_field_name
    return _el(
        "vxml:field", {"name": name, "xv:id": name, "modal": "true"},
        _grammar_el(yes_no_grammar(charset=charset)),
        _el("vxml:prompt", {"bargein": "true"},
            Text(prefix), _el("vxml:value", {"expr": unit.for_field}), Text(suffix)),
        *_catch_els("Sorry, I did not hear you. Please say yes or no.",
                    "Sorry, I did not understand you. Please say yes or no."),
        _el("vxml:filled", None,
            _el("vxml:if", {"cond": f"{name} == 'no'"},
                _el("vxml:clear", {"namelist": f"{unit.for_field} {name}"}))),
    )


def _submit_field_el(plan: _FormPlan, charset: str) -> Element:
    name = plan.submit_field_name
    prompt = "Do you want to submit the form?"
    return _el(
        "vxml:field", {"name": name, "xv:id": name, "modal": "true"},
        _grammar_el(yes_no_grammar(charset=charset)),
        _el("vxml:prompt", {"bargein": "true"}, prompt),
        *_catch_els("Sorry, I did not hear you. Please say yes or no.",
                    "Sorry, I did not understand you. Please say yes or no."),
        _el("vxml:filled", None,
            _el("vxml:if", {"cond": f"{name} == 'yes'"},
                _el("vxml:submit", {"next": f"#{plan.html_form_id}"})),
            _el("vxml:if", {"cond": f"{name} == 'no'"},
                _el("vxml:clear", {"namelist": name}))),
    )


def _nav_form_el(plan: _VoicePlan) -> Element:
    prompt = "Please say where to go."
    children = [_grammar_el(g) for g in plan.nav_grammars]
    children.append(_el("vxml:prompt", {"bargein": "true"}, prompt))
    children.extend(_catch_els(f"Sorry, I did not hear you. {prompt}",
                               f"Sorry, I did not understand you. {prompt}"))
    nav_field = _el("vxml:field", {"name": "voice_nav_name", "xv:id": "voice_nav_name"},
                    *children)
    return _el("vxml:form", {"id": plan.nav_form_id}, Text("\n"), nav_field, Text("\n"))


def annotate_document(doc: DomTree, model: PageModel, tree, lexicon: ShortcutLexicon,
                      config: AnnotationConfig | None = None) -> AnnotatedDocument:
    """Produce the X+V document: voice forms and syncs in head, namespaces on
    the root, links proxied. Already-annotated input passes through."""
    config = config or AnnotationConfig()
    report = AnnotationReport(page_url=model.page_url,
                              middleware_base=config.middleware_base)

    if "xmlns:xv" in doc.root.attrs:
        report.passthrough = True
        report.notes.append("passthrough: document already carries voice markup")
        return AnnotatedDocument(tree=doc, report=report,
                                 passthrough_bytes=doc.source_bytes)

    work = clone_tree(doc)
    if config.middleware_base:
        rewrite_links(work, config.middleware_base, model.page_url, report.link_rewrites)

    plan = _build_plan(work, model, tree, lexicon, config)
    report.voiced = plan.voiced
    report.skipped = plan.skipped

    head = work.head
    ids = element_ids(work)

    for form_plan in plan.forms:
        children: list = [Text("\n")]
        for voice_field in form_plan.fields:
            children.extend([_field_el(voice_field), Text("\n")])
        for unit in form_plan.verifications:
            children.extend([_confirm_field_el(unit, work.encoding), Text("\n")])
        children.extend([_submit_field_el(form_plan, work.encoding), Text("\n")])
        head.append(Text("\n"))
        head.append(_el("vxml:form", {"id": form_plan.voice_form_id}, *children))
        for voice_field in form_plan.fields:
            target = ids.get(voice_field.target_input_id)
            if target is not None:
                target.attrs["ev:event"] = "DOMFocusIn"
                target.attrs["ev:handler"] = f"#{form_plan.voice_form_id}"

    if plan.nav_form_id:
        head.append(Text("\n"))
        head.append(_nav_form_el(plan))
        work.body.attrs["ev:event"] = "load"
        work.body.attrs["ev:handler"] = f"#{plan.nav_form_id}"

    sync_count = 0
    known_ids = set(ids)
    for form_plan in plan.forms:
        for voice_field in form_plan.fields:
            binding = make_sync(voice_field, work, known_ids)
            head.append(Text("\n"))
            head.append(_el("xv:sync", {"xv:field": binding.field_ref,
                                        "xv:input": binding.input_id}))
            sync_count += 1
    if sync_count or plan.nav_form_id:
        head.append(Text("\n"))
    else:
        report.notes.append("no voice content")

    original_attrs = work.root.attrs
    merged = dict(NAMESPACE_ATTRS)
    lang = original_attrs.get("xml:lang") or original_attrs.get("lang") or "en-US"
    merged["xml:lang"] = lang
    for key, value in original_attrs.items():
        if key.startswith("xmlns") or key == "xml:lang":
            continue
        merged[key] = value
    report.html_attrs_added = [k for k in (*NAMESPACE_ATTRS, "xml:lang")
                               if k not in original_attrs]
    work.root.attrs = merged
    return AnnotatedDocument(tree=work, report=report)


# -- serialization -------------------------------------------------------------

def _escape_attr(value: str) -> str:
    return value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _cdata(text: str) -> str:
    return "<![CDATA[" + text.replace("]]>", "]]]]><![CDATA[>") + "]]>"


def _serialize_element(root: Element) -> str:
    out = []
    stack = [("open", root)]
    while stack:
        action, node = stack.pop()
        if action == "close":
            out.append(f"</{node.tag}>")
            continue
        if isinstance(node, Text):
            parent = node.parent
            if parent is not None and parent.tag == "vxml:grammar":
                out.append(_cdata(node.text))
            else:
                out.append(escape(node.text, quote=False))
            continue
        attrs = "".join(f' {k}="{_escape_attr(v)}"' for k, v in node.attrs.items())
        if not node.children and (node.tag in VOID_ELEMENTS or ":" in node.tag):
            out.append(f"<{node.tag}{attrs} />")
            continue
        out.append(f"<{node.tag}{attrs}>")
        stack.append(("close", node))
        for child in reversed(node.children):
            stack.append(("open", child))
    return "".join(out)


def serialize_xv(a: AnnotatedDocument) -> bytes:
    """Deterministic X+V bytes: XML declaration, the X+V DOCTYPE, then the
    namespaced document in its source encoding."""
    if a.passthrough_bytes is not None:
        return a.passthrough_bytes
    enc = a.encoding
    text = (
        f'<?xml version="1.0" encoding="{enc}"?>\n'
        f"{XV_DOCTYPE}\n"
        f"{_serialize_element(a.tree.root)}\n"
    )
    return text.encode(enc, errors="xmlcharrefreplace")


# -- pipeline and helpers --------------------------------------------------------

def annotate_bytes(data: bytes, page_url: str, lexicon: ShortcutLexicon | None = None,
                   config: AnnotationConfig | None = None) -> tuple[bytes, AnnotationReport]:
    """One-shot pipeline: parse, id, extract, plan, annotate, serialize."""
    config = config or AnnotationConfig()
    lexicon = lexicon or ShortcutLexicon()
    doc = parse_html(data, encoding_hint=config.encoding_override)
    doc, id_report = ensure_ids(doc)
    model = extract_components(doc, page_url)
    dialog_tree = build_dialog_tree(model, lexicon)
    annotated = annotate_document(doc, model, dialog_tree, lexicon, config)
    annotated.report.id_report = id_report
    return serialize_xv(annotated), annotated.report


def page_grammars(data: bytes, page_url: str, lexicon: ShortcutLexicon | None = None,
                  config: AnnotationConfig | None = None) -> list[tuple[str, JsgfGrammar]]:
    """Every grammar the annotator would embed, labeled by what it serves."""
    config = config or AnnotationConfig()
    lexicon = lexicon or ShortcutLexicon()
    doc = parse_html(data, encoding_hint=config.encoding_override)
    doc, _ = ensure_ids(doc)
    model = extract_components(doc, page_url)
    dialog_tree = build_dialog_tree(model, lexicon)
    plan = _build_plan(doc, model, dialog_tree, lexicon, config)
    out = []
    for form_plan in plan.forms:
        for voice_field in form_plan.fields:
            out.append((f"field {voice_field.field_name}", voice_field.grammar))
    for g in plan.nav_grammars:
        out.append((f"navigation {g.name}", g))
    return out


def error_document(message: str, encoding: str = "utf-8") -> bytes:
    """Minimal X+V page whose voice prompt reads a failure message."""
    root = _el("html", dict(NAMESPACE_ATTRS, **{"xml:lang": "en-US"}),
               _el("head", None,
                   _el("title", None, "Annotation error"),
                   _el("vxml:form", {"id": "error_form"},
                       _el("vxml:block", None,
                           _el("vxml:prompt", {"bargein": "true"}, message)))),
               _el("body", None, _el("p", None, message)))
    tree = DomTree(root=root, encoding=encoding)
    return serialize_xv(AnnotatedDocument(tree=tree, report=AnnotationReport()))


def strip_annotations(a: AnnotatedDocument) -> DomTree:
    """Reverse the annotation: drop voice markup, restore link hrefs,
    remove generated ids and undo collision renames."""
    work = clone_tree(a.tree)
    report = a.report

    for el in iter_elements(work.root):
        el.children = [c for c in el.children
                       if not (isinstance(c, Element) and c.tag.startswith(_VOICE_PREFIXES))]
        for key in [k for k in el.attrs if k.startswith(("xv:", "ev:"))]:
            del el.attrs[key]

    for key in report.html_attrs_added:
        work.root.attrs.pop(key, None)
    for key in [k for k in work.root.attrs if k.startswith("xmlns:")]:
        if key in ("xmlns:vxml", "xmlns:ev", "xmlns:xv"):
            del work.root.attrs[key]

    ids = element_ids(work)
    for element_id, original_href in report.link_rewrites.items():
        el = ids.get(element_id)
        if el is not None:
            el.attrs["href"] = original_href

    assigned = {new for _, new in report.id_report.assigned}
    renames = {new: old for old, new in report.id_report.collisions}
    for el in iter_elements(work.root):
        val = el.attrs.get("id")
        if not val:
            continue
        if val in assigned:
            del el.attrs["id"]
        elif val in renames:
            el.attrs["id"] = renames[val]
    return work


def unrewrite_href(href: str, middleware_base: str) -> str | None:
    """Absolute upstream URL hidden inside a proxied href, if any."""
    base = middleware_base.rstrip("/")
    if not href.startswith(f"{base}/annotate?"):
        return None
    query = parse_qs(urlparse(href).query)
    values = query.get("url")
    return values[0] if values else None
