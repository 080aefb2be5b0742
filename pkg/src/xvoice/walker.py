"""Text-mode interpreter for X+V documents: dialog stepping with GUI sync."""
from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .jsgf import JsgfGrammar, Match, match_utterance, parse_jsgf

XH = "{http://www.w3.org/1999/xhtml}"
VX = "{http://www.w3.org/2001/vxml}"
XV = "{http://www.voicexml.org/2002/xhtml+voice}"

_HEADINGS = {"h1", "h2", "h3", "h4", "h5", "h6"}
_SKIP_TEXT = {"script", "style", "select", "textarea", "button", "datalist"}
_DATA_INPUT_TYPES_EXCLUDED = {"submit", "image", "button", "reset"}

_COND_RE = re.compile(r"^\s*([\w\-]+)\s*==\s*'([^']*)'\s*$")


class MalformedDocument(ValueError):
    pass


class DanglingSync(ValueError):
    pass


class UnknownInputId(KeyError):
    pass


@dataclass
class Voice:
    utterance: str


@dataclass
class Gui:
    input_id: str
    value: str | list[str]


@dataclass
class Silence:
    pass


WalkEvent = Voice | Gui | Silence


def _local(tag) -> str:
    if isinstance(tag, str) and tag.startswith("{"):
        return tag.rsplit("}", 1)[1]
    return tag if isinstance(tag, str) else ""


def _collapse(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


@dataclass
class _Field:
    name: str
    form_id: str
    modal: bool
    bargein: bool
    grammars: list[JsgfGrammar]
    prompt_parts: list          # str | ("value", field name)
    noinput: str
    nomatch: str
    kind: str = "data"          # data | confirm | submit | nav
    sync_input: str | None = None
    confirm_target: str | None = None
    clear_on: dict[str, list[str]] = field(default_factory=dict)   # value -> namelist
    submit_form: str | None = None
    submit_on: str | None = None


@dataclass
class DialogMachine:
    fields: dict[str, _Field]
    form_order: list[str]
    form_fields: dict[str, list[str]]
    state: dict[str, tuple[str, object]]
    gui: dict[str, object]
    input_to_field: dict[str, str]
    anchors: dict[str, str]
    html_form_inputs: dict[str, list[str]]
    known_inputs: set[str]
    body: ET.Element | None
    prompt_log: list[str] = field(default_factory=list)
    pending: tuple | None = None
    submitted: set[str] = field(default_factory=set)

    def confirm_of(self, name: str) -> str | None:
        for f in self.fields.values():
            if f.kind == "confirm" and f.confirm_target == name:
                return f.name
        return None


def _parse_prompt(prompt_el) -> list:
    parts: list = []
    if prompt_el is None:
        return parts
    if prompt_el.text:
        parts.append(re.sub(r"\s+", " ", prompt_el.text))
    for child in prompt_el:
        if _local(child.tag) == "value":
            parts.append(("value", child.attrib.get("expr", "")))
        if child.tail:
            parts.append(re.sub(r"\s+", " ", child.tail))
    return parts


def _parse_field(field_el, form_id: str) -> _Field:
    name = field_el.attrib.get("name", "")
    grammars = []
    for g in field_el.findall(f"{VX}grammar"):
        if g.text and g.text.strip():
            grammars.append(parse_jsgf(g.text.strip()))
    catches = {c.attrib.get("event", ""): _collapse("".join(c.itertext()))
               for c in field_el.findall(f"{VX}catch")}
    prompt_el = field_el.find(f"{VX}prompt")
    parsed = _Field(
        name=name,
        form_id=form_id,
        modal=field_el.attrib.get("modal") == "true",
        bargein=prompt_el is None or prompt_el.attrib.get("bargein") != "false",
        grammars=grammars,
        prompt_parts=_parse_prompt(prompt_el),
        noinput=catches.get("noinput", ""),
        nomatch=catches.get("nomatch", ""),
    )
    filled = field_el.find(f"{VX}filled")
    if filled is not None:
        for if_el in filled.findall(f"{VX}if"):
            m = _COND_RE.match(if_el.attrib.get("cond", ""))
            if not m or m.group(1) != name:
                continue
            on_value = m.group(2)
            clear = if_el.find(f"{VX}clear")
            if clear is not None:
                parsed.clear_on[on_value] = clear.attrib.get("namelist", "").split()
            submit = if_el.find(f"{VX}submit")
            if submit is not None:
                parsed.submit_on = on_value
                parsed.submit_form = submit.attrib.get("next", "").lstrip("#")
    return parsed


def _classify(parsed: _Field, sync_map: dict[str, str]):
    if parsed.submit_form:
        parsed.kind = "submit"
        return
    for namelist in parsed.clear_on.values():
        others = [n for n in namelist if n != parsed.name]
        if others:
            parsed.kind = "confirm"
            parsed.confirm_target = others[0]
            return
    if parsed.name in sync_map:
        parsed.kind = "data"
        parsed.sync_input = sync_map[parsed.name]
    else:
        parsed.kind = "nav"


def _initial_gui_value(el) -> object:
    tag = _local(el.tag)
    if tag == "select":
        selected = ["".join(o.itertext()) for o in el.iter()
                    if _local(o.tag) == "option" and "selected" in o.attrib]
        selected = [_collapse(s) for s in selected]
        if "multiple" in el.attrib:
            return selected
        return selected[0] if selected else ""
    if tag == "textarea":
        return _collapse("".join(el.itertext()))
    if tag == "input":
        itype = el.attrib.get("type", "text").lower()
        if itype in ("radio", "checkbox"):
            return el.attrib.get("value", "on") if "checked" in el.attrib else ""
        return el.attrib.get("value", "")
    return ""


def load_machine(data: bytes | str) -> DialogMachine:
    """Parse an X+V document into an executable dialog machine and queue the
    first active field's prompt."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedDocument(str(exc)) from None

    head = next((c for c in root if _local(c.tag) == "head"), None)
    body = next((c for c in root if _local(c.tag) == "body"), None)
    if _local(root.tag) != "html" or body is None:
        raise MalformedDocument("not an XHTML document with a body")

    sync_map: dict[str, str] = {}
    sync_elements = list(head.findall(f"{XV}sync")) if head is not None else []
    for sync in sync_elements:
        ref = sync.attrib.get(f"{XV}field", "")
        sync_map[ref.lstrip("#")] = sync.attrib.get(f"{XV}input", "")

    fields: dict[str, _Field] = {}
    form_order: list[str] = []
    form_fields: dict[str, list[str]] = {}
    if head is not None:
        for form_el in head.findall(f"{VX}form"):
            form_id = form_el.attrib.get("id", f"form{len(form_order)}")
            form_order.append(form_id)
            form_fields[form_id] = []
            for field_el in form_el.findall(f"{VX}field"):
                parsed = _parse_field(field_el, form_id)
                _classify(parsed, sync_map)
                fields[parsed.name] = parsed
                form_fields[form_id].append(parsed.name)

    gui: dict[str, object] = {}
    anchors: dict[str, str] = {}
    html_form_inputs: dict[str, list[str]] = {}
    known_inputs: set[str] = set()
    doc_ids: set[str] = set()

    def walk_body(el, enclosing_form):
        tag = _local(el.tag)
        el_id = el.attrib.get("id")
        if el_id:
            doc_ids.add(el_id)
        if tag == "form" and el_id:
            html_form_inputs.setdefault(el_id, [])
            enclosing_form = el_id
        if tag == "a" and el_id and el.attrib.get("href"):
            anchors[el_id] = el.attrib["href"]
        if tag in ("select", "textarea", "input") and el_id:
            known_inputs.add(el_id)
            gui[el_id] = _initial_gui_value(el)
            itype = el.attrib.get("type", "").lower()
            if enclosing_form and not (tag == "input" and itype in _DATA_INPUT_TYPES_EXCLUDED):
                html_form_inputs[enclosing_form].append(el_id)
        for child in el:
            walk_body(child, enclosing_form)

    walk_body(body, None)

    for sync in sync_elements:
        ref = sync.attrib.get(f"{XV}field", "").lstrip("#")
        target = sync.attrib.get(f"{XV}input", "")
        if ref not in fields:
            raise DanglingSync(f"sync references unknown field {ref!r}")
        if target not in doc_ids:
            raise DanglingSync(f"sync references unknown input {target!r}")

    machine = DialogMachine(
        fields=fields,
        form_order=form_order,
        form_fields=form_fields,
        state={name: ("unfilled", None) for name in fields},
        gui=gui,
        input_to_field={f.sync_input: f.name for f in fields.values() if f.sync_input},
        anchors=anchors,
        html_form_inputs=html_form_inputs,
        known_inputs=known_inputs,
        body=body,
    )
    active = _active_field(machine)
    if active is not None:
        machine.prompt_log.append(_render_prompt(machine, active))
    return machine


def _render_value(value) -> str:
    if isinstance(value, list):
        return ", ".join(str(v) for v in value)
    return "" if value is None else str(value)


def _render_prompt(m: DialogMachine, f: _Field) -> str:
    out = []
    for part in f.prompt_parts:
        if isinstance(part, tuple):
            out.append(_render_value(m.state.get(part[1], ("unfilled", None))[1]))
        else:
            out.append(part)
    return _collapse("".join(out))


def _field_done(m: DialogMachine, name: str) -> bool:
    status = m.state[name][0]
    if status == "confirmed":
        return True
    return status == "filled" and m.confirm_of(name) is None


def _active_field(m: DialogMachine) -> _Field | None:
    for form_id in m.form_order:
        names = m.form_fields[form_id]
        data_fields = [n for n in names if m.fields[n].kind == "data"]
        if not data_fields:
            continue
        for n in data_fields:
            if m.state[n][0] == "filled":
                conf = m.confirm_of(n)
                if conf and m.state[conf][0] == "unfilled":
                    return m.fields[conf]
        for n in data_fields:
            if m.state[n][0] == "unfilled":
                return m.fields[n]
        if all(_field_done(m, n) for n in data_fields):
            submit = next((n for n in names if m.fields[n].kind == "submit"), None)
            if submit and m.state[submit][0] == "unfilled" and form_id not in m.submitted:
                return m.fields[submit]
    for f in m.fields.values():
        if f.kind == "nav":
            return f
    return None


def _nav_fields(m: DialogMachine) -> list[_Field]:
    return [f for f in m.fields.values() if f.kind == "nav"]


def _fill_data_field(m: DialogMachine, f: _Field, value, from_gui: bool):
    m.state[f.name] = ("filled", value)
    if f.sync_input and not from_gui:
        m.gui[f.sync_input] = value
    conf = m.confirm_of(f.name)
    if conf:
        m.state[conf] = ("unfilled", None)
    submit = next((n for n in m.form_fields.get(f.form_id, [])
                   if m.fields[n].kind == "submit"), None)
    if submit:
        m.state[submit] = ("unfilled", None)
    m.submitted.discard(f.form_id)


def _region_read(m: DialogMachine, heading_id: str) -> str | None:
    if m.body is None:
        return None
    events: list[tuple[str, object]] = []

    def collect(el):
        tag = _local(el.tag)
        if tag in _HEADINGS:
            events.append(("heading", el))
        elif tag not in _SKIP_TEXT:
            if el.text:
                events.append(("text", el.text))
            for child in el:
                collect(child)
                if child.tail:
                    events.append(("text", child.tail))
        events.append(("boundary", " "))

    collect(m.body)
    heading_el = None
    buf: list[str] = []
    capturing = False
    for kind, payload in events:
        if kind == "heading":
            if capturing:
                break
            if payload.attrib.get("id") == heading_id:
                heading_el = payload
                capturing = True
        elif capturing and kind in ("text", "boundary"):
            buf.append(payload if isinstance(payload, str) else "")
    if heading_el is None:
        return None
    heading_text = _collapse("".join(heading_el.itertext()))
    body_text = _collapse("".join(buf))
    return f"{heading_text}. {body_text}".strip() if body_text else f"{heading_text}."


def _handle_match(m: DialogMachine, f: _Field, value, prompts: list[str]):
    action = None
    if f.kind == "data":
        _fill_data_field(m, f, value, from_gui=False)
    elif f.kind == "confirm":
        m.state[f.name] = ("filled", value)
        if value in f.clear_on:
            for name in f.clear_on[value]:
                if name in m.state:
                    m.state[name] = ("unfilled", None)
        elif f.confirm_target and f.confirm_target in m.state:
            current = m.state[f.confirm_target]
            m.state[f.confirm_target] = ("confirmed", current[1])
    elif f.kind == "submit":
        m.state[f.name] = ("filled", value)
        if value == f.submit_on:
            form_id = f.submit_form
            payload = {input_id: m.gui.get(input_id, "")
                       for input_id in m.html_form_inputs.get(form_id, [])}
            action = ("submit", form_id, payload)
            m.submitted.add(f.form_id)
        elif value in f.clear_on:
            for name in f.clear_on[value]:
                if name in m.state:
                    m.state[name] = ("unfilled", None)
    elif f.kind == "nav":
        if isinstance(value, str) and value in m.anchors:
            action = ("navigate", m.anchors[value])
        elif isinstance(value, str):
            read = _region_read(m, value)
            if read:
                prompts.append(read)
    return action


def step(m: DialogMachine, event: WalkEvent) -> tuple[DialogMachine, list[str], tuple | None]:
    """Feed one event through the machine; returns emitted prompts and any
    pending navigate/submit action triggered by this step."""
    prompts: list[str] = []
    action = None
    before = _active_field(m)

    if isinstance(event, Silence):
        if before is not None and before.noinput:
            prompts.append(before.noinput)
    elif isinstance(event, Gui):
        if event.input_id not in m.known_inputs:
            raise UnknownInputId(event.input_id)
        m.gui[event.input_id] = event.value
        field_name = m.input_to_field.get(event.input_id)
        if field_name:
            _fill_data_field(m, m.fields[field_name], event.value, from_gui=True)
    elif isinstance(event, Voice):
        candidates: list[_Field] = []
        if before is not None:
            candidates.append(before)
        if before is None or not before.modal:
            candidates.extend(f for f in _nav_fields(m) if f is not before)
        matched_field = None
        matched_value = None
        for f in candidates:
            for g in f.grammars:
                result = match_utterance(g, event.utterance)
                if isinstance(result, Match):
                    matched_field, matched_value = f, result.value
                    break
            if matched_field:
                break
        if matched_field is not None:
            action = _handle_match(m, matched_field, matched_value, prompts)
        else:
            target = before or next(iter(_nav_fields(m)), None)
            if target is not None and target.nomatch:
                prompts.append(target.nomatch)

    after = _active_field(m)
    if after is not None and after is not before:
        prompts.append(_render_prompt(m, after))
    if action is not None:
        m.pending = action
    m.prompt_log.extend(prompts)
    return m, prompts, action


def snapshot(m: DialogMachine) -> dict:
    """Stable, serializable view of the machine state."""
    fields = []
    for form_id in m.form_order:
        for name in m.form_fields[form_id]:
            f = m.fields[name]
            status, value = m.state[name]
            fields.append({
                "form": form_id,
                "name": name,
                "kind": f.kind,
                "modal": f.modal,
                "bargein": f.bargein,
                "state": status,
                "value": value,
            })
    pending = None
    if m.pending is not None:
        if m.pending[0] == "navigate":
            pending = {"action": "navigate", "url": m.pending[1]}
        else:
            pending = {"action": "submit", "form": m.pending[1], "payload": m.pending[2]}
    return {
        "fields": fields,
        "gui": {k: m.gui[k] for k in sorted(m.gui)},
        "prompts": list(m.prompt_log),
        "pending": pending,
    }


def render_snapshot_text(snap: dict) -> str:
    lines = ["fields:"]
    for f in snap["fields"]:
        value = _render_value(f["value"])
        suffix = f" = {value}" if f["state"] != "unfilled" else ""
        lines.append(f"  [{f['form']}] {f['name']} ({f['kind']}): {f['state']}{suffix}")
    lines.append("gui:")
    for key, value in snap["gui"].items():
        lines.append(f"  {key} = {_render_value(value)}")
    lines.append("prompts:")
    for p in snap["prompts"]:
        lines.append(f"  {p}")
    if snap["pending"] is None:
        lines.append("pending: none")
    elif snap["pending"]["action"] == "navigate":
        lines.append(f"pending: navigate {snap['pending']['url']}")
    else:
        payload = " ".join(f"{k}={_render_value(v)}" for k, v in sorted(snap["pending"]["payload"].items()))
        lines.append(f"pending: submit {snap['pending']['form']} {payload}".rstrip())
    return "\n".join(lines)


def _machine_value(value) -> str:
    if isinstance(value, list):
        return "|".join(str(v) for v in value)
    return "" if value is None else str(value)


def render_snapshot_kv(snap: dict) -> str:
    lines = []
    for f in snap["fields"]:
        lines.append(f"field.{f['name']}.form={f['form']}")
        lines.append(f"field.{f['name']}.kind={f['kind']}")
        lines.append(f"field.{f['name']}.state={f['state']}")
        lines.append(f"field.{f['name']}.value={_machine_value(f['value'])}")
    for key, value in snap["gui"].items():
        lines.append(f"gui.{key}={_machine_value(value)}")
    for index, prompt in enumerate(snap["prompts"]):
        lines.append(f"prompt.{index}={prompt}")
    if snap["pending"] is None:
        lines.append("pending=none")
    elif snap["pending"]["action"] == "navigate":
        lines.append(f"pending=navigate {snap['pending']['url']}")
    else:
        payload = "&".join(f"{k}={_machine_value(v)}"
                           for k, v in sorted(snap["pending"]["payload"].items()))
        lines.append(f"pending=submit {snap['pending']['form']} {payload}")
    return "\n".join(sorted(lines))
