import pytest

from corpus import PAGES_BY_NAME
from xvoice.annotate import AnnotationConfig, annotate_bytes
from xvoice.jsgf import grammar_for_options, enumerate_language
from xvoice.page import ShortcutLexicon
from xvoice.walker import (
    DanglingSync,
    Gui,
    MalformedDocument,
    Silence,
    UnknownInputId,
    Voice,
    load_machine,
    render_snapshot_kv,
    render_snapshot_text,
    snapshot,
    step,
)

URL = "http://fixture/page.html"

PROMPT = "Please say the participants."
NOINPUT = f"Sorry, I did not hear you. {PROMPT}"
NOMATCH = f"Sorry, I did not understand you. {PROMPT}"


@pytest.fixture(scope="module")
def scheduler_out(scheduler_bytes):
    out, _ = annotate_bytes(scheduler_bytes, "http://fixture/scheduler.html")
    return out


def fresh(out):
    return load_machine(out)


def test_load_scheduler_machine(scheduler_out):
    m = fresh(scheduler_out)
    assert m.form_order == ["scheduler_meeting_form"]
    assert m.state["voice_participants_name"] == ("unfilled", None)
    assert m.input_to_field == {"participants": "voice_participants_name"}
    assert m.prompt_log == [PROMPT]
    assert m.fields["voice_participants_name"].modal is True
    assert m.fields["voice_participants_name_confirm"].kind == "confirm"
    assert m.fields["voice_scheduler_meeting_submit"].kind == "submit"


def test_load_zero_voice_forms_is_idle():
    out, _ = annotate_bytes(b"<html><body><p>quiet page</p></body></html>", URL)
    m = load_machine(out)
    assert m.fields == {}
    assert m.prompt_log == []
    m, prompts, action = step(m, Voice("anything"))
    assert prompts == [] and action is None


def test_load_dangling_sync_rejected():
    doc = (
        '<?xml version="1.0"?>'
        '<html xmlns="http://www.w3.org/1999/xhtml"'
        ' xmlns:vxml="http://www.w3.org/2001/vxml"'
        ' xmlns:ev="http://www.w3.org/2001/xml-events"'
        ' xmlns:xv="http://www.voicexml.org/2002/xhtml+voice">'
        "<head><vxml:form id=\"f\">"
        '<vxml:field name="voice_x_name"><vxml:prompt>Say.</vxml:prompt></vxml:field>'
        "</vxml:form>"
        '<xv:sync xv:field="#voice_x_name" xv:input="missing"/></head>'
        "<body></body></html>"
    )
    with pytest.raises(DanglingSync):
        load_machine(doc)


def test_load_malformed_document():
    with pytest.raises(MalformedDocument):
        load_machine(b"<html><unclosed></html>")
    with pytest.raises(MalformedDocument):
        load_machine(b"not xml at all")


def test_voice_fill_updates_gui_and_asks_confirmation(scheduler_out):
    m = fresh(scheduler_out)
    m, prompts, action = step(m, Voice("Anton Tudor"))
    assert m.state["voice_participants_name"] == ("filled", ["Anton, Tudor"])
    assert m.gui["participants"] == ["Anton, Tudor"]
    assert prompts == ["You said Anton, Tudor. Is that correct?"]
    assert action is None


def test_silence_emits_noinput(scheduler_out):
    m = fresh(scheduler_out)
    m, prompts, _ = step(m, Silence())
    assert prompts == [NOINPUT]


def test_unrecognized_utterance_emits_nomatch(scheduler_out):
    m = fresh(scheduler_out)
    m, prompts, _ = step(m, Voice("xyzzy"))
    assert prompts == [NOMATCH]
    assert m.state["voice_participants_name"] == ("unfilled", None)


def test_verification_no_clears_and_reprompts(scheduler_out):
    m = fresh(scheduler_out)
    step(m, Voice("Cesar Brian"))
    m, prompts, _ = step(m, Voice("no"))
    assert m.state["voice_participants_name"] == ("unfilled", None)
    assert m.gui["participants"] == ["Cesar, Brian"]  # GUI untouched by voice clear
    assert prompts == [PROMPT]


def test_full_voice_path_reaches_submit(scheduler_out):
    m = fresh(scheduler_out)
    step(m, Voice("Anton Tudor and Tejada Jose"))
    m, prompts, _ = step(m, Voice("yes"))
    assert m.state["voice_participants_name"][0] == "confirmed"
    assert prompts == ["Do you want to submit the form?"]
    m, prompts, action = step(m, Voice("yes"))
    assert action == ("submit", "scheduler_meeting",
                      {"participants": ["Anton, Tudor", "Tejada, Jose"]})
    assert m.pending == action


def test_submit_no_clears_submit_field(scheduler_out):
    m = fresh(scheduler_out)
    step(m, Voice("Anton Tudor"))
    step(m, Voice("yes"))
    m, prompts, action = step(m, Voice("no"))
    assert action is None
    assert m.state["voice_scheduler_meeting_submit"] == ("unfilled", None)


def test_gui_fill_mirrors_into_field(scheduler_out):
    m = fresh(scheduler_out)
    m, prompts, _ = step(m, Gui("participants", ["Danniels, David"]))
    assert m.state["voice_participants_name"] == ("filled", ["Danniels, David"])
    assert prompts == ["You said Danniels, David. Is that correct?"]


def test_gui_unknown_input_rejected(scheduler_out):
    m = fresh(scheduler_out)
    with pytest.raises(UnknownInputId):
        step(m, Gui("nonexistent", "x"))


def test_snapshot_fresh_and_pure(scheduler_out):
    m = fresh(scheduler_out)
    snap1 = snapshot(m)
    snap2 = snapshot(m)
    assert snap1 == snap2
    unfilled = [f for f in snap1["fields"] if f["kind"] == "data"]
    assert len(unfilled) == 1 and unfilled[0]["state"] == "unfilled"
    assert snap1["prompts"] == [PROMPT]
    assert snap1["pending"] is None
    text = render_snapshot_text(snap1)
    assert "voice_participants_name (data): unfilled" in text
    kv = render_snapshot_kv(snap1)
    assert "field.voice_participants_name.state=unfilled" in kv.splitlines()


def test_snapshot_after_gui_fill(scheduler_out):
    m = fresh(scheduler_out)
    step(m, Gui("participants", ["Cesar, Brian"]))
    snap = snapshot(m)
    data = next(f for f in snap["fields"] if f["kind"] == "data")
    assert data["state"] == "filled" and data["value"] == ["Cesar, Brian"]
    assert snap["gui"]["participants"] == ["Cesar, Brian"]


def test_sync_bidirectionality_over_enumerated_utterances(scheduler_out):
    names = ["Anton, Tudor", "Cesar, Brian", "Danniels, David", "Tejada, Jose"]
    grammar = grammar_for_options("participants", names, multiple=True)
    utterances = sorted(enumerate_language(grammar, max_repeat=2))
    for utterance in utterances:
        voice_machine = fresh(scheduler_out)
        step(voice_machine, Voice(utterance))
        field_value = voice_machine.state["voice_participants_name"][1]
        gui_value = voice_machine.gui["participants"]

        gui_machine = fresh(scheduler_out)
        step(gui_machine, Gui("participants", field_value))
        assert gui_machine.state["voice_participants_name"][1] == field_value
        assert gui_machine.gui["participants"] == gui_value


def test_interleaved_traces_reach_identical_submit_payload(scheduler_out):
    def run(events):
        m = fresh(scheduler_out)
        action = None
        for e in events:
            m, _, a = step(m, e)
            if a is not None:
                action = a
        return action

    all_voice = run([Voice("Anton Tudor and Cesar Brian"), Voice("yes"), Voice("yes")])
    gui_then_voice = run([Gui("participants", ["Anton, Tudor", "Cesar, Brian"]),
                          Voice("yes"), Voice("yes")])
    overwrite_mix = run([Voice("Tejada Jose"),
                         Gui("participants", ["Anton, Tudor", "Cesar, Brian"]),
                         Voice("yes"), Voice("yes")])
    assert all_voice == gui_then_voice == overwrite_mix
    assert all_voice[0] == "submit"


def modal_page_machine():
    raw = (
        b'<body><a href="http://x.example/alpha">Alpha</a>'
        b'<form id="pick" action="/p">'
        b'<select name="city" id="city"><option>Oslo</option><option>Bergen</option></select>'
        b'<input type="submit" value="go"></form></body>'
    )
    out, _ = annotate_bytes(raw, URL, config=AnnotationConfig(middleware_base="http://mw:9"))
    return load_machine(out)


def test_modal_isolation_blocks_navigation():
    m = modal_page_machine()
    assert m.fields["voice_city_name"].modal is True
    m, prompts, action = step(m, Voice("Alpha"))
    assert action is None
    assert m.pending is None
    assert prompts and "did not understand" in prompts[0]


def test_navigation_after_form_completes():
    m = modal_page_machine()
    step(m, Voice("Oslo"))
    step(m, Voice("yes"))
    step(m, Voice("yes"))          # submit; nav field becomes active
    m, prompts, action = step(m, Voice("Alpha"))
    assert action is not None and action[0] == "navigate"
    assert action[1].startswith("http://mw:9/annotate?url=")


def test_navigation_on_links_only_page():
    out, _ = annotate_bytes(PAGES_BY_NAME["links_only"], URL,
                            lexicon=ShortcutLexicon({"news": 5.0}),
                            config=AnnotationConfig(middleware_base="http://mw:9"))
    m = load_machine(out)
    assert m.prompt_log == ["Please say where to go."]
    m, _, action = step(m, Voice("Top news"))
    assert action[0] == "navigate"
    assert "example.com%2Fnews" in action[1]
    # shortcut word reaches the highest-ranked matching entry
    m, _, action = step(m, Voice("news"))
    assert action[0] == "navigate"


def test_read_region_reflects_live_document():
    out, _ = annotate_bytes(PAGES_BY_NAME["headings_regions"], URL)
    m = load_machine(out)
    m, prompts, action = step(m, Voice("read Sports"))
    assert action is None
    assert any("finals are tonight" in p for p in prompts)

    for el in m.body.iter():
        if el.text and "finals" in el.text:
            el.text = "Match postponed."
    before_gui = dict(m.gui)
    m, prompts, _ = step(m, Voice("read Sports"))
    assert any("Match postponed." in p for p in prompts)
    assert m.gui == before_gui


def test_scripted_walk_is_deterministic(scheduler_out):
    def transcript():
        m = fresh(scheduler_out)
        lines = list(m.prompt_log)
        for event in [Silence(), Voice("Anton Tudor"), Voice("no"),
                      Voice("Cesar Brian"), Voice("yes"), Voice("yes")]:
            m, prompts, action = step(m, event)
            lines.extend(prompts)
            if action:
                lines.append(str(action))
        lines.append(render_snapshot_kv(snapshot(m)))
        return "\n".join(lines)

    assert transcript() == transcript()
