import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import PAGES
from xvoice.dom import element_ids, ensure_ids, parse_html
from xvoice.page import (
    ChoiceGroup,
    Link,
    OutputRegion,
    SelectionInput,
    ShortcutLexicon,
    SubmitControl,
    TextInput,
    build_dialog_tree,
    extract_components,
    extract_words,
    rank_entries,
)

URL = "http://example.com/page.html"


def model_for(raw: bytes, url: str = URL):
    doc = parse_html(raw)
    ensure_ids(doc)
    return doc, extract_components(doc, url)


def test_multi_select_component():
    raw = (
        b"<html><body>"
        b'<select name="participants" id="participants" multiple="multiple" size="10">'
        b"<option> Anton, Tudor </option><option> Cesar, Brian </option>"
        b"<option> Danniels, David </option><option> Tejada, Jose </option>"
        b"</select></body></html>"
    )
    _, model = model_for(raw)
    assert len(model.components) == 1
    sel = model.components[0]
    assert isinstance(sel, SelectionInput)
    assert sel.id == "participants"
    assert sel.multiple is True
    assert [t for t, _ in sel.options] == [
        "Anton, Tudor", "Cesar, Brian", "Danniels, David", "Tejada, Jose",
    ]


def test_components_preserve_document_order():
    raw = (
        b'<body><a href="http://a.example/">A</a>'
        b'<a href="http://b.example/">B</a>'
        b'<input type="text" name="q"></body>'
    )
    _, model = model_for(raw)
    kinds = [type(c) for c in model.components]
    assert kinds == [Link, Link, TextInput]
    assert [c.doc_order for c in model.components] == [0, 1, 2]


def test_blank_page_empty_model():
    _, model = model_for(b"")
    assert model.components == []
    assert model.forms == []


def test_link_href_resolved_absolute():
    _, model = model_for(b'<body><a href="b.html">b</a></body>', "http://example.com/x/a.html")
    link = model.components[0]
    assert link.href == "http://example.com/x/b.html"


def test_base_href_respected():
    _, model = model_for(PAGES[dict((n, i) for i, (n, _) in enumerate(PAGES))["base_href"]][1])
    link = model.components[0]
    assert link.href == "http://other.example/base/page.html"


def test_non_http_links_excluded():
    raw = (
        b'<body><a href="mailto:x@example.com">mail</a>'
        b'<a href="javascript:void(0)">js</a>'
        b'<a href="http://example.com/ok">ok</a></body>'
    )
    _, model = model_for(raw)
    assert [c.text for c in model.components if isinstance(c, Link)] == ["ok"]


def test_datalist_suggestions_harvested():
    raw = (
        b'<form id="f" action="/s"><input type="text" name="q" list="terms">'
        b'<datalist id="terms"><option>news</option><option>sports</option></datalist></form>'
    )
    _, model = model_for(raw)
    text_inputs = [c for c in model.components if isinstance(c, TextInput)]
    assert text_inputs[0].suggested == ["news", "sports"]


def test_choice_groups_collected():
    raw = next(raw for name, raw in PAGES if name == "radio_checkbox")
    _, model = model_for(raw)
    groups = [c for c in model.components if isinstance(c, ChoiceGroup)]
    assert {g.kind for g in groups} == {"radio", "checkbox"}
    radio = next(g for g in groups if g.kind == "radio")
    assert radio.options == [("Cats", "cats"), ("Dogs", "dogs")]
    assert radio.id == "r1"


def test_output_regions_keyed_on_headings():
    raw = next(raw for name, raw in PAGES if name == "headings_regions")
    _, model = model_for(raw)
    regions = [c for c in model.components if isinstance(c, OutputRegion)]
    assert [r.heading for r in regions] == ["World news", "Sports", "Weather"]
    assert regions[0].body == "Peace talks continue. More below."
    assert regions[2].body.startswith("Sunny all week.")


def test_form_membership_and_submit():
    doc, model = model_for(next(raw for name, raw in PAGES if name == "scheduler"))
    assert len(model.forms) == 1
    form = model.forms[0]
    assert form.id == "scheduler_meeting"
    assert form.method == "post"
    members = [model.by_id(i) for i in form.member_ids]
    assert isinstance(members[0], SelectionInput)
    assert isinstance(members[1], SubmitControl)
    assert all(i in element_ids(doc) for i in form.member_ids)


def test_nested_form_controls_attributed_to_outer():
    raw = next(raw for name, raw in PAGES if name == "nested_forms")
    _, model = model_for(raw)
    assert [f.id for f in model.forms] == ["outer"]
    member_types = [type(model.by_id(i)) for i in model.forms[0].member_ids]
    assert SelectionInput in member_types  # the select living in the "inner" form


def test_extract_words_scheduler(scheduler_bytes):
    doc = parse_html(scheduler_bytes)
    words = extract_words(doc)
    for expected in ("anton", "tudor", "cesar", "brian", "participants"):
        assert words[expected] >= 1


def test_extract_words_strips_punctuation():
    doc = parse_html(b"<body>Cesar,</body>")
    assert extract_words(doc) == {"cesar": 1}


def test_extract_words_empty_page():
    doc = parse_html(b"")
    assert extract_words(doc) == {}


def test_dialog_tree_hand_enumerated_paths():
    # one form (1 select + 1 submit) and 2 links -> hand-enumerated oracle:
    #   page > form > field(select)
    #   page > form > submit
    #   page > link1
    #   page > link2
    raw = (
        b'<body><form id="f" action="/go">'
        b'<select name="s" id="s"><option>A</option></select>'
        b'<input type="submit" value="Go"></form>'
        b'<a href="http://x.example/1">one</a><a href="http://x.example/2">two</a></body>'
    )
    _, model = model_for(raw)
    tree = build_dialog_tree(model)
    assert len(tree.root.children) == 3
    form_node = tree.root.children[0]
    assert form_node.kind == "form"
    assert [c.kind for c in form_node.children] == ["field", "submit"]
    paths = tree.paths()
    assert len(paths) == 4
    tails = sorted((p[-1].kind, p[-1].ref) for p in paths)
    assert ("field", "s") in tails and ("submit", "xv-auto-1") in tails


def test_dialog_tree_empty_model():
    _, model = model_for(b"")
    tree = build_dialog_tree(model)
    assert tree.root.children == []
    assert tree.paths() == []


def test_dialog_tree_nested_form_single_node():
    raw = next(raw for name, raw in PAGES if name == "nested_forms")
    _, model = model_for(raw)
    tree = build_dialog_tree(model)
    form_nodes = [c for c in tree.root.children if c.kind == "form"]
    assert len(form_nodes) == 1
    field_count = sum(1 for c in form_nodes[0].children if c.kind == "field")
    assert field_count == 2  # outer text input + inner select


def test_dialog_tree_path_count_formula_over_corpus():
    for name, raw in PAGES:
        _, model = model_for(raw)
        tree = build_dialog_tree(model)
        links = sum(isinstance(c, Link) for c in model.components)
        regions = sum(isinstance(c, OutputRegion) for c in model.components)
        per_form = 0
        for form in model.forms:
            fields = sum(
                not isinstance(model.by_id(i), SubmitControl) for i in form.member_ids
            )
            per_form += fields + 1
        assert len(tree.paths()) == links + regions + per_form, name


def test_component_ids_resolve_over_corpus():
    for name, raw in PAGES:
        doc, model = model_for(raw)
        ids = element_ids(doc)
        for c in model.components:
            assert c.id in ids, (name, c)


def test_rank_entries_weight_sums():
    raw = (
        b'<body><a href="http://x/1">Top news</a>'
        b'<a href="http://x/2">Sports today</a>'
        b'<a href="http://x/3">Contact</a></body>'
    )
    _, model = model_for(raw)
    lex = ShortcutLexicon({"news": 5.0, "sports": 2.0})
    ranked = rank_entries(model, lex)
    assert [r.text for r in ranked] == ["Top news", "Sports today", "Contact"]


def test_rank_entries_empty_lexicon_keeps_document_order():
    raw = (
        b'<body><a href="http://x/1">beta</a>'
        b'<a href="http://x/2">alpha</a></body>'
    )
    _, model = model_for(raw)
    ranked = rank_entries(model, ShortcutLexicon())
    assert [r.text for r in ranked] == ["beta", "alpha"]


def test_rank_entries_tie_breaks_by_doc_order():
    raw = (
        b'<body><a href="http://x/1">news later</a>'
        b'<a href="http://x/2">news now</a></body>'
    )
    _, model = model_for(raw)
    ranked = rank_entries(model, ShortcutLexicon({"news": 5.0}))
    assert [r.text for r in ranked] == ["news later", "news now"]


def test_rank_entries_distinct_words_counted_once():
    raw = b'<body><a href="http://x/1">news news news</a><a href="http://x/2">sports news</a></body>'
    _, model = model_for(raw)
    ranked = rank_entries(model, ShortcutLexicon({"news": 5.0, "sports": 1.0}))
    # 5.0 (distinct "news") < 6.0 ("sports news")
    assert [r.text for r in ranked] == ["sports news", "news news news"]


@given(
    texts=st.lists(st.text(alphabet="abcdefg ", min_size=1, max_size=12), min_size=0, max_size=8),
    lexicon=st.dictionaries(st.text(alphabet="abcdefg", min_size=1, max_size=4),
                            st.floats(min_value=0.1, max_value=9.0), max_size=6),
)
@settings(max_examples=80, deadline=None)
def test_rank_entries_is_permutation(texts, lexicon):
    html = "<body>" + "".join(
        f'<a href="http://x.example/{i}">{t}</a>' for i, t in enumerate(texts)
    ) + "</body>"
    _, model = model_for(html.encode())
    ranked = rank_entries(model, ShortcutLexicon(dict(lexicon)))
    originals = [c for c in model.components if isinstance(c, (Link, OutputRegion))]
    assert sorted(id(c) for c in ranked) == sorted(id(c) for c in originals)


def test_lexicon_parsing():
    lex = ShortcutLexicon.from_text("# comment\nnews\t5\nsports\t2.5\n\n")
    assert lex.entries == {"news": 5.0, "sports": 2.5}
    with pytest.raises(ValueError):
        ShortcutLexicon.from_text("nodelimiter 3")
    with pytest.raises(ValueError):
        ShortcutLexicon.from_text("bad\t-1")
