"""JSGF speech grammars: generation, parsing, matching and enumeration.

The semantic-tag mini-language covers exactly three actions: assign a
literal ($="..."), start a list ($=new Array), and push a referenced
rule's value ($.push($rule)). A tag fires when the expansion it is
attached to finishes matching.
"""
from __future__ import annotations

import re
import string
from dataclasses import dataclass


class GrammarError(Exception):
    pass


class BadHeader(GrammarError):
    pass


class NoPublicRule(GrammarError):
    pass


class UnresolvedRuleRef(GrammarError):
    pass


class TagSyntax(GrammarError):
    pass


class EmptyGrammar(GrammarError):
    pass


class ExplosionGuard(GrammarError):
    pass


# -- tag actions ---------------------------------------------------------------

@dataclass(frozen=True)
class AssignLiteral:
    text: str


@dataclass(frozen=True)
class NewArray:
    pass


@dataclass(frozen=True)
class PushRef:
    rule: str


TagAction = AssignLiteral | NewArray | PushRef


# -- expansion AST ---------------------------------------------------------------

@dataclass
class Token:
    text: str
    tag: TagAction | None = None


@dataclass
class RuleRef:
    name: str
    tag: TagAction | None = None


@dataclass
class Null:
    tag: TagAction | None = None


@dataclass
class Sequence:
    items: list
    tag: TagAction | None = None


@dataclass
class Alternatives:
    items: list
    tag: TagAction | None = None


@dataclass
class OptionalGroup:
    item: object
    tag: TagAction | None = None


@dataclass
class Repeat1:
    item: object
    tag: TagAction | None = None


Expansion = Token | RuleRef | Null | Sequence | Alternatives | OptionalGroup | Repeat1


@dataclass
class JsgfGrammar:
    name: str
    rules: dict[str, Expansion]
    public_rule: str
    charset: str = "utf-8"

    def validate(self):
        if not _IDENT_RE.match(self.name):
            raise GrammarError(f"grammar name is not an identifier: {self.name!r}")
        if self.public_rule not in self.rules:
            raise NoPublicRule(f"public rule <{self.public_rule}> is not defined")
        for rule_name, expansion in self.rules.items():
            refs = set()
            for node in _iter_nodes(expansion):
                if isinstance(node, RuleRef):
                    refs.add(node.name)
                    if node.name != "NULL" and node.name not in self.rules:
                        raise UnresolvedRuleRef(
                            f"<{node.name}> referenced in <{rule_name}> is not defined"
                        )
            for node in _iter_nodes(expansion):
                if isinstance(node.tag, PushRef) and node.tag.rule not in refs:
                    raise TagSyntax(
                        f"$.push(${node.tag.rule}) in <{rule_name}> names an unreferenced rule"
                    )
        return self


@dataclass
class Match:
    value: str | list[str]


@dataclass
class NoMatch:
    pass


MatchResult = Match | NoMatch


_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def sanitize_identifier(name: str) -> str:
    cleaned = re.sub(r"[^A-Za-z0-9_]", "_", name)
    if not cleaned or cleaned[0].isdigit():
        cleaned = f"g_{cleaned}"
    return cleaned


def _iter_nodes(expansion: Expansion):
    stack = [expansion]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, (Sequence, Alternatives)):
            stack.extend(node.items)
        elif isinstance(node, (OptionalGroup, Repeat1)):
            stack.append(node.item)


# -- generation ---------------------------------------------------------------

_ORDINAL_WORDS = [
    "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
    "seventeen", "eighteen", "nineteen", "twenty",
]


def _spoken(text: str, tag: TagAction) -> Expansion:
    tokens = text.split()
    if len(tokens) == 1:
        return Token(tokens[0], tag=tag)
    items = [Token(t) for t in tokens]
    items[-1].tag = tag
    return Sequence(items)


def _item_rule_name(name: str) -> str:
    if name.endswith("s") and len(name) > 1:
        return name[:-1]
    return f"{name}_item"


def _alts(items: list[Expansion]) -> Expansion:
    return items[0] if len(items) == 1 else Alternatives(items)


def grammar_for_options(name: str, options: list[str], multiple: bool,
                        charset: str = "utf-8") -> JsgfGrammar:
    """Grammar for a fixed-choice input; multiple choices repeat with an
    optional spoken "and" and collect values into a list."""
    texts = [t for t in options if t.strip()]
    if not texts:
        raise EmptyGrammar(f"no speakable options for {name!r}")
    if not _IDENT_RE.match(name):
        raise GrammarError(f"grammar name is not an identifier: {name!r}")
    alternatives = _alts([_spoken(t, AssignLiteral(t)) for t in texts])
    if not multiple:
        return JsgfGrammar(name=name, rules={name: alternatives},
                           public_rule=name, charset=charset).validate()
    item = _item_rule_name(name)
    public = Sequence([
        Null(tag=NewArray()),
        Repeat1(Sequence([
            RuleRef(item),
            OptionalGroup(Token("and"), tag=PushRef(item)),
        ])),
    ])
    return JsgfGrammar(name=name, rules={name: public, item: alternatives},
                       public_rule=name, charset=charset).validate()


def _disambiguate(texts: list[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for text in texts:
        key = " ".join(_norm_tokens(text))
        count = seen.get(key, 0) + 1
        seen[key] = count
        if count == 1:
            out.append(text)
        else:
            suffix = _ORDINAL_WORDS[count - 2] if count - 2 < len(_ORDINAL_WORDS) else str(count)
            out.append(f"{text} {suffix}")
    return out


def grammar_for_links(links, charset: str = "utf-8") -> JsgfGrammar | None:
    """Alternatives of link texts tagged with each link's element id;
    duplicate texts get spoken ordinals appended."""
    speakable = [(l.id, re.sub(r"\s+", " ", l.text).strip()) for l in links]
    speakable = [(i, t) for i, t in speakable if t]
    if not speakable:
        return None
    spoken = _disambiguate([t for _, t in speakable])
    alts = [_spoken(text, AssignLiteral(link_id))
            for (link_id, _), text in zip(speakable, spoken)]
    return JsgfGrammar(name="links", rules={"links": _alts(alts)},
                       public_rule="links", charset=charset).validate()


def shortcut_grammar(entries, lexicon, charset: str = "utf-8") -> JsgfGrammar | None:
    """One alternative per lexicon word found in an entry; the tag names the
    highest-ranked entry containing that word."""
    from .page import _entry_text, _tokenize  # ranked entries come from page

    entry_words = [(e, set(_tokenize(_entry_text(e)))) for e in entries]
    alts = []
    for word in lexicon.entries:
        for entry, words in entry_words:
            if word in words:
                alts.append(Token(word, tag=AssignLiteral(entry.id)))
                break
    if not alts:
        return None
    return JsgfGrammar(name="shortcuts", rules={"shortcuts": _alts(alts)},
                       public_rule="shortcuts", charset=charset).validate()


def yes_no_grammar(charset: str = "utf-8") -> JsgfGrammar:
    alts = Alternatives([
        Token("yes", tag=AssignLiteral("yes")),
        Token("correct", tag=AssignLiteral("yes")),
        Token("no", tag=AssignLiteral("no")),
        Token("wrong", tag=AssignLiteral("no")),
    ])
    return JsgfGrammar(name="yesno", rules={"yesno": alts},
                       public_rule="yesno", charset=charset).validate()


def content_grammar(regions, charset: str = "utf-8") -> JsgfGrammar | None:
    """"read <heading>" alternatives tagged with the region's element id."""
    alts = []
    for region in regions:
        heading = re.sub(r"\s+", " ", region.heading).strip()
        if not heading:
            continue
        alts.append(_spoken(f"read {heading}", AssignLiteral(region.id)))
    if not alts:
        return None
    return JsgfGrammar(name="contents", rules={"contents": _alts(alts)},
                       public_rule="contents", charset=charset).validate()


# -- serialization ----------------------------------------------------------

def _tag_text(tag: TagAction) -> str:
    if isinstance(tag, AssignLiteral):
        escaped = tag.text.replace("\\", "\\\\").replace('"', '\\"')
        return f'{{$="{escaped}"}}'
    if isinstance(tag, NewArray):
        return "{$=new Array}"
    return f"{{$.push(${tag.rule})}}"


def _ser(node: Expansion, inside_sequence: bool) -> str:
    tag = f" {_tag_text(node.tag)}" if node.tag else ""
    if isinstance(node, Token):
        return node.text + tag
    if isinstance(node, RuleRef):
        return f"<{node.name}>{tag}"
    if isinstance(node, Null):
        return f"<NULL>{tag}"
    if isinstance(node, Sequence):
        body = " ".join(_ser(i, True) for i in node.items)
        return f"({body}){tag}" if node.tag else body
    if isinstance(node, Alternatives):
        body = " | ".join(_ser(i, False) for i in node.items)
        if inside_sequence or node.tag:
            return f"({body}){tag}"
        return body
    if isinstance(node, OptionalGroup):
        return f"[{_ser(node.item, False)}]{tag}"
    if isinstance(node, Repeat1):
        return f"({_ser(node.item, False)})+{tag}"
    raise TypeError(node)


def serialize_jsgf(g: JsgfGrammar) -> str:
    """Canonical text form: header, grammar declaration, one rule per line,
    public rule first."""
    lines = [f"#JSGF V1.0 {g.charset};", f"grammar {g.name};"]
    ordered = [g.public_rule] + [n for n in g.rules if n != g.public_rule]
    for name in ordered:
        prefix = "public " if name == g.public_rule else ""
        lines.append(f"{prefix}<{name}> = {_ser(g.rules[name], False)};")
    return "\n".join(lines) + "\n"


# -- parsing ------------------------------------------------------------------

_TAG_BODY_ASSIGN = re.compile(r'^\$\s*=\s*"((?:[^"\\]|\\.)*)"\s*;?$')
_TAG_BODY_NEW = re.compile(r"^\$\s*=\s*new\s+Array\s*(\(\s*\))?\s*;?$")
_TAG_BODY_PUSH = re.compile(r"^\$\s*\.\s*push\s*\(\s*\$([A-Za-z_][A-Za-z0-9_]*)\s*\)\s*;?$")


def _parse_tag_body(body: str) -> TagAction:
    body = body.strip()
    m = _TAG_BODY_ASSIGN.match(body)
    if m:
        return AssignLiteral(m.group(1).replace('\\"', '"').replace("\\\\", "\\"))
    if _TAG_BODY_NEW.match(body):
        return NewArray()
    m = _TAG_BODY_PUSH.match(body)
    if m:
        return PushRef(m.group(1))
    raise TagSyntax(f"unrecognized tag action: {body!r}")


def _tokenize_jsgf(text: str) -> list[tuple[str, str]]:
    tokens: list[tuple[str, str]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "{":
            j = text.find("}", i + 1)
            if j < 0:
                raise TagSyntax("unterminated tag")
            tokens.append(("TAG", text[i + 1:j]))
            i = j + 1
            continue
        if ch == "(":
            # a parenthesized section starting with $ is a typeset tag
            k = i + 1
            while k < n and text[k].isspace():
                k += 1
            if k < n and text[k] == "$":
                depth = 1
                j = i + 1
                while j < n and depth:
                    if text[j] == "(":
                        depth += 1
                    elif text[j] == ")":
                        depth -= 1
                    j += 1
                if depth:
                    raise TagSyntax("unterminated tag")
                tokens.append(("TAG", text[i + 1:j - 1]))
                i = j
                continue
            tokens.append(("LPAREN", "("))
            i += 1
            continue
        if ch == "<":
            j = text.find(">", i + 1)
            if j < 0:
                raise GrammarError("unterminated rule reference")
            tokens.append(("REF", text[i + 1:j].strip()))
            i = j + 1
            continue
        if ch in ")[]|+;=":
            kind = {")": "RPAREN", "[": "LBRACK", "]": "RBRACK", "|": "BAR",
                    "+": "PLUS", ";": "SEMI", "=": "EQ"}[ch]
            tokens.append((kind, ch))
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in "()[]|+;={}<>":
            j += 1
        tokens.append(("WORD", text[i:j]))
        i = j
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else ("EOF", "")

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            raise GrammarError(f"expected {kind}, found {tok[1]!r}")
        return tok

    def parse_alternatives(self):
        items = [self.parse_sequence()]
        while self.peek()[0] == "BAR":
            self.next()
            items.append(self.parse_sequence())
        return items[0] if len(items) == 1 else Alternatives(items)

    def parse_sequence(self):
        items = []
        while True:
            kind, value = self.peek()
            if kind == "TAG":
                self.next()
                if not items:
                    raise TagSyntax("tag action with nothing to attach to")
                if items[-1].tag is not None:
                    raise TagSyntax("element already carries a tag action")
                items[-1].tag = _parse_tag_body(value)
                continue
            if kind in ("WORD", "REF", "LPAREN", "LBRACK"):
                items.append(self.parse_postfix())
                continue
            break
        if not items:
            raise GrammarError("empty expansion")
        return items[0] if len(items) == 1 else Sequence(items)

    def parse_postfix(self):
        atom = self.parse_atom()
        if self.peek()[0] == "PLUS":
            self.next()
            atom = Repeat1(atom)
        return atom

    def parse_atom(self):
        kind, value = self.next()
        if kind == "WORD":
            return Token(value)
        if kind == "REF":
            return Null() if value == "NULL" else RuleRef(value)
        if kind == "LPAREN":
            inner = self.parse_alternatives()
            self.expect("RPAREN")
            return inner
        if kind == "LBRACK":
            inner = self.parse_alternatives()
            self.expect("RBRACK")
            return OptionalGroup(inner)
        raise GrammarError(f"unexpected token {value!r}")


def parse_jsgf(text: str) -> JsgfGrammar:
    """Parse JSGF text into a grammar; accepts brace or typeset-paren tags."""
    stripped = text.lstrip()
    if not stripped.startswith("#JSGF"):
        raise BadHeader("missing #JSGF header")
    header, _, rest = stripped.partition("\n")
    header_fields = header.strip().rstrip(";").split()
    charset = header_fields[2] if len(header_fields) >= 3 else "utf-8"

    parser = _Parser(_tokenize_jsgf(rest))
    if parser.next() != ("WORD", "grammar"):
        raise BadHeader("missing grammar declaration")
    name = parser.expect("WORD")[1]
    parser.expect("SEMI")

    rules: dict[str, Expansion] = {}
    public_rules: list[str] = []
    while parser.peek()[0] != "EOF":
        kind, value = parser.peek()
        is_public = False
        if (kind, value) == ("WORD", "public"):
            parser.next()
            is_public = True
        rule_name = parser.expect("REF")[1]
        parser.expect("EQ")
        expansion = parser.parse_alternatives()
        parser.expect("SEMI")
        rules[rule_name] = expansion
        if is_public:
            public_rules.append(rule_name)

    if len(public_rules) != 1:
        raise NoPublicRule(f"expected exactly one public rule, found {len(public_rules)}")
    return JsgfGrammar(name=name, rules=rules, public_rule=public_rules[0],
                       charset=charset).validate()


# -- matching ---------------------------------------------------------------

_PUNCT = string.punctuation


def _norm(token: str) -> str:
    return token.strip(_PUNCT).lower()


def _norm_tokens(utterance: str) -> list[str]:
    return [n for n in (_norm(t) for t in utterance.split()) if n]


def _tag_event(tag: TagAction) -> tuple:
    if isinstance(tag, AssignLiteral):
        return ("assign", tag.text)
    if isinstance(tag, NewArray):
        return ("newarray",)
    return ("push", tag.rule)


def _eval_events(events) -> str | list[str] | None:
    value = None
    refs: dict[str, object] = {}
    for event in events:
        op = event[0]
        if op == "assign":
            value = event[1]
        elif op == "newarray":
            value = []
        elif op == "ref":
            refs[event[1]] = event[2]
        elif op == "push" and isinstance(value, list) and event[1] in refs:
            value.append(refs[event[1]])
    return value


def _match_exp(node: Expansion, tokens: list[str], pos: int, grammar: JsgfGrammar):
    """Yields (next position, semantic events) for every way node can match."""
    tag_events = (_tag_event(node.tag),) if node.tag else ()

    if isinstance(node, Token):
        normed = _norm(node.text)
        if normed == "":
            yield pos, tag_events
        elif pos < len(tokens) and tokens[pos] == normed:
            yield pos + 1, tag_events
        return

    if isinstance(node, Null):
        yield pos, tag_events
        return

    if isinstance(node, RuleRef):
        body = grammar.rules[node.name]
        for end, events in _match_exp(body, tokens, pos, grammar):
            value = _eval_events(events)
            yield end, (("ref", node.name, value),) + tag_events
        return

    if isinstance(node, Sequence):
        def walk(index, at, acc):
            if index == len(node.items):
                yield at, acc + tag_events
                return
            for end, events in _match_exp(node.items[index], tokens, at, grammar):
                yield from walk(index + 1, end, acc + events)
        yield from walk(0, pos, ())
        return

    if isinstance(node, Alternatives):
        for item in node.items:
            for end, events in _match_exp(item, tokens, pos, grammar):
                yield end, events + tag_events
        return

    if isinstance(node, OptionalGroup):
        for end, events in _match_exp(node.item, tokens, pos, grammar):
            yield end, events + tag_events
        yield pos, tag_events
        return

    if isinstance(node, Repeat1):
        def repeat(at, acc):
            for end, events in _match_exp(node.item, tokens, at, grammar):
                combined = acc + events
                if end > at:
                    yield from repeat(end, combined)
                yield end, combined + tag_events
        yield from repeat(pos, ())
        return

    raise TypeError(node)


def match_utterance(g: JsgfGrammar, utterance: str) -> MatchResult:
    """Match a spoken utterance against the public rule and evaluate its
    tag actions; tokens are case-folded and stripped of edge punctuation."""
    tokens = _norm_tokens(utterance)
    body = g.rules[g.public_rule]
    for end, events in _match_exp(body, tokens, 0, g):
        if end == len(tokens):
            value = _eval_events(events)
            if value is None:
                value = " ".join(tokens)
            return Match(value)
    return NoMatch()


# -- enumeration --------------------------------------------------------------

def enumerate_language(g: JsgfGrammar, max_repeat: int, cap: int = 100000) -> set[str]:
    """Every accepted sentence with + expanded 1..max_repeat times."""
    if max_repeat < 1:
        raise ValueError("max_repeat must be >= 1")

    def expand(node: Expansion, active: tuple[str, ...]) -> list[tuple[str, ...]]:
        if isinstance(node, Token):
            return [(node.text,)]
        if isinstance(node, Null):
            return [()]
        if isinstance(node, RuleRef):
            if node.name in active:
                raise ExplosionGuard(f"recursive rule <{node.name}>")
            return expand(g.rules[node.name], active + (node.name,))
        if isinstance(node, Sequence):
            results = [()]
            for item in node.items:
                expansions = expand(item, active)
                combined = []
                for prefix in results:
                    for suffix in expansions:
                        combined.append(prefix + suffix)
                        if len(combined) > cap:
                            raise ExplosionGuard(f"language exceeds {cap} sentences")
                results = combined
            return results
        if isinstance(node, Alternatives):
            out = []
            for item in node.items:
                out.extend(expand(item, active))
                if len(out) > cap:
                    raise ExplosionGuard(f"language exceeds {cap} sentences")
            return out
        if isinstance(node, OptionalGroup):
            return [()] + expand(node.item, active)
        if isinstance(node, Repeat1):
            single = expand(node.item, active)
            out = []
            layer = [()]
            for _ in range(max_repeat):
                layer = [p + s for p in layer for s in single]
                out.extend(layer)
                if len(out) > cap:
                    raise ExplosionGuard(f"language exceeds {cap} sentences")
            return out
        raise TypeError(node)

    sentences = {" ".join(t) for t in expand(g.rules[g.public_rule], (g.public_rule,))}
    if len(sentences) > cap:
        raise ExplosionGuard(f"language exceeds {cap} sentences")
    return sentences
