"""Command-line front door: annotate, serve, walk, grammars."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import httpx

from . import __version__
from .annotate import AnnotationConfig, annotate_bytes, page_grammars
from .jsgf import serialize_jsgf
from .page import ShortcutLexicon
from .service import AnnotationService, ServiceConfig, load_lexicon
from .walker import (
    Gui,
    Silence,
    Voice,
    load_machine,
    render_snapshot_text,
    snapshot,
    step,
)


class CliError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xvoice",
        description="Annotate web pages with synchronized voice dialogs.",
    )
    parser.add_argument("--version", action="version", version=f"xvoice {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    annotate = sub.add_parser("annotate", help="annotate one page to X+V")
    annotate.add_argument("input", help="HTML file path or http(s) URL")
    annotate.add_argument("--output", help="write result here instead of stdout")
    annotate.add_argument("--lexicon", help="shortcut lexicon file (word<TAB>weight)")
    annotate.add_argument("--no-verification", action="store_true",
                          help="skip spoken confirmation fields")
    annotate.add_argument("--base", help="middleware base URL for link rewriting")
    annotate.add_argument("--encoding-override", metavar="LABEL",
                          help="force the source encoding")

    serve = sub.add_parser("serve", help="run the annotating proxy")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.add_argument("--lexicon")
    serve.add_argument("--no-verification", action="store_true")
    serve.add_argument("--base")
    serve.add_argument("--encoding-override", metavar="LABEL")

    walk = sub.add_parser("walk", help="drive an X+V document's dialog in text mode")
    walk.add_argument("document", help="annotated X+V file")
    walk.add_argument("script", nargs="?",
                      help="event script (say/gui/silence lines); stdin when omitted")

    grammars = sub.add_parser("grammars", help="print every grammar generated for a page")
    grammars.add_argument("input", help="HTML file path or http(s) URL")
    grammars.add_argument("--lexicon")
    grammars.add_argument("--encoding-override", metavar="LABEL")
    return parser


def _read_input(source: str) -> tuple[bytes, str]:
    """Page bytes plus the URL used for resolving its links."""
    if source.startswith(("http://", "https://")):
        try:
            response = httpx.get(source, follow_redirects=True, timeout=30.0)
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise CliError(f"fetch failed: {exc}") from None
        return response.content, source
    path = Path(source)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {source}: {exc}") from None
    return data, f"http://localhost/{path.name}"


def _load_lexicon(path: str | None) -> ShortcutLexicon:
    if not path:
        return ShortcutLexicon()
    try:
        return load_lexicon(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load lexicon: {exc}") from None


def _cmd_annotate(args) -> int:
    data, url = _read_input(args.input)
    config = AnnotationConfig(
        verification=not args.no_verification,
        encoding_override=args.encoding_override,
        middleware_base=args.base,
    )
    out, report = annotate_bytes(data, url, _load_lexicon(args.lexicon), config)
    if args.output:
        Path(args.output).write_bytes(out)
    else:
        sys.stdout.buffer.write(out)
    print(f"voiced: {len(report.voiced)} skipped: {len(report.skipped)}", file=sys.stderr)
    for component_id, reason in report.skipped:
        print(f"  skipped {component_id}: {reason}", file=sys.stderr)
    for note in report.notes:
        print(f"  note: {note}", file=sys.stderr)
    return 0


def _cmd_serve(args) -> int:
    config = ServiceConfig.from_env()
    if args.host:
        config.host = args.host
    if args.port is not None:
        config.port = args.port
    if args.lexicon:
        config.lexicon_path = args.lexicon
    if args.no_verification:
        config.verification = False
    if args.base:
        config.base = args.base
    if args.encoding_override:
        config.encoding_override = args.encoding_override
    service = AnnotationService(config)
    print(f"listening on {service.base}", file=sys.stderr)
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def _parse_event(line: str):
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    verb, _, rest = stripped.partition(" ")
    if verb == "silence":
        return Silence()
    if verb == "say":
        return Voice(rest.strip())
    if verb == "gui":
        input_id, _, value = rest.strip().partition(" ")
        if not input_id:
            raise CliError(f"gui line needs an input id: {line!r}")
        value = value.strip()
        return Gui(input_id, value.split("|") if "|" in value else value)
    raise CliError(f"unknown walk directive: {line!r}")


def _cmd_walk(args) -> int:
    try:
        data = Path(args.document).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {args.document}: {exc}") from None
    from .walker import DanglingSync, MalformedDocument
    try:
        machine = load_machine(data)
    except (MalformedDocument, DanglingSync) as exc:
        raise CliError(f"cannot load dialog: {exc}") from None

    for prompt in machine.prompt_log:
        print(prompt)
    if args.script:
        try:
            lines = Path(args.script).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise CliError(f"cannot read {args.script}: {exc}") from None
    else:
        lines = sys.stdin
    for line in lines:
        event = _parse_event(line)
        if event is None:
            continue
        machine, prompts, action = step(machine, event)
        for prompt in prompts:
            print(prompt)
        if action is not None and action[0] == "navigate":
            print(f"! navigate {action[1]}")
        elif action is not None:
            payload = "&".join(
                f"{k}={'|'.join(v) if isinstance(v, list) else v}"
                for k, v in sorted(action[2].items()))
            print(f"! submit {action[1]} {payload}".rstrip())
    print("-- snapshot --")
    print(render_snapshot_text(snapshot(machine)))
    return 0


def _cmd_grammars(args) -> int:
    data, url = _read_input(args.input)
    config = AnnotationConfig(encoding_override=args.encoding_override)
    grammars = page_grammars(data, url, _load_lexicon(args.lexicon), config)
    if not grammars:
        print("// no grammars generated for this page")
        return 0
    for index, (label, grammar) in enumerate(grammars):
        if index:
            print()
        print(f"// {label}")
        print(serialize_jsgf(grammar), end="")
    return 0


_COMMANDS = {
    "annotate": _cmd_annotate,
    "serve": _cmd_serve,
    "walk": _cmd_walk,
    "grammars": _cmd_grammars,
}


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
