"""HTTP middleware: fetch a page, annotate it, keep navigation proxied."""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import httpx

from . import __version__
from .annotate import AnnotationConfig, annotate_bytes, error_document
from .page import ShortcutLexicon

log = logging.getLogger(__name__)

_HTML_TYPES = {"text/html", "application/xhtml+xml"}

ENV_PREFIX = "DEIUS_"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    timeout: float = 10.0
    max_page_size: int = 5_000_000
    lexicon_path: str | None = None
    verification: bool = True
    cache_ttl: float = 0.0
    base: str | None = None
    encoding_override: str | None = None

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> "ServiceConfig":
        env = os.environ if env is None else env
        cfg = cls()

        def get(name):
            return env.get(f"{ENV_PREFIX}{name}")

        if get("HOST"):
            cfg.host = get("HOST")
        if get("PORT"):
            cfg.port = int(get("PORT"))
        if get("TIMEOUT"):
            cfg.timeout = float(get("TIMEOUT"))
        if get("MAX_PAGE_SIZE"):
            cfg.max_page_size = int(get("MAX_PAGE_SIZE"))
        if get("LEXICON"):
            cfg.lexicon_path = get("LEXICON")
        if get("VERIFICATION"):
            cfg.verification = get("VERIFICATION").strip().lower() not in ("0", "off", "false", "no")
        if get("CACHE_TTL"):
            cfg.cache_ttl = float(get("CACHE_TTL"))
        if get("BASE"):
            cfg.base = get("BASE")
        if get("ENCODING_OVERRIDE"):
            cfg.encoding_override = get("ENCODING_OVERRIDE")
        if cfg.timeout <= 0:
            raise ValueError("timeout must be positive")
        if cfg.max_page_size <= 0:
            raise ValueError("max page size must be positive")
        return cfg


def load_lexicon(path: str | Path) -> ShortcutLexicon:
    return ShortcutLexicon.from_text(Path(path).read_text(encoding="utf-8"))


class _SizeExceeded(Exception):
    pass


class _UpstreamFailed(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class _Response:
    status: int
    content_type: str
    body: bytes


class _Cache:
    def __init__(self, ttl: float):
        self.ttl = ttl
        self._lock = threading.Lock()
        self._entries: dict[str, tuple[float, _Response]] = {}

    def get(self, key: str) -> _Response | None:
        if self.ttl <= 0:
            return None
        with self._lock:
            entry = self._entries.get(key)
            if entry is None or entry[0] < time.monotonic():
                return None
            return entry[1]

    def put(self, key: str, response: _Response):
        if self.ttl <= 0:
            return
        with self._lock:
            self._entries[key] = (time.monotonic() + self.ttl, response)


class AnnotationService:
    """Annotating reverse proxy; one /annotate endpoint plus /health."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.lexicon = (load_lexicon(config.lexicon_path)
                        if config.lexicon_path else ShortcutLexicon())
        self.cache = _Cache(config.cache_ttl)
        self.client = httpx.Client(follow_redirects=True, max_redirects=5,
                                   timeout=config.timeout,
                                   headers={"User-Agent": f"xvoice/{__version__}"})
        self.server = ThreadingHTTPServer((config.host, config.port),
                                          self._handler_class())
        self.port = self.server.server_address[1]
        self.base = (config.base or f"http://{config.host}:{self.port}").rstrip("/")

    # -- request handling -------------------------------------------------

    def _fetch(self, url: str) -> _Response:
        try:
            with self.client.stream("GET", url) as response:
                if response.status_code >= 400:
                    raise _UpstreamFailed(
                        502, f"upstream returned status {response.status_code}")
                declared = response.headers.get("content-length")
                if declared and int(declared) > self.config.max_page_size:
                    raise _SizeExceeded()
                chunks = []
                total = 0
                for chunk in response.iter_bytes():
                    total += len(chunk)
                    if total > self.config.max_page_size:
                        raise _SizeExceeded()
                    chunks.append(chunk)
                content_type = response.headers.get("content-type", "application/octet-stream")
                return _Response(200, content_type, b"".join(chunks))
        except httpx.TimeoutException:
            raise _UpstreamFailed(504, "upstream request timed out") from None
        except httpx.TooManyRedirects:
            raise _UpstreamFailed(502, "too many upstream redirects") from None
        except httpx.TransportError as exc:
            raise _UpstreamFailed(504, f"upstream unreachable: {exc}") from None

    def handle_annotate(self, query: str) -> _Response:
        params = parse_qs(query)
        urls = params.get("url", [])
        if not urls or not urls[0]:
            return self._error_response(400, "missing url parameter")
        url = urls[0]
        scheme = urlparse(url).scheme
        if scheme not in ("http", "https"):
            return self._error_response(400, f"unsupported url scheme: {scheme or 'none'}")

        cached = self.cache.get(url)
        if cached is not None:
            return cached

        try:
            upstream = self._fetch(url)
        except _SizeExceeded:
            return self._error_response(413, "upstream page exceeds the size limit")
        except _UpstreamFailed as exc:
            return self._error_response(exc.status, exc.message)

        main_type = upstream.content_type.split(";")[0].strip().lower()
        if main_type in _HTML_TYPES:
            header_charset = None
            for part in upstream.content_type.split(";")[1:]:
                key, _, value = part.partition("=")
                if key.strip().lower() == "charset" and value.strip():
                    header_charset = value.strip().strip('"')
            config = AnnotationConfig(
                verification=self.config.verification,
                encoding_override=self.config.encoding_override or header_charset,
                middleware_base=self.base,
            )
            body, report = annotate_bytes(upstream.body, url, self.lexicon, config)
            out = _Response(200, self._xv_content_type(body), body)
        else:
            out = _Response(200, upstream.content_type, upstream.body)
        self.cache.put(url, out)
        return out

    @staticmethod
    def _xv_content_type(body: bytes) -> str:
        first = body.split(b"\n", 1)[0].decode("ascii", "replace")
        charset = "utf-8"
        marker = 'encoding="'
        if marker in first:
            charset = first.split(marker, 1)[1].split('"', 1)[0]
        return f"application/xhtml+xml; charset={charset}"

    def _error_response(self, status: int, message: str) -> _Response:
        body = error_document(message)
        return _Response(status, "application/xhtml+xml; charset=utf-8", body)

    def handle_health(self) -> _Response:
        payload = json.dumps({
            "version": __version__,
            "lexicon_entries": len(self.lexicon),
        }).encode()
        return _Response(200, "application/json", payload)

    # -- plumbing ---------------------------------------------------------

    def _handler_class(self):
        service = self

        class Handler(BaseHTTPRequestHandler):
            def _send(self, response: _Response):
                self.send_response(response.status)
                self.send_header("Content-Type", response.content_type)
                self.send_header("Content-Length", str(len(response.body)))
                self.end_headers()
                self.wfile.write(response.body)

            def do_GET(self):
                parsed = urlparse(self.path)
                if parsed.path == "/annotate":
                    self._send(service.handle_annotate(parsed.query))
                elif parsed.path == "/health":
                    self._send(service.handle_health())
                else:
                    self._send(service._error_response(404, "unknown endpoint"))

            def _method_not_allowed(self):
                self._send(service._error_response(405, "only GET is supported"))

            do_POST = _method_not_allowed
            do_PUT = _method_not_allowed
            do_DELETE = _method_not_allowed
            do_PATCH = _method_not_allowed
            do_HEAD = _method_not_allowed

            def log_message(self, fmt, *args):  # keep test output quiet
                log.debug("%s %s", self.address_string(), fmt % args)

        return Handler

    def serve_forever(self):
        log.info("listening on %s (base %s)", self.port, self.base)
        try:
            self.server.serve_forever()
        finally:
            self.close()

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        thread.start()
        return thread

    def shutdown(self):
        self.server.shutdown()
        self.close()

    def close(self):
        self.server.server_close()
        self.client.close()
