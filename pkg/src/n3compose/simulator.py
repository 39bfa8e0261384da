"""In-process hypermedia servers used as transports: the image API from
the thumbnail use case and the generated benchmark chains. An optional
adapter binds the same handlers to a real HTTP socket.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Dict, Optional
from urllib.parse import urljoin
from urllib.request import Request, urlopen

from . import n3
from .n3 import Document, Formula, Literal, Triple, Uri
from .restdesc import WireRequest

DBPEDIA_NS = "http://dbpedia.org/resource/"
DBPEDIA_OWL_NS = "http://dbpedia.org/ontology/"
IMAGE_NS = "http://example.org/image#"

IMAGE_PREFIXES = {
    "dbpedia": DBPEDIA_NS,
    "dbpedia-owl": DBPEDIA_OWL_NS,
    "ex": IMAGE_NS,
}

N3_MEDIA_TYPE = "text/n3"


@dataclass(frozen=True)
class WireResponse:
    status: int
    media_type: str = N3_MEDIA_TYPE
    body: str = ""

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300


@dataclass
class FaultConfig:
    drop_body: bool = False        # success status but empty payload
    wrong_triples: bool = False    # payload unrelated to the request
    server_error: bool = False     # 500 with empty payload


_NOISE_BODY = "<urn:uuid:noise> a <urn:uuid:Noise>.\n"


def _faulted(response: WireResponse, faults: FaultConfig) -> WireResponse:
    if faults.server_error:
        return WireResponse(status=500, body="")
    if faults.drop_body:
        return WireResponse(status=response.status, body="")
    if faults.wrong_triples:
        return WireResponse(status=response.status, body=_NOISE_BODY)
    return response


class ImageServer:
    """The image upload / thumbnail API.

    POST /images/ stores the posted entity under a fresh id and responds
    with hypermedia links to its comments and thumbnail; the response
    describes both the new server resource and the posted entity itself,
    so clients can connect the links to what they uploaded.
    """

    def __init__(self, counter_start: int = 24, faults: Optional[FaultConfig] = None):
        self.next_id = counter_start
        self.images: Dict[int, Optional[str]] = {}   # id -> posted entity ref
        self.faults = faults or FaultConfig()
        self._lock = threading.Lock()

    def handle(self, req: WireRequest) -> WireResponse:
        with self._lock:
            return _faulted(self._dispatch(req), self.faults)

    def send(self, req: WireRequest) -> WireResponse:
        return self.handle(req)

    def _dispatch(self, req: WireRequest) -> WireResponse:
        path = req.target
        if req.method == "POST" and path == "/images/":
            return self._post_image(req)
        if req.method == "GET":
            image_id, kind = self._parse_path(path)
            if image_id in self.images:
                if kind == "thumbnail":
                    return self._get_thumbnail(image_id)
                if kind == "comments":
                    return self._get_comments(image_id)
        return WireResponse(status=404, body="")

    def _parse_path(self, path: str):
        parts = path.strip("/").split("/")
        if len(parts) == 3 and parts[0] == "images" and parts[1].isdigit():
            return int(parts[1]), parts[2]
        return None, None

    def _post_image(self, req: WireRequest) -> WireResponse:
        image_id = self.next_id
        self.next_id += 1
        entity = req.body_ref
        if entity is None and req.body_inline:
            payload = req.body_inline.strip()
            # over the wire an entity reference arrives as the raw payload
            if payload and " " not in payload and "\n" not in payload:
                entity = payload
        self.images[image_id] = entity
        image = Uri(f"/images/{image_id}")
        comments = Uri(f"/images/{image_id}/comments")
        thumbnail = Uri(f"/images/{image_id}/thumbnail")
        subjects = [image]
        if entity:
            subjects.append(Uri(entity))
        atoms = []
        for subject in subjects:
            atoms += [
                Triple(subject, Uri(n3.RDF_TYPE), Uri(DBPEDIA_NS + "Image")),
                Triple(subject, Uri(IMAGE_NS + "comments"), comments),
                Triple(subject, Uri(IMAGE_NS + "smallThumbnail"), thumbnail),
            ]
        body = n3.serialize(Document(prefixes=dict(IMAGE_PREFIXES), body=Formula(atoms)))
        return WireResponse(status=201, body=body)

    def _get_thumbnail(self, image_id: int) -> WireResponse:
        image = Uri(f"/images/{image_id}")
        thumbnail = Uri(f"/images/{image_id}/thumbnail")
        subjects = [image]
        entity = self.images.get(image_id)
        if entity:
            subjects.append(Uri(entity))
        atoms = [Triple(s, Uri(DBPEDIA_OWL_NS + "thumbnail"), thumbnail) for s in subjects]
        atoms += [
            Triple(thumbnail, Uri(n3.RDF_TYPE), Uri(DBPEDIA_NS + "Image")),
            Triple(thumbnail, Uri(DBPEDIA_OWL_NS + "height"),
                   Literal("80.0", n3.XSD_DECIMAL)),
        ]
        body = n3.serialize(Document(prefixes=dict(IMAGE_PREFIXES), body=Formula(atoms)))
        return WireResponse(status=200, body=body)

    def _get_comments(self, image_id: int) -> WireResponse:
        comments = Uri(f"/images/{image_id}/comments")
        atoms = [Triple(comments, Uri(n3.RDF_TYPE), Uri(IMAGE_NS + "Comments"))]
        body = n3.serialize(Document(prefixes=dict(IMAGE_PREFIXES), body=Formula(atoms)))
        return WireResponse(status=200, body=body)


class ChainServer:
    """Serves the generated benchmark chain: a GET on a chain resource
    returns exactly the triples grounding the next description's
    precondition."""

    def __init__(self, link_table: Dict[str, str], faults: Optional[FaultConfig] = None):
        self.link_table = dict(link_table)
        self.faults = faults or FaultConfig()
        self.operations = 0
        self._lock = threading.Lock()

    def handle(self, req: WireRequest) -> WireResponse:
        with self._lock:
            self.operations += 1
            if req.method == "GET" and req.target in self.link_table:
                response = WireResponse(status=200, body=self.link_table[req.target])
            else:
                response = WireResponse(status=404, body="")
            return _faulted(response, self.faults)

    def send(self, req: WireRequest) -> WireResponse:
        return self.handle(req)


# ---------------------------------------------------------------------------
# Real-HTTP adapter: same handlers behind a socket
# ---------------------------------------------------------------------------

def make_http_server(server, port: int = 0) -> ThreadingHTTPServer:
    """Bind an in-process server's handle() to a listening socket; the
    caller owns the returned server's lifecycle."""

    class Handler(BaseHTTPRequestHandler):
        def _run(self, method: str):
            length = int(self.headers.get("Content-Length") or 0)
            payload = self.rfile.read(length).decode() if length else None
            req = WireRequest(method=method, target=self.path,
                              body_inline=payload)
            resp = server.handle(req)
            self.send_response(resp.status)
            body = resp.body.encode()
            self.send_header("Content-Type", resp.media_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            self._run("GET")

        def do_POST(self):
            self._run("POST")

        def log_message(self, *args):
            pass

    return ThreadingHTTPServer(("127.0.0.1", port), Handler)


class HttpTransport:
    """Sends wire requests to a real HTTP endpoint; relative targets are
    resolved against the base URL."""

    def __init__(self, base_url: str):
        self.base_url = base_url

    def send(self, req: WireRequest) -> WireResponse:
        url = urljoin(self.base_url, req.target)
        data = None
        if req.body_inline is not None:
            data = req.body_inline.encode()
        elif req.body_ref is not None:
            data = req.body_ref.encode()
        http_req = Request(url, data=data, method=req.method)
        try:
            with urlopen(http_req) as resp:
                return WireResponse(status=resp.status,
                                    media_type=resp.headers.get_content_type(),
                                    body=resp.read().decode())
        except Exception as exc:
            status = getattr(exc, "code", None)
            if status is None:
                raise
            return WireResponse(status=status, body="")
