"""Live case-management service over HTTP+JSON.

Endpoints:

    POST /models                          register a model document
    GET  /models                          list registered models
    GET  /models/{id}                     fetch a model document
    GET  /models/{id}/longrun?horizon=&mobilised_absorbing=&sweep=lo:hi:steps
    POST /cases                           {"model_id": ...} -> new case
    GET  /cases                           list cases
    POST /cases/{id}/observations         one period's raw observations
    POST /cases/{id}/evidence             direct task evidence
    GET  /cases/{id}/timeline?from=&to=   posterior timeline slice
    POST /cases/{id}/whatif               hypothetical continuation (no writes)

Models are stored immutably under a content-derived id (registration is
idempotent). Cases are event-sourced: the journal holds exactly the ingested
entries and replay reproduces the posterior bit for bit. Ingests to one case
are serialized by a per-case lock; a losing writer gets 409. Errors are JSON
``{code, message, findings?}`` with 400/404/409/422 per the cause.

Configuration: ``ESCALATE_ADDR`` (default 127.0.0.1:8080) and
``ESCALATE_DATA`` (journal directory, default ./escalate-data).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse
from uuid import uuid4

from .engine import (
    CaseState,
    EvidenceEvent,
    TimelinePoint,
    new_case,
    step,
    whatif,
)
from .errors import (
    ContradictoryEvidenceError,
    EscalateError,
    ModelFormatError,
)
from .intensity import ObservationRecord
from .model import ModelSpec, parse_model, serialize_model, validate_model
from .journal import Journal
from .scenarios import longrun_report

DEFAULT_ADDR = "127.0.0.1:8080"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, findings=None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.findings = findings

    def body(self) -> dict:
        doc = {"code": self.code, "message": str(self)}
        if self.findings is not None:
            doc["findings"] = self.findings
        return doc


def _clean(value):
    """JSON-safe floats: non-finite become 'inf'/'-inf'/'nan' strings."""
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def model_content_id(spec: ModelSpec) -> str:
    canonical = json.dumps(serialize_model(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass
class CaseHandle:
    case_id: str
    model_id: str
    created: str
    state: CaseState
    journal: Journal
    lock: threading.Lock = field(default_factory=threading.Lock)


def _point_doc(point: TimelinePoint, spec: ModelSpec) -> dict:
    actives = spec.active_ids
    return _clean(
        {
            "t": point.t,
            "predicted": dict(zip(spec.state_ids, point.predicted)),
            "posterior": dict(zip(spec.state_ids, point.posterior)),
            "score": point.score,
            "rho": dict(zip(actives, point.rho_post)),
            "log_lik_ratio": dict(zip(actives, point.log_lik_ratio)),
            "flat_evidence": point.flat_evidence,
        }
    )


def _summary_doc(handle: CaseHandle) -> dict:
    point = handle.state.timeline[-1]
    doc = _point_doc(point, handle.state.spec)
    return {
        "case_id": handle.case_id,
        "t": doc["t"],
        "posterior": doc["posterior"],
        "score": doc["score"],
        "rho": doc["rho"],
        "flat_evidence": doc["flat_evidence"],
        "journal_seq": handle.journal.seq,
    }


def _parse_observation(payload, spec: ModelSpec) -> ObservationRecord:
    if not isinstance(payload, dict) or "t" not in payload:
        raise ApiError(422, "SCHEMA", "observation needs {'t', 'values'}")
    t = payload["t"]
    if isinstance(t, bool) or not isinstance(t, (int, float)):
        raise ApiError(422, "SCHEMA", "'t' must be a number")
    values = payload.get("values", {})
    if not isinstance(values, dict):
        raise ApiError(422, "SCHEMA", "'values' must map observable ids to numbers")
    known = {o.id for o in spec.observables}
    cleaned = {}
    for key, value in values.items():
        if key not in known:
            raise ApiError(422, "SCHEMA", f"unknown observable {key!r}")
        if value is None:
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ApiError(422, "SCHEMA", f"value for {key!r} must be a number or null")
        cleaned[key] = float(value)
    return ObservationRecord(t=t, values=cleaned)


def _parse_evidence(payload, spec: ModelSpec) -> tuple[EvidenceEvent, ObservationRecord | None]:
    """Evidence body: {'t', 'tasks', 'values'?, 'note'?}. Optional 'values'
    carry the same period's routine observations; clamped tasks override
    their intensities either way (task sufficiency)."""
    if not isinstance(payload, dict) or "t" not in payload or "tasks" not in payload:
        raise ApiError(422, "SCHEMA", "evidence needs {'t', 'tasks'}")
    t = payload["t"]
    if isinstance(t, bool) or not isinstance(t, (int, float)):
        raise ApiError(422, "SCHEMA", "'t' must be a number")
    tasks = payload["tasks"]
    if not isinstance(tasks, dict) or not tasks:
        raise ApiError(422, "SCHEMA", "'tasks' must be a non-empty task->0/1 map")
    known = set(spec.task_ids)
    cleaned = {}
    for key, value in tasks.items():
        if key not in known:
            raise ApiError(422, "SCHEMA", f"unknown task {key!r}")
        if value not in (0, 1):
            raise ApiError(422, "SCHEMA", f"task {key!r} must be clamped to 0 or 1")
        cleaned[key] = int(value)
    record = _parse_observation(payload, spec) if "values" in payload else None
    return EvidenceEvent(t=t, tasks=cleaned, note=str(payload.get("note", ""))), record


class CaseService:
    """Application core: model registry plus event-sourced cases."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.models_dir = self.data_dir / "models"
        self.cases_dir = self.data_dir / "cases"
        self.models_dir.mkdir(parents=True, exist_ok=True)
        self.cases_dir.mkdir(parents=True, exist_ok=True)
        self.models: dict[str, ModelSpec] = {}
        self.cases: dict[str, CaseHandle] = {}
        self._registry_lock = threading.Lock()
        self._recover()

    # -- persistence --------------------------------------------------------

    def _recover(self):
        for path in sorted(self.models_dir.glob("*.json")):
            spec = parse_model(path.read_text())
            self.models[path.stem] = spec
        for path in sorted(self.cases_dir.glob("*.journal")):
            journal = Journal(path)
            entries = journal.read_all()
            if not entries or entries[0]["kind"] != "case-created":
                continue
            head = entries[0]["payload"]
            model_id = head["model_id"]
            spec = self.models[model_id]
            state = new_case(spec)
            for entry in entries[1:]:
                state = self._apply(state, spec, entry)
            self.cases[path.stem] = CaseHandle(
                case_id=path.stem,
                model_id=model_id,
                created=entries[0]["received"],
                state=state,
                journal=journal,
            )

    @staticmethod
    def _apply(state: CaseState, spec: ModelSpec, entry: dict) -> CaseState:
        kind = entry["kind"]
        if kind == "observation":
            return step(state, record=_parse_observation(entry["payload"], spec))
        if kind == "evidence":
            evidence, record = _parse_evidence(entry["payload"], spec)
            return step(state, record=record, evidence=evidence)
        if kind == "annotation":
            return state
        raise ApiError(500, "JOURNAL", f"unknown journal entry kind {kind!r}")

    @staticmethod
    def _now() -> str:
        return datetime.now(timezone.utc).isoformat()

    # -- operations ----------------------------------------------------------

    def register_model(self, document) -> tuple[str, bool]:
        try:
            spec = parse_model(document)
        except ModelFormatError as exc:
            raise ApiError(400, "FORMAT", str(exc))
        report = validate_model(spec)
        if not report.ok:
            findings = [
                {"severity": f.severity, "code": f.code, "message": f.message, "path": f.path}
                for f in report.findings
            ]
            raise ApiError(400, "INVALID_MODEL", "model failed validation", findings=findings)
        model_id = model_content_id(spec)
        with self._registry_lock:
            created = model_id not in self.models
            if created:
                path = self.models_dir / f"{model_id}.json"
                path.write_text(json.dumps(serialize_model(spec), indent=2, sort_keys=True))
                self.models[model_id] = spec
        return model_id, created

    def get_model(self, model_id: str) -> ModelSpec:
        try:
            return self.models[model_id]
        except KeyError:
            raise ApiError(404, "UNKNOWN_MODEL", f"no model {model_id!r}")

    def create_case(self, model_id: str) -> CaseHandle:
        spec = self.get_model(model_id)
        case_id = uuid4().hex[:16]
        journal = Journal(self.cases_dir / f"{case_id}.journal")
        received = self._now()
        journal.append("case-created", {"model_id": model_id}, received)
        handle = CaseHandle(
            case_id=case_id,
            model_id=model_id,
            created=received,
            state=new_case(spec),
            journal=journal,
        )
        with self._registry_lock:
            self.cases[case_id] = handle
        return handle

    def get_case(self, case_id: str) -> CaseHandle:
        try:
            return self.cases[case_id]
        except KeyError:
            raise ApiError(404, "UNKNOWN_CASE", f"no case {case_id!r}")

    def ingest(self, case_id: str, kind: str, payload) -> dict:
        handle = self.get_case(case_id)
        spec = handle.state.spec
        record = None
        evidence = None
        if kind == "observation":
            record = _parse_observation(payload, spec)
            t = record.t
        else:
            evidence, record = _parse_evidence(payload, spec)
            t = evidence.t
        with handle.lock:
            last = handle.state.last_t
            if last is not None and not t > last:
                raise ApiError(
                    409, "ORDER", f"timestamp {t} is not after the case's last event ({last})"
                )
            try:
                advanced = step(handle.state, record=record, evidence=evidence)
            except ContradictoryEvidenceError as exc:
                raise ApiError(422, "CONTRADICTORY_EVIDENCE", str(exc))
            handle.journal.append(kind, payload, self._now())
            handle.state = advanced
        return _summary_doc(handle)

    def timeline(self, case_id: str, t_from=None, t_to=None) -> dict:
        handle = self.get_case(case_id)
        spec = handle.state.spec
        points = [
            _point_doc(p, spec)
            for p in handle.state.timeline
            if (t_from is None or p.t >= t_from) and (t_to is None or p.t <= t_to)
        ]
        return {"case_id": case_id, "model_id": handle.model_id, "points": points}

    def run_whatif(self, case_id: str, payload) -> dict:
        handle = self.get_case(case_id)
        spec = handle.state.spec
        if not isinstance(payload, dict) or not isinstance(payload.get("entries", []), list):
            raise ApiError(422, "SCHEMA", "what-if needs {'entries': [...]}")
        steps = []
        for entry in payload.get("entries", []):
            if not isinstance(entry, dict) or "t" not in entry:
                raise ApiError(422, "SCHEMA", "each entry needs a 't'")
            record = _parse_observation(entry, spec) if "values" in entry else None
            evidence = _parse_evidence(entry, spec)[0] if "tasks" in entry else None
            if record is None and evidence is None:
                raise ApiError(422, "SCHEMA", "each entry needs 'values' or 'tasks'")
            steps.append((record, evidence))
        try:
            timeline = whatif(handle.state, steps)
        except ContradictoryEvidenceError as exc:
            raise ApiError(422, "CONTRADICTORY_EVIDENCE", str(exc))
        except ValueError as exc:
            raise ApiError(422, "SCHEMA", str(exc))
        return {"case_id": case_id, "points": [_point_doc(p, spec) for p in timeline]}

    def longrun(self, model_id: str, horizon, mobilised_absorbing, sweep) -> dict:
        spec = self.get_model(model_id)
        report = longrun_report(
            spec,
            horizon=horizon,
            mobilised_absorbing=mobilised_absorbing or sweep is not None,
            neutral_rate_sweep=sweep,
        )
        return _clean(
            {
                "model_id": model_id,
                "variant": report.variant,
                "steps": report.steps,
                "converged": report.converged,
                "terminal": dict(zip(report.states, report.terminal)),
                "sweep": [
                    {"neutral_rate": r, "terminal_neutral": n, "terminal_absorbed": a}
                    for r, n, a in report.sweep
                ],
            }
        )

    def list_models(self) -> dict:
        return {
            "models": [
                {"model_id": mid, "label": spec.label, "states": list(spec.state_ids)}
                for mid, spec in sorted(self.models.items())
            ]
        }

    def list_cases(self) -> dict:
        return {
            "cases": [
                {
                    "case_id": h.case_id,
                    "model_id": h.model_id,
                    "created": h.created,
                    "t": h.state.timeline[-1].t,
                    "score": _clean(h.state.timeline[-1].score),
                }
                for h in sorted(self.cases.values(), key=lambda h: h.created)
            ]
        }

    def model_document(self, model_id: str) -> dict:
        spec = self.get_model(model_id)
        return {"model_id": model_id, "document": serialize_model(spec)}


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

_ROUTES = [
    ("POST", re.compile(r"^/models$"), "post_models"),
    ("GET", re.compile(r"^/models$"), "get_models"),
    ("GET", re.compile(r"^/models/(?P<model_id>[\w-]+)$"), "get_model"),
    ("GET", re.compile(r"^/models/(?P<model_id>[\w-]+)/longrun$"), "get_longrun"),
    ("POST", re.compile(r"^/cases$"), "post_cases"),
    ("GET", re.compile(r"^/cases$"), "get_cases"),
    ("POST", re.compile(r"^/cases/(?P<case_id>[\w-]+)/observations$"), "post_observations"),
    ("POST", re.compile(r"^/cases/(?P<case_id>[\w-]+)/evidence$"), "post_evidence"),
    ("GET", re.compile(r"^/cases/(?P<case_id>[\w-]+)/timeline$"), "get_timeline"),
    ("POST", re.compile(r"^/cases/(?P<case_id>[\w-]+)/whatif$"), "post_whatif"),
]


class _Handler(BaseHTTPRequestHandler):
    service: CaseService = None  # set by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    # -- plumbing ------------------------------------------------------------

    def _send(self, status: int, doc: dict):
        blob = json.dumps(doc).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(blob)

    def _body(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return None
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ApiError(422, "SCHEMA", f"request body is not valid JSON: {exc.msg}")

    def _dispatch(self, method: str):
        parsed = urlparse(self.path)
        for verb, pattern, name in _ROUTES:
            if verb != method:
                continue
            match = pattern.match(parsed.path)
            if match:
                query = {k: v[-1] for k, v in parse_qs(parsed.query).items()}
                try:
                    getattr(self, name)(query=query, **match.groupdict())
                except ApiError as exc:
                    self._send(exc.status, exc.body())
                except EscalateError as exc:
                    self._send(500, {"code": "ENGINE", "message": str(exc)})
                return
        self._send(404, {"code": "NO_ROUTE", "message": f"no route for {method} {parsed.path}"})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    # -- handlers -------------------------------------------------------------

    def post_models(self, query):
        body = self._body()
        if body is None:
            raise ApiError(422, "SCHEMA", "request body required")
        model_id, created = self.service.register_model(body)
        self._send(201 if created else 200, {"model_id": model_id})

    def get_models(self, query):
        self._send(200, self.service.list_models())

    def get_model(self, query, model_id):
        self._send(200, self.service.model_document(model_id))

    def get_longrun(self, query, model_id):
        horizon = int(query.get("horizon", 10**6))
        mobilised = query.get("mobilised_absorbing", "false").lower() in ("1", "true", "yes")
        sweep = None
        if "sweep" in query:
            lo, hi, steps = query["sweep"].split(":")
            sweep = (float(lo), float(hi), int(steps))
        self._send(200, self.service.longrun(model_id, horizon, mobilised, sweep))

    def post_cases(self, query):
        body = self._body() or {}
        model_id = body.get("model_id")
        if not isinstance(model_id, str):
            raise ApiError(422, "SCHEMA", "body needs {'model_id': ...}")
        handle = self.service.create_case(model_id)
        self._send(201, _summary_doc(handle) | {"model_id": handle.model_id})

    def get_cases(self, query):
        self._send(200, self.service.list_cases())

    def post_observations(self, query, case_id):
        self._send(200, self.service.ingest(case_id, "observation", self._body()))

    def post_evidence(self, query, case_id):
        self._send(200, self.service.ingest(case_id, "evidence", self._body()))

    def get_timeline(self, query, case_id):
        t_from = float(query["from"]) if "from" in query else None
        t_to = float(query["to"]) if "to" in query else None
        self._send(200, self.service.timeline(case_id, t_from, t_to))

    def post_whatif(self, query, case_id):
        self._send(200, self.service.run_whatif(case_id, self._body()))


def make_server(data_dir, addr: str | None = None) -> ThreadingHTTPServer:
    host, _, port = (addr or os.environ.get("ESCALATE_ADDR", DEFAULT_ADDR)).partition(":")
    service = CaseService(data_dir)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host, int(port or 0)), handler)
    server.service = service
    return server


def main() -> int:
    data_dir = os.environ.get("ESCALATE_DATA", "./escalate-data")
    server = make_server(data_dir)
    host, port = server.server_address[:2]
    print(f"escalate case service on http://{host}:{port} (data: {data_dir})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
