"""The live case service over HTTP: register a model, open a case, stream
a few weeks of observations, drop in direct evidence, preview a what-if.

Every ingest is journaled before it is acknowledged; restarting the service
replays the journals and reproduces every posterior bit for bit.
"""

import json
import tempfile
import threading
import urllib.request
from pathlib import Path

from escalate.service import make_server

ROOT = Path(__file__).resolve().parent.parent


def call(server, method, path, body=None):
    host, port = server.server_address[:2]
    request = urllib.request.Request(
        f"http://{host}:{port}{path}",
        method=method,
        data=json.dumps(body).encode() if body is not None else None,
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(request) as resp:
        return json.loads(resp.read())


with tempfile.TemporaryDirectory() as data_dir:
    server = make_server(data_dir, addr="127.0.0.1:0")
    threading.Thread(target=server.serve_forever, daemon=True).start()
    host, port = server.server_address[:2]
    print(f"service on http://{host}:{port}, journals in {data_dir}")

    document = json.loads((ROOT / "models" / "vehicle_attack.json").read_text())
    model = call(server, "POST", "/models", document)
    print(f"registered model {model['model_id']}")

    case = call(server, "POST", "/cases", {"model_id": model["model_id"]})
    cid = case["case_id"]
    print(f"case {cid} opened at priors {case['posterior']}")

    weeks = [
        {"t": 1, "values": {"obs_rad_web": 6, "obs_e_meets": 4, "obs_phys_meets": 2}},
        {"t": 2, "values": {"obs_rad_web": 7, "obs_finance_up": 1}},
        {"t": 3, "values": {"obs_rad_web": 6, "obs_dealer_web": 2, "obs_finance_down": 1}},
    ]
    for week in weeks:
        summary = call(server, "POST", f"/cases/{cid}/observations", week)
        print(f"week {week['t']}: score {summary['score']:.3f}")

    summary = call(
        server, "POST", f"/cases/{cid}/evidence",
        {"t": 4, "tasks": {"t_obtain_vehicle": 1}, "note": "dealer confirms purchase"},
    )
    print(f"evidence at t=4: posterior { {k: round(v, 3) for k, v in summary['posterior'].items()} }")

    preview = call(
        server, "POST", f"/cases/{cid}/whatif",
        {"entries": [{"t": 5, "tasks": {"t_move_to_target": 1}}]},
    )
    print(f"what-if Mobilised: {preview['points'][-1]['posterior']['M']:.3f} "
          f"(committed: {summary['posterior']['M']:.3f})")

    timeline = call(server, "GET", f"/cases/{cid}/timeline")
    print(f"timeline has {len(timeline['points'])} points; "
          f"journal untouched by the what-if")

    server.shutdown()
    server.server_close()
