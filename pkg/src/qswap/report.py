"""Turn a :class:`~qswap.engine.RunReport` into JSON, CSV or text documents.

Floats are written with ``repr`` (shortest round-trip form) and keys in a
fixed order, so identical runs give byte-identical output.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from importlib import resources

from . import __version__
from . import atoms as atomdyn
from .dsl import serialize
from .engine import RunReport, bell_target_state
from .hilbert import subsystem_fidelity
from .steps import BELL_KINDS, AssertFidelity

SCHEMA_VERSION = 1
SCHEMA_FILE = "report-v1.schema.json"
CSV_COLUMNS = ("branch", "path", "status", "probability", "conditional_probability",
               "bell_pair", "bell_label", "bell_fidelity")


def load_schema() -> dict:
    text = resources.files("qswap").joinpath("schemas", SCHEMA_FILE).read_text("utf-8")
    return json.loads(text)


def protocol_hash(protocol) -> str:
    return hashlib.sha256(serialize(protocol).encode("utf-8")).hexdigest()


def _bell_pairs(report: RunReport) -> list[tuple[str, ...]]:
    pairs = []
    for s in report.protocol.steps:
        if isinstance(s, AssertFidelity) and s.atoms not in pairs:
            pairs.append(s.atoms)
    return pairs


def bell_labels(report: RunReport, branch) -> list[dict]:
    """Closest Bell state for every atom pair that the protocol asserts on."""
    atoms = report.protocol.atoms()
    out = []
    for pair in _bell_pairs(report):
        sp = atomdyn.get_species(atoms[pair[0]])
        fids = {k: subsystem_fidelity(branch.state, pair, bell_target_state(k, sp, pair))
                for k in BELL_KINDS}
        best = max(BELL_KINDS, key=lambda k: fids[k])
        out.append({"atoms": list(pair), "label": best, "fidelity": fids[best]})
    return out


def build_document(report: RunReport, wall_time: float | None = None) -> dict:
    total = report.total_probability
    branches = []
    for k, b in enumerate(report.branches):
        branches.append({
            "index": k,
            "path": [{"atom": a, "level": lv} for a, lv in b.path],
            "status": "failed" if b.failed else "success",
            "probability": b.probability,
            "conditional_probability": b.probability / total,
            "bell": [] if b.failed else bell_labels(report, b),
        })
    assertions = [{
        "step": a.step,
        "kind": a.kind,
        "description": a.description,
        "value": a.value,
        "passed": a.passed,
        "branch": a.branch,
    } for a in report.assertions]
    n_pass = sum(a.passed for a in report.assertions)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "engine_version": __version__,
        "protocol": {
            "name": report.protocol.name,
            "sha256": protocol_hash(report.protocol),
            "steps": len(report.protocol.steps),
            "n_max": report.n_max,
        },
        "branches": branches,
        "postselections": [{"step": p.step, "atom": p.atom, "level": p.level,
                            "probability": p.probability} for p in report.postselections],
        "assertions": assertions,
        "totals": {
            "total_probability": total,
            "success_probability": report.success_probability,
            "postselection_probability": report.postselection_probability,
            "assertions_passed": n_pass,
            "assertions_failed": len(assertions) - n_pass,
            "passed": report.passed,
        },
    }
    if wall_time is not None:
        doc["wall_time_s"] = wall_time
    return doc


def to_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def to_csv(doc: dict) -> str:
    """One row per (branch, asserted pair); failed branches get empty Bell cells."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for b in doc["branches"]:
        path = " ".join(f"{p['atom']}={p['level']}" for p in b["path"]) or "-"
        head = [b["index"], path, b["status"], repr(b["probability"]),
                repr(b["conditional_probability"])]
        if not b["bell"]:
            w.writerow(head + ["", "", ""])
        for bell in b["bell"]:
            w.writerow(head + [" ".join(bell["atoms"]), bell["label"], repr(bell["fidelity"])])
    return buf.getvalue()


def to_text(doc: dict) -> str:
    p = doc["protocol"]
    lines = [f"protocol {p['name']}  (n_max {p['n_max']}, {p['steps']} steps, sha256 {p['sha256'][:12]})",
             ""]
    for ps in doc["postselections"]:
        lines.append(f"post-select {ps['atom']}={ps['level']} at step {ps['step']}: "
                     f"p = {ps['probability']!r}")
    if doc["postselections"]:
        lines.append("")
    lines.append(f"{'#':>3}  {'status':7}  {'probability':<22}  {'conditional':<22}  path / Bell")
    for b in doc["branches"]:
        path = " ".join(f"{q['atom']}={q['level']}" for q in b["path"]) or "-"
        bell = ", ".join(f"{' '.join(x['atoms'])}: {x['label']} ({x['fidelity']:.12f})"
                         for x in b["bell"])
        lines.append(f"{b['index']:>3}  {b['status']:7}  {b['probability']!r:<22}  "
                     f"{b['conditional_probability']!r:<22}  {path}" + (f"  [{bell}]" if bell else ""))
    lines.append("")
    for a in doc["assertions"]:
        mark = "PASS" if a["passed"] else "FAIL"
        where = f" (branch {a['branch']})" if a["branch"] is not None else ""
        lines.append(f"{mark}  step {a['step']}: {a['description']}{where}: value {a['value']!r}")
    t = doc["totals"]
    lines += ["",
              f"success probability        {t['success_probability']!r}",
              f"post-selection probability {t['postselection_probability']!r}",
              f"assertions {t['assertions_passed']} passed, {t['assertions_failed']} failed"]
    if "wall_time_s" in doc:
        lines.append(f"wall time {doc['wall_time_s']:.3f} s")
    return "\n".join(lines) + "\n"


FORMATTERS = {"json": to_json, "csv": to_csv, "text": to_text}
