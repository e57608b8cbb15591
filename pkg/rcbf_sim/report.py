import csv
import html
import json
import os

from .sim import CSV_HEADER, TrajectoryLog


def write_csv(rows, outdir, name, fieldnames=None):
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fieldnames or list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)
    return path


def write_trajectory(log: TrajectoryLog, outdir):
    return write_csv(log.to_rows(), outdir, "trajectory.csv", fieldnames=CSV_HEADER)


def write_summary(summary, outdir, name="summary.json"):
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=False)
        f.write("\n")
    return path


def _esc(x):
    return html.escape(str(x if x is not None else ""))


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    return x


def _table(pairs):
    rows = "".join(f"<tr><th>{_esc(k)}</th><td>{_esc(_fmt(v))}</td></tr>" for k, v in pairs)
    return f"<table>{rows}</table>"


def write_html(summary, outdir):
    safety = summary["safety"]
    verdict = "held" if safety["held"] else f"VIOLATED in {safety['violations']} steps"
    overview = _table(
        [
            ("scenario", summary["scenario"]),
            ("seed", summary["seed"]),
            ("steps", summary["steps"]),
            ("duration [s]", summary["duration"]),
            ("closest approach [m]", summary["min_distance"]),
            ("max H [m]", summary["max_H"]),
            ("max h [m]", summary["max_h"]),
            ("safety", verdict),
            ("started in restricted safe set", safety["started_in_restricted_set"]),
            ("QP fallbacks", summary["infeasible_steps"]),
        ]
    )
    barrier = _table(sorted(summary["rcbf"].items()))
    switching = _table(
        [("switches on", summary["switches"]["on"]), ("switches off", summary["switches"]["off"])]
        + [(f"{k} active", n) for k, n in summary["active_histogram"].items()]
    )
    timing = _table([(f"{k} [ms]", v) for k, v in summary["step_ms"].items()])
    config = f"<pre><code>{_esc(json.dumps(summary['config'], indent=2))}</code></pre>"

    html_doc = (
        "<!doctype html>"
        f"<html><head><meta charset='utf-8'><title>RCBF run: {_esc(summary['scenario'])}</title>"
        "<style>"
        " body{font-family:system-ui,Segoe UI,Arial;margin:24px;}"
        " h1{margin-bottom:8px}"
        " h2{margin-top:24px;border-bottom:1px solid #ddd;padding-bottom:4px}"
        " code{background:#f6f8fa;padding:2px 4px;border-radius:4px}"
        " th{text-align:left;padding-right:16px;font-weight:normal;color:#333}"
        " .note{color:#555}"
        "</style></head><body>"
        f"<h1>RCBF run: {_esc(summary['scenario'])}</h1>"
        "<p class='note'>Generated locally from summary.json; per-step data is in trajectory.csv.</p>"
        f"<h2>Outcome</h2>{overview}"
        f"<h2>Barrier</h2>{barrier}"
        f"<h2>Switching</h2>{switching}"
        f"<h2>Step time</h2>{timing}"
        f"<h2>Configuration</h2>{config}"
        "</body></html>"
    )

    path = os.path.join(outdir, "report.html")
    with open(path, "w") as f:
        f.write(html_doc)
    return path


def write_run(log: TrajectoryLog, outdir, extra=None):
    """Write trajectory.csv, summary.json and report.html; returns the summary."""

    summary = log.summary()
    if extra:
        summary["rcbf"].update(extra)
    write_trajectory(log, outdir)
    write_summary(summary, outdir)
    write_html(summary, outdir)
    return summary
