"""Writing an :class:`EvalReport` to disk.

Four files are produced: ``report.md`` (human-readable tables),
``metrics.csv`` (one row per family and fold), ``report.json`` (the full
structure) and ``diagnostics.json`` (forest diagnostics).  Each embeds the
run's config digest.  Nothing time- or host-dependent is written, so equal
reports give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .evaluate import EvalReport

REPORT_FILES = ("report.md", "metrics.csv", "report.json", "diagnostics.json")
METRICS_COLUMNS = ("config_digest", "family", "fold", "n_test", "rmse", "r2", "mae", "excluded")


def _num(value, places: int = 3) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, str):
        return value
    if not math.isfinite(value):
        return "undefined" if math.isnan(value) or value < 0 else "inf"
    return f"{value:.{places}f}"


def _table(header, rows) -> list:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return lines


def render_markdown(report: EvalReport) -> str:
    out = [
        "# LGD model comparison",
        "",
        f"config digest: `{report.config_digest}`",
        "",
        f"- records: {report.n}",
        f"- proxy share: {report.mixture_proportion:.4f}",
        f"- folds: {report.plan.k} (seed {report.plan.seed})",
        "- fold proxy shares: " + ", ".join(f"{s:.3f}" for s in report.fold_proxy_shares),
        "",
        "## Held-out performance",
        "",
        "Fold-averaged metrics; pooled out-of-fold values in the last three columns.",
        "",
    ]
    rows = []
    for fam in report.ranking("rmse"):
        r = report.results[fam]
        rows.append(
            [fam, _num(r.mean.rmse), _num(r.mean.r2), _num(r.mean.mae),
             _num(r.pooled.rmse), _num(r.pooled.r2), _num(r.pooled.mae)]
        )
    out += _table(["model", "RMSE", "R2", "MAE", "pooled RMSE", "pooled R2", "pooled MAE"], rows)

    info = report.information
    out += ["", "## Mutual information with LGD", ""]
    rows = [
        [name, _num(c["mi_bits_sum"]), _num(c["r2_ceiling"]), _num(c["reference_mi_bits"]),
         _num(c["reference_approx_r2"], 2)]
        for name, c in info["categories"].items()
    ]
    out += _table(["category", "MI (bits)", "R2 ceiling", "reference MI", "reference approx R2"], rows)
    out += [""]
    rows = [[f["feature"], _num(f["mi_bits"]), _num(f["mi_bits_plugin"]), _num(f["r2_ceiling"])]
            for f in info["features"]]
    out += _table(["feature", "MI (bits)", "plug-in MI", "R2 ceiling"], rows)
    out += [
        "",
        f"- sum of per-feature MI: {_num(info['total_sum_bits'])} bits",
        f"- joint MI of continuous features: {_num(info['joint_bits'])} bits "
        f"(R2 ceiling {_num(info['joint_r2_ceiling'])})",
    ]

    if report.variance_shares is not None:
        out += ["", "## Info model variance decomposition", ""]
        rows = [[k, _num(v)] for k, v in report.variance_shares.items()]
        out += _table(["component", "share"], rows)
        p = report.info_parameters
        out += [
            "",
            f"- alpha (industry entropy): {_num(p['alpha'], 4)}",
            f"- beta (MI score): {_num(p['beta'], 4)}",
            f"- gamma (network centrality): {_num(p['gamma'], 4)}",
            f"- ridge lambda: {_num(p['ridge_lambda'], 6)}",
        ]

    if report.diagnostics is not None:
        d = report.diagnostics
        out += ["", "## Forest diagnostics", ""]
        rows = [[k, d.split_counts[k], _num(v)] for k, v in
                sorted(d.split_frequency.items(), key=lambda kv: (-kv[1], kv[0]))]
        out += _table(["feature", "splits", "share"], rows)
        lo, hi = d.prediction_range
        olo, ohi = d.outcome_range
        out += [
            "",
            f"- prediction range: {_num(lo)} to {_num(hi)}",
            f"- outcome range: {_num(olo)} to {_num(ohi)}",
            f"- outcome/prediction range ratio: {_num(d.range_ratio, 2)}",
            f"- leaves at least 90% proxy: {_num(d.pure_proxy_leaf_share())}",
        ]
    return "\n".join(out) + "\n"


def render_metrics_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_COLUMNS)
    for fam, res in report.results.items():
        for i, m in enumerate(res.per_fold):
            w.writerow(
                [report.config_digest, fam, i, len(res.test_indices[i]), repr(m.rmse),
                 repr(m.r2) if m.r2_defined else "undefined", repr(m.mae),
                 "true" if i in res.excluded_folds else "false"]
            )
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_report(report: EvalReport, directory) -> list:
    """Write the four report files into ``directory`` and return their paths.

    Raises
    ------
    ValueError
        If the report holds no model results.  Checked before anything is
        written.
    OSError
        If the directory cannot be created or written.
    """
    if not report.results:
        raise ValueError("report contains no models")
    contents = {
        "report.md": render_markdown(report),
        "metrics.csv": render_metrics_csv(report),
        "report.json": _dump(report.to_dict()),
        "diagnostics.json": _dump(
            {
                "config_digest": report.config_digest,
                "forest": report.diagnostics.to_dict() if report.diagnostics else None,
            }
        ),
    }
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in REPORT_FILES:
        path = directory / name
        path.write_text(contents[name], encoding="utf-8", newline="\n")
        paths.append(path)
    return paths
