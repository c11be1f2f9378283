"""Report emission: machine JSON, aligned text tables, CSV, and figures.

Reports are deterministic for a fixed config and seed except for the wall-time
fields (and the PNG bytes, which carry library metadata).  Non-finite floats
are serialized as strings so the JSON stays strict.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

__all__ = [
    "sanitize",
    "write_json",
    "render_text_table",
    "write_verify_report",
    "write_sweep_report",
    "write_spectrum_report",
]


def sanitize(obj):
    """Recursively convert payloads to strict-JSON-safe primitives."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return sanitize(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if isinstance(obj, (np.complexfloating, complex)):
        return {"re": sanitize(obj.real), "im": sanitize(obj.imag)}
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    return obj


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(sanitize(payload), indent=2, sort_keys=True) + "\n")


def _fmt(value, width=12):
    if value is None:
        return " " * (width - 1) + "-"
    if isinstance(value, float):
        return f"{value:>{width}.3e}"
    return f"{value!s:>{width}}"


def render_text_table(results) -> str:
    """Aligned human-readable table of CheckResults."""
    header = (f"{'check':<34} {'kind':<12} {'residual':>12} {'measured':>12} "
              f"{'bound':>12} {'tol':>9} {'pass':>5} {'time[s]':>8}")
    lines = [header, "-" * len(header)]
    for r in results:
        lines.append(
            f"{r.name:<34} {r.kind:<12} {_fmt(r.residual)} {_fmt(r.measured)} "
            f"{_fmt(r.bound)} {r.tolerance:>9.1e} "
            f"{'ok' if r.passed else 'FAIL':>5} {r.wall_time_s:>8.2f}")
    n_pass = sum(1 for r in results if r.passed)
    lines.append("-" * len(header))
    lines.append(f"{n_pass}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"


def _maybe_figure(enabled: bool, render, path: Path):
    if not enabled:
        return None
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig = render(plt)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return str(path)


def _verify_figure(results):
    def render(plt):
        names = [r.name for r in results]
        values = []
        for r in results:
            v = r.residual if r.residual is not None else (
                r.measured if r.measured is not None else 0.0)
            values.append(max(abs(v), 1e-18))
        tols = [max(r.tolerance, 1e-18) for r in results]
        colors = ["tab:green" if r.passed else "tab:red" for r in results]
        fig, ax = plt.subplots(figsize=(9, 0.42 * len(results) + 1.6))
        y = np.arange(len(results))
        ax.barh(y, values, color=colors, alpha=0.8)
        ax.scatter(tols, y, marker="|", s=160, color="k", label="tolerance / bound")
        ax.set_xscale("log")
        ax.set_yticks(y)
        ax.set_yticklabels(names, fontsize=8)
        ax.invert_yaxis()
        ax.set_xlabel("residual / measured value (log scale)")
        ax.set_title("verification residuals vs tolerances")
        ax.legend(loc="lower right", fontsize=8)
        fig.tight_layout()
        return fig

    return render


def write_verify_report(out_dir, config_echo: dict, results, figures: bool = True,
                        extras: dict | None = None) -> dict:
    """Write report.json, report.txt and the residual chart; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "config": config_echo,
        "results": [dataclasses.asdict(r) for r in results],
        "summary": {
            "total": len(results),
            "passed": sum(1 for r in results if r.passed),
            "failed": [r.name for r in results if not r.passed],
        },
    }
    if extras:
        payload["extras"] = extras
    write_json(out / "report.json", payload)
    (out / "report.txt").write_text(render_text_table(results))
    paths = {"json": str(out / "report.json"), "text": str(out / "report.txt")}
    fig = _maybe_figure(figures, _verify_figure(results), out / "residuals.png")
    if fig:
        paths["figure"] = fig
    return paths


def _sweep_figure(rows):
    def render(plt):
        es = [r.e for r in rows]
        fig, axes = plt.subplots(1, 3, figsize=(12, 3.4))
        axes[0].plot(es, [r.c1 for r in rows], "o-", label="C1 (free vs coupled)")
        axes[0].plot(es, [r.d1 for r in rows], "s--", label="D1 (coupled vs free)")
        axes[0].set_xlabel("coupling e")
        axes[0].set_ylabel("constant")
        axes[0].set_yscale("log")
        axes[0].legend(fontsize=8)
        axes[0].set_title("relative-bound constants")
        axes[1].plot(es, [r.ground_energy for r in rows], "o-")
        axes[1].set_xlabel("coupling e")
        axes[1].set_title("lowest Ritz value")
        axes[2].fill_between(es, [r.ratio_inf for r in rows],
                             [r.ratio_sup for r in rows], alpha=0.3)
        axes[2].plot(es, [r.ratio_sup for r in rows], "-")
        axes[2].plot(es, [r.ratio_inf for r in rows], "-")
        axes[2].set_xlabel("coupling e")
        axes[2].set_title("graph-norm ratio band")
        fig.tight_layout()
        return fig

    return render


def write_sweep_report(out_dir, config_echo: dict, sweep, figures: bool = True) -> dict:
    """Write sweep.csv (delimited), sweep.json, and the sweep figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    csv_path.write_text("\n".join(sweep.csv_lines()) + "\n")
    payload = {
        "config": config_echo,
        "shift_grid": sweep.shift_grid,
        "all_finite": sweep.all_finite,
        "free_row_exact": sweep.free_row_exact,
        "monotone_ok": sweep.monotone_ok,
        "rows": [dataclasses.asdict(r) for r in sweep.rows],
    }
    write_json(out / "sweep.json", payload)
    paths = {"csv": str(csv_path), "json": str(out / "sweep.json")}
    fig = _maybe_figure(figures, _sweep_figure(sweep.rows), out / "sweep.png")
    if fig:
        paths["figure"] = fig
    return paths


def write_spectrum_report(out_dir, config_echo: dict, values, residuals,
                          details: dict, figures: bool = True) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "config": config_echo,
        "eigenvalues": list(values),
        "residuals": list(residuals),
        "details": details,
    }
    write_json(out / "spectrum.json", payload)
    paths = {"json": str(out / "spectrum.json")}

    def render(plt):
        fig, ax = plt.subplots(figsize=(6, 3.2))
        ax.plot(range(len(values)), values, "o")
        ax.set_xlabel("index")
        ax.set_ylabel("Ritz value")
        ax.set_title("lowest spectrum of the assembled Hamiltonian")
        fig.tight_layout()
        return fig

    fig = _maybe_figure(figures, render, out / "spectrum.png")
    if fig:
        paths["figure"] = fig
    return paths


def write_kato_figure(out_dir, estimates, figures: bool = True) -> str | None:
    def render(plt):
        finite = [est for est in estimates if np.isfinite(est.a_min)]
        bs = [est.b for est in finite]
        amins = [est.a_min for est in finite]
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(bs, amins, "o-")
        ax.set_xlabel("b")
        ax.set_ylabel("a_min(b)")
        ax.set_title("relative-bound margin of the softened Coulomb term")
        fig.tight_layout()
        return fig

    return _maybe_figure(figures, render, Path(out_dir) / "kato.png")
