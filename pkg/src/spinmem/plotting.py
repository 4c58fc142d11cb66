"""Optional PNG figures next to the CSV outputs (Agg backend, no display)."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps the PNG bytes reproducible
    fig.savefig(path, metadata={"Software": None})
    return path


def plot_spectrum(path, omegas, kappas, surface, unit: str = "MHz") -> Path:
    """Reflection line (one kappa) or log-scaled surface R(kappa, omega)."""
    plt = _pyplot()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        surface = np.atleast_2d(surface)
        if len(kappas) <= 1:
            ax.plot(omegas, surface[0], lw=1.2)
            ax.set_ylabel("reflection R")
            ax.set_ylim(-0.02, 1.02)
        else:
            img = ax.pcolormesh(omegas, kappas, np.log10(np.clip(surface, 1e-12, None)), shading="auto",
                                cmap="viridis")
            fig.colorbar(img, ax=ax, label="log10 R")
            ax.set_ylabel(f"kappa [{unit}]")
        ax.set_xlabel(f"probe detuning omega [{unit}]")
        fig.tight_layout()
        out = _save(fig, path)
        plt.close(fig)
    return out


def plot_trace(path, trace, events=(), time_scale: float = 1.0, unit: str = "us") -> Path:
    """Input/output intensity and spin excitation versus time."""
    plt = _pyplot()
    t = trace.t / time_scale
    with plt.rc_context(STYLE):
        fig, (a0, a1) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.0))
        peak = float(np.max(np.abs(trace.e_in) ** 2)) or 1.0
        e_in = float(trace.cumulative_in[-1]) or 1.0
        a0.plot(t, np.abs(trace.e_in) ** 2 / peak, label="|E_in|^2", lw=1.0)
        a0.plot(t, np.abs(trace.e_out) ** 2 / peak, label="|E_out|^2", lw=1.0)
        a0.set_ylabel("intensity / input peak")
        a0.set_yscale("symlog", linthresh=1e-6)
        a0.legend(loc="upper right", fontsize=7)
        a1.plot(t, trace.spin_norm / e_in, color="tab:green", lw=1.0)
        a1.set_ylabel("spin excitation / input")
        a1.set_xlabel(f"t [{unit}]")
        for te, name in events:
            for a in (a0, a1):
                a.axvline(te / time_scale, color="0.5", lw=0.6, ls=":")
        fig.tight_layout()
        out = _save(fig, path)
        plt.close(fig)
    return out


def plot_sweep(path, x, columns: dict, xlabel: str, logy: bool = False) -> Path:
    """One line per named column against the sweep variable."""
    plt = _pyplot()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, y in columns.items():
            ax.plot(x, y, "o-", ms=3, lw=1.0, label=name)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.legend(fontsize=7)
        fig.tight_layout()
        out = _save(fig, path)
        plt.close(fig)
    return out
