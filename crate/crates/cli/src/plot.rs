/// Matplotlib script rendering the dynamics, spectrum and ladder figures
/// from the CSVs in its own directory plus the given series files.
pub fn plot_script(series: &[std::path::PathBuf], stems: &[String]) -> String {
    let series_list: Vec<String> = series
        .iter()
        .zip(stems)
        .map(|(p, s)| format!("    ({:?}, {:?}),", s, p.to_string_lossy()))
        .collect();
    format!(
        r#"#!/usr/bin/env python3
"""Render dynamics, spectrum and ladder figures from nucdyn CSV output.

Usage: python3 plot_spectra.py [--show]
"""
import csv
import os
import sys

import matplotlib

if "--show" not in sys.argv:
    matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
SERIES = [
{series}
]
TIME_WINDOW_FS = 250.0
FREQ_MAX_CM1 = 2000.0


def read(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    return {{name: [float(r[i]) for r in body] for i, name in enumerate(header)}}


def local(name):
    return os.path.join(HERE, name)


def plot_dynamics():
    fig, axes = plt.subplots(len(SERIES), 1, figsize=(7, 2.4 * len(SERIES)), squeeze=False)
    for ax, (label, path) in zip(axes[:, 0], SERIES):
        data = read(path)
        t = data["t_fs"]
        keep = [k for k, x in enumerate(t) if x <= TIME_WINDOW_FS]
        sites = [c for c in data if c.startswith("p_site_")]
        for c in sites:
            ax.plot([t[k] for k in keep], [data[c][k] for k in keep], lw=0.8, label=c[2:])
        ax.set_title(label, fontsize=9)
        ax.set_ylabel("probability")
        ax.set_ylim(0, 1)
    axes[-1, 0].set_xlabel("time (fs)")
    axes[0, 0].legend(fontsize=6, ncol=4)
    fig.tight_layout()
    fig.savefig(local("fig_dynamics.png"), dpi=150)


def plot_spectrum():
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for label, _ in SERIES:
        name = local("spectrum_" + label + ".csv")
        if os.path.exists(name):
            s = read(name)
            ax.plot(s["freq_cm1"], s["amplitude"], lw=0.6, alpha=0.6, label=label)
    s = read(local("spectrum.csv"))
    ax.plot(s["freq_cm1"], s["amplitude"], color="k", lw=1.0, label="combined")
    p = read(local("peaks.csv"))
    ax.plot(p["freq_cm1"], p["amplitude"], "rv", ms=4, label="peaks")
    ax.set_xlim(0, FREQ_MAX_CM1)
    ax.set_xlabel("wavenumber (cm$^{{-1}}$)")
    ax.set_ylabel("amplitude")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(local("fig_spectrum.png"), dpi=150)


def plot_ladder():
    if not os.path.exists(local("ladder.csv")):
        return
    lad = read(local("ladder.csv"))
    ref = read(local("reference_levels.csv"))
    fig, ax = plt.subplots(figsize=(4, 5))
    for e in ref["energy_cm1"]:
        ax.hlines(e, 0.0, 0.8, color="k")
    for e, u in zip(lad["energy_cm1"], lad["uncertainty_cm1"]):
        ax.hlines(e, 1.2, 2.0, color="tab:red")
        ax.errorbar(1.6, e, yerr=u, color="tab:red", capsize=2)
    ax.set_xticks([0.4, 1.6])
    ax.set_xticklabels(["exact", "reconstructed"])
    ax.set_ylabel("relative energy (cm$^{{-1}}$)")
    fig.tight_layout()
    fig.savefig(local("fig_ladder.png"), dpi=150)


if __name__ == "__main__":
    plot_dynamics()
    plot_spectrum()
    plot_ladder()
    if "--show" in sys.argv:
        plt.show()
"#,
        series = series_list.join("\n")
    )
}
