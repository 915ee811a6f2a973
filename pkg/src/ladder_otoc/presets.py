"""Figure-reproduction presets: each returns a list of panels (CSV rows plus a plot)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .experiment import CSV_COLUMNS, ExperimentSpec, _map_bounded, fidelity_table, run_series
from .model import ChainSpec
from .otoc import VARIANTS, ExactOtoc, NoCrossingError, ObservablePair, extract_kappa
from .plotting import Curve, Panel, PlotSpec
from .tfd import extrapolate_T0, chain_spectrum

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "figA")

PAIRS_FIG4 = (("Z@5", "X@4"), ("Z@6", "X@3"), ("Z@6", "X@2"))
PAIRS_FIG5 = (("Z@5", "X@4"), ("Z@6", "X@3"))
NOISE_PANELS = (
    ("a_depolarization", dict(kind="depolarization", gamma=1.0)),
    ("b_local_dephasing", dict(kind="local_dephasing", gamma=0.25)),
    ("c_remnant_coupling", dict(kind="remnant_coupling", epsilon=0.5)),
    ("d_asymmetric_legs", dict(kind="asymmetric_legs", epsilon=0.2)),
)
APPENDIX_TEMPERATURES = (1 / 8, 1.0, 8.0)
KAPPA_LAMBDAS = (0.5, 1.0, 2.0, 4.0, 10.0, 20.0, math.inf)


@dataclass(frozen=True)
class PresetOptions:
    """``quick`` shrinks sizes (n=6, fewer trajectories) for smoke runs."""

    quick: bool = False
    seed: int = 0
    parallel: int = 1

    @property
    def n(self) -> int:
        return 6 if self.quick else 8

    @property
    def shots(self) -> int:
        return 1000

    @property
    def trajectories(self) -> int:
        return 20 if self.quick else 500


def _lam_label(lam: float) -> str:
    return "inf" if math.isinf(lam) else format(lam, "g")


def _otoc_plot(title: str, group: str | None = None) -> PlotSpec:
    return PlotSpec(
        x="t",
        curves=(
            Curve("O_g_norm", "O_g normalized", ":"),
            Curve("O_th_norm", "O_th normalized", "--"),
            Curve("O_corr", "O_corr", "-", band="sigma_corr"),
        ),
        title=title,
        xlabel="Jt",
        ylabel="OTOC",
        group=group,
    )


def _series_rows(spec: ExperimentSpec, extra: dict[str, Any]) -> list[dict[str, Any]]:
    s = run_series(spec)
    return [{**extra, **{c: float(s.column(c)[i]) for c in CSV_COLUMNS}} for i in range(len(s.times))]


def fig2(opt: PresetOptions) -> list[Panel]:
    ns = (4, 6) if opt.quick else (4, 6, 8, 10)
    lambdas = (0.5, 1.0, 2.0, 4.0, 8.0) if opt.quick else (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 20.0)
    rows = fidelity_table(ns, lambdas, parallel=opt.parallel)
    cols = ("n", "lambda", "beta0", "T0", "F", "gap", "flagged", "error")
    ext_rows = []
    for lam in lambdas:
        pts = [(int(r["n"]), r["T0"]) for r in rows if r["lambda"] == lam and not r["error"]]
        if len({n for n, _ in pts}) >= 3:
            e = extrapolate_T0(pts)
            ext_rows.append(
                {"lambda": lam, "slope": e.slope, "intercept": e.intercept, "T0_inf": e.T0_infinity,
                 "slope_se": e.slope_se, "intercept_se": e.intercept_se}
            )
    panels = [
        Panel("fig2a_fidelity", cols, rows, PlotSpec("lambda", (Curve("F", "F(beta0, lambda)"),), "Maximal fidelity", "lambda", "F", "n", True, True)),
        Panel("fig2b_T0", cols, rows, PlotSpec("lambda", (Curve("T0", "T0"),), "Fidelity temperature", "lambda", "T0 / J", "n", True, True)),
        Panel("fig2c_gap", cols, rows, PlotSpec("lambda", (Curve("gap", "gap"),), "S^z = 0 gap of the parent Hamiltonian", "lambda", "gap / J", "n", False, True)),
        Panel("fig2d_T0_vs_gap", cols, rows, PlotSpec("gap", (Curve("T0", "T0"),), "T0 against the gap", "gap / J", "T0 / J", "n", False, True)),
    ]
    if ext_rows:
        ecols = ("lambda", "slope", "intercept", "T0_inf", "slope_se", "intercept_se")
        panels.append(Panel("fig2b_inset_extrapolation", ecols, ext_rows, PlotSpec("lambda", (Curve("T0_inf", "T0(n -> inf)"),), "1/n extrapolation", "lambda", "T0 / J", None, False, True)))
    return panels


def fig3(opt: PresetOptions) -> list[Panel]:
    base = ExperimentSpec(n=opt.n, W="Z@5", V="X@4", shots=opt.shots, seed=opt.seed)
    rows: list[dict[str, Any]] = []
    for lam in (1.0, 4.0, math.inf):
        rows += _series_rows(base.replace(lam=lam), {"lambda": _lam_label(lam)})
    cols = ("lambda",) + CSV_COLUMNS

    def kappa_job(lam: float) -> dict[str, Any]:
        s = run_series(base.replace(lam=lam, shots=None))
        return {"lambda": lam, "T0": 1 / s.beta0 if s.beta0 > 0 else math.inf, "kappa_g": s.kappa, "kappa_th": s.kappa_th}

    krows = _map_bounded(kappa_job, KAPPA_LAMBDAS, opt.parallel)
    kcols = ("lambda", "T0", "kappa_g", "kappa_th")
    finite = [r for r in krows if math.isfinite(r["lambda"])]
    return [
        Panel("fig3b_otoc", cols, rows, _otoc_plot("W = Z@5, V = X@4", "lambda")),
        Panel("fig3c_kappa", kcols, krows, PlotSpec("lambda", (Curve("kappa_g", "kappa of O_g"), Curve("kappa_th", "kappa of O_th", "--")), "Slope at half height", "lambda", "kappa", None, True, True)),
        Panel("fig3c_inset_kappa_vs_T0", kcols, finite, PlotSpec("T0", (Curve("kappa_g", "kappa of O_g"), Curve("kappa_th", "kappa of O_th", "--")), "Slope against T0", "T0 / J", "kappa", None, False, True)),
    ]


def _pair_panels(prefix: str, lam: float, opt: PresetOptions, pairs, variants) -> list[Panel]:
    panels = []
    for tag, changes in variants:
        rows: list[dict[str, Any]] = []
        for w, v in pairs:
            spec = ExperimentSpec(n=opt.n, lam=lam, W=w, V=v, shots=opt.shots, seed=opt.seed,
                                  trajectories=opt.trajectories, **changes)
            rows += _series_rows(spec, {"pair": f"{w}/{v}"})
        title = f"lambda = {_lam_label(lam)}" + (f", {tag}" if tag else "")
        panels.append(Panel(f"{prefix}{tag}", ("pair",) + CSV_COLUMNS, rows, _otoc_plot(title, "pair")))
    return panels


def fig4(opt: PresetOptions) -> list[Panel]:
    out = []
    for letter, lam in zip("abc", (math.inf, 4.0, 1.0)):
        out += _pair_panels(f"fig4{letter}_lambda_{_lam_label(lam)}", lam, opt, PAIRS_FIG4, (("", {}),))
    return out


def fig5(opt: PresetOptions) -> list[Panel]:
    return _pair_panels("fig5", math.inf, opt, PAIRS_FIG5, NOISE_PANELS)


def fig6(opt: PresetOptions) -> list[Panel]:
    return _pair_panels("fig6", 1.0, opt, PAIRS_FIG5, NOISE_PANELS)


def figA(opt: PresetOptions) -> list[Panel]:
    n = opt.n
    pair = ObservablePair.parse("Z@5", "X@4", n)
    exact = ExactOtoc(chain_spectrum(ChainSpec(n)), pair)
    times = np.round(np.arange(0.0, 3.0 + 1e-9, 0.02), 12)
    rows, krows = [], []
    for T in APPENDIX_TEMPERATURES:
        norm = {}
        for kind in VARIANTS:
            v = exact.series(1 / T, times, kind)
            norm[kind] = v / v[0]
            try:
                k = extract_kappa(times, norm[kind])
            except NoCrossingError:
                k = math.nan
            krows.append({"variant": kind, "T": T, "kappa": k})
        for i, t in enumerate(times):
            rows.append({"T": T, "t": float(t), **{kind: float(norm[kind][i]) for kind in VARIANTS}})
    curves = tuple(Curve(k, k, s) for k, s in zip(VARIANTS, ("-", "--", ":", "-.")))
    return [
        Panel("figA_a_variants", ("T", "t") + VARIANTS, rows, PlotSpec("t", curves, "Normalized variant OTOCs", "Jt", "OTOC", "T")),
        Panel("figA_b_slopes", ("variant", "T", "kappa"), krows, PlotSpec("T", (Curve("kappa", "kappa"),), "Slope at half height", "T / J", "kappa", "variant", True, True)),
    ]


PRESETS: dict[str, Callable[[PresetOptions], list[Panel]]] = {
    "fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6, "figA": figA,
}


def reproduce(figure: str, opt: PresetOptions | None = None) -> list[Panel]:
    if figure not in PRESETS:
        raise ValueError(f"unknown figure {figure!r}; expected one of {', '.join(FIGURES)}")
    return PRESETS[figure](opt or PresetOptions())
