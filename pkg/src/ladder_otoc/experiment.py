"""Declarative experiment specs and the end-to-end OTOC pipeline."""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .dynamics import KINDS, EvolutionSpec
from .model import ChainSpec, LadderSpec
from .otoc import (
    ExactOtoc,
    NoCrossingError,
    ObservablePair,
    correct,
    extract_kappa,
    otoc_circuit,
    parse_operator,
    readout_expectation,
    sample_distributions,
)
from .spectral import MAX_DENSE_DIM, parent_ground_state
from .tfd import (
    Extrapolation,
    FidelityResult,
    build_phi,
    build_tfd,
    chain_spectrum,
    extrapolate_T0,
    optimize_beta,
)

CSV_COLUMNS = ("t", "O_g", "N_g", "O_corr", "O_th", "O_g_norm", "O_th_norm", "sigma_corr")
INITIAL_STATES = ("ground", "tfd", "phi")


class SpecError(ValueError):
    """Invalid experiment spec; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _parse_lambda(value: Any) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "∞"):
            return math.inf
        value = float(value)
    return float(value)


_REAL_FIELDS = ("n", "lam", "beta_override", "J", "t_start", "t_stop", "t_step", "gamma",
                "epsilon", "trajectories", "shots", "readout_x", "seed")
_PATHS = {"lam": "lambda", "t_start": "times.start", "t_stop": "times.stop", "t_step": "times.step",
          "gamma": "evolution.gamma", "epsilon": "evolution.epsilon", "trajectories": "evolution.trajectories",
          "kind": "evolution.kind"}


@dataclass(frozen=True)
class ExperimentSpec:
    """One run: ladder, operators, time grid, evolution channel, sampling."""

    n: int = 8
    lam: float = math.inf
    beta_override: float | None = None
    J: float = 1.0
    W: str = "Z@5"
    V: str = "X@4"
    t_start: float = 0.0
    t_stop: float = 3.0
    t_step: float = 0.02
    kind: str = "ideal_direct"
    gamma: float = 0.0
    epsilon: float = 0.0
    trajectories: int = 500
    shots: int | None = None
    readout_x: float = 0.0
    seed: int = 0
    initial: str = "ground"
    method: str = "auto"
    outputs: tuple[str, ...] = CSV_COLUMNS

    def __post_init__(self) -> None:
        self.validate()

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ExperimentSpec":
        """Build from flat config keys; ``lambda`` and a nested ``times`` block are accepted."""
        data = dict(data)
        for key in [k for k in data if isinstance(k, str) and "." in k]:
            head, _, tail = key.partition(".")
            block = data.setdefault(head, {})
            if not isinstance(block, dict):
                raise SpecError(head, "cannot mix a value and dotted sub-keys")
            block[tail] = data.pop(key)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        times = data.pop("times", None)
        if times is not None:
            if not isinstance(times, Mapping):
                raise SpecError("times", "expected a mapping with start, stop, step")
            for key in times:
                if key not in ("start", "stop", "step"):
                    raise SpecError(f"times.{key}", "unknown key")
                data[f"t_{key}"] = times[key]
        evolution = data.pop("evolution", None)
        if evolution is not None:
            if not isinstance(evolution, Mapping):
                raise SpecError("evolution", "expected a mapping")
            for key, val in evolution.items():
                if key not in ("kind", "gamma", "epsilon", "trajectories", "seed"):
                    raise SpecError(f"evolution.{key}", "unknown key")
                data["seed" if key == "seed" else key] = val
        names = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in names:
                raise SpecError(key, "unknown field")
        try:
            if "lam" in data:
                data["lam"] = _parse_lambda(data["lam"])
        except (TypeError, ValueError):
            raise SpecError("lambda", f"not a number or 'inf': {data['lam']!r}") from None
        if "outputs" in data:
            data["outputs"] = tuple(data["outputs"])
        return cls(**data)

    def to_mapping(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["lam"] = "inf" if math.isinf(self.lam) else self.lam
        out["outputs"] = list(self.outputs)
        return out

    def replace(self, **changes: Any) -> "ExperimentSpec":
        if "lambda" in changes:
            changes["lam"] = changes.pop("lambda")
        if "lam" in changes:
            changes["lam"] = _parse_lambda(changes["lam"])
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        def need(ok: bool, path: str, msg: str) -> None:
            if not ok:
                raise SpecError(path, msg)

        for name in _REAL_FIELDS:
            v = getattr(self, name)
            if v is None and name in ("beta_override", "shots"):
                continue
            ok = isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
            need(ok, _PATHS.get(name, name), f"expected a number, got {v!r}")
        for name in ("W", "V", "kind", "initial", "method"):
            need(isinstance(getattr(self, name), str), _PATHS.get(name, name), "expected a string")
        for name in ("n", "trajectories", "seed") + (("shots",) if self.shots is not None else ()):
            need(float(getattr(self, name)).is_integer(), _PATHS.get(name, name), "must be an integer")
        need(self.n >= 2, "n", "must be >= 2")
        need(2**self.n <= MAX_DENSE_DIM, "n", f"exact thermal OTOCs need 2^n <= {MAX_DENSE_DIM}")
        need(self.lam >= 0, "lambda", "must be >= 0")
        need(self.J > 0, "J", "must be > 0")
        need(self.beta_override is None or self.beta_override >= 0, "beta_override", "must be >= 0")
        for name in ("W", "V"):
            try:
                parse_operator(getattr(self, name), self.n)
            except ValueError as exc:
                raise SpecError(name, str(exc)) from None
        need(parse_operator(self.V, self.n).sites != (), "V", "must not be the identity")
        need(self.t_step > 0, "times.step", "must be > 0")
        need(len(self.times) <= 100_000, "times", "grid has more than 100000 points")
        need(self.t_start >= 0, "times.start", "must be >= 0")
        need(self.t_stop >= self.t_start, "times.stop", "must be >= times.start")
        need(self.kind in KINDS, "evolution.kind", f"must be one of {', '.join(KINDS)}")
        need(self.gamma >= 0, "evolution.gamma", "must be >= 0")
        need(0 <= self.epsilon < 1, "evolution.epsilon", "must lie in [0, 1)")
        need(self.trajectories >= 1, "evolution.trajectories", "must be >= 1")
        need(self.shots is None or self.shots >= 1, "shots", "must be >= 1 when given")
        need(0 <= self.readout_x <= 0.5, "readout_x", "must lie in [0, 1/2]")
        need(0 <= self.seed < 2**64, "seed", "must be an unsigned 64-bit integer")
        need(self.initial in INITIAL_STATES, "initial", f"must be one of {', '.join(INITIAL_STATES)}")
        need(self.method in ("auto", "krylov", "spectral"), "method", "must be auto, krylov or spectral")
        for col in self.outputs:
            need(col in CSV_COLUMNS, "outputs", f"unknown column {col!r}")

    @property
    def times(self) -> np.ndarray:
        count = int(math.floor((self.t_stop - self.t_start) / self.t_step + 1e-9)) + 1
        return self.t_start + self.t_step * np.arange(count)

    @property
    def chain(self) -> ChainSpec:
        return ChainSpec(self.n, self.J)

    @property
    def ladder(self) -> LadderSpec:
        return LadderSpec(self.chain, self.lam)

    @property
    def pair(self) -> ObservablePair:
        return ObservablePair.parse(self.W, self.V, self.n)

    @property
    def evolution(self) -> EvolutionSpec:
        return EvolutionSpec(self.kind, self.gamma, self.epsilon, self.trajectories, self.seed)

    def digest(self) -> str:
        text = json.dumps(self.to_mapping(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class OtocSeries:
    """Circuit and thermal OTOCs on one time grid.

    ``O_g``/``N_g`` are thermal-sign-corrected circuit values (sampled when
    shots are requested); ``O_corr`` is their ratio with 1-sigma ``shot_sigma``.
    """

    times: np.ndarray
    O_g: np.ndarray
    N_g: np.ndarray
    O_corr: np.ndarray
    O_th: np.ndarray
    O_g_norm: np.ndarray
    O_th_norm: np.ndarray
    shot_sigma: np.ndarray
    beta0: float
    fidelity: float
    kappa: float
    kappa_th: float
    spec: ExperimentSpec
    O_tfd: np.ndarray | None = None
    traj_sigma: np.ndarray | None = field(default=None, repr=False)

    def column(self, name: str) -> np.ndarray:
        return {
            "t": self.times,
            "O_g": self.O_g,
            "N_g": self.N_g,
            "O_corr": self.O_corr,
            "O_th": self.O_th,
            "O_g_norm": self.O_g_norm,
            "O_th_norm": self.O_th_norm,
            "sigma_corr": self.shot_sigma,
        }[name]


def _kappa(times: np.ndarray, values: np.ndarray) -> float:
    try:
        return extract_kappa(times, values)
    except NoCrossingError:
        return math.nan


def resolve_beta(spec: ExperimentSpec, spectrum=None, ground=None) -> tuple[float, float]:
    """(beta_0, F) for the spec's coupling; exact limits at lambda = 0 and inf."""
    if spec.beta_override is not None:
        return float(spec.beta_override), math.nan
    if math.isinf(spec.lam):
        return 0.0, 1.0
    if spec.lam == 0:
        return math.inf, 1.0
    res = optimize_beta(spec.ladder, spectrum, ground)
    return res.beta0, res.F


def run_series(spec: ExperimentSpec, workers: int = 1) -> OtocSeries:
    """model -> spectral -> tfd -> dynamics -> otoc for one spec."""
    spec.validate()
    chain, pair, times = spec.chain, spec.pair, spec.times
    spectrum = chain_spectrum(chain)
    ground = parent_ground_state(spec.ladder) if spec.initial == "ground" else None
    beta0, fid = resolve_beta(spec, spectrum, ground)
    exact = ExactOtoc(spectrum, pair)
    o_th = exact.series(beta0, times)
    if spec.initial == "ground":
        initial, sign = ground.state, pair.symmetry_sign
    else:
        tfd = build_tfd(spectrum, beta0)
        initial, sign = (tfd.state, 1) if spec.initial == "tfd" else (build_phi(tfd), pair.symmetry_sign)
    res = otoc_circuit(initial, pair, spec.evolution, times, chain, spec.method, workers)

    scale = readout_expectation(1.0, spec.readout_x)
    if spec.shots is None:
        O = sign * scale * res.O_values
        N = sign * scale * res.N_values
        sig_o = scale * res.O.stderr
        sig_n = scale * res.N.stderr
        o_corr, _ = correct(O, N)
        sigma = np.full(len(times), math.nan)
        traj_sigma = correct(O, N, sig_o, sig_n)[1] if spec.kind == "local_dephasing" else None
    else:
        O, sig_o = _sample_branch(res.O, spec, stream=1)
        N, sig_n = _sample_branch(res.N, spec, stream=2)
        O, N = sign * O, sign * N
        o_corr, sigma = correct(O, N, sig_o, sig_n)
        traj_sigma = None
    o_g_norm = O / O[0] if abs(O[0]) > 0 else np.full_like(O, math.nan)
    o_th_norm = o_th / o_th[0]
    return OtocSeries(
        times=times,
        O_g=O,
        N_g=N,
        O_corr=o_corr,
        O_th=o_th,
        O_g_norm=o_g_norm,
        O_th_norm=o_th_norm,
        shot_sigma=sigma,
        beta0=beta0,
        fidelity=fid,
        kappa=_kappa(times, o_g_norm),
        kappa_th=_kappa(times, o_th_norm),
        spec=spec,
        O_tfd=O if spec.initial == "tfd" else None,
        traj_sigma=traj_sigma,
    )


def _sample_branch(record, spec: ExperimentSpec, stream: int) -> tuple[np.ndarray, np.ndarray]:
    """Independent shot budgets per branch and time point."""
    est, sig = [], []
    for k in range(record.obs.shape[1]):
        rng = np.random.default_rng([spec.seed, stream, k])
        m, s = sample_distributions(record.distributions(k), record.weights, spec.shots, spec.readout_x, rng)
        est.append(m)
        sig.append(s)
    return np.array(est), np.array(sig)


# ---------------------------------------------------------------------------
# records and CSV
# ---------------------------------------------------------------------------


def format_value(x: float) -> str:
    return "" if x is None or not math.isfinite(x) else format(float(x), ".17g")


def rows_of(series: OtocSeries, columns: Sequence[str] = CSV_COLUMNS) -> list[dict[str, float]]:
    cols = {c: series.column(c) for c in columns}
    return [{c: float(v[i]) for c, v in cols.items()} for i in range(len(series.times))]


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool):
        return format_value(v)
    return str(v)


def write_csv(rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_cell(row.get(c)) for c in columns) + "\n")
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], list[dict[str, float | str]]]:
    """Parse a CSV emitted here; numeric cells become floats and empty cells NaN."""
    lines = text.splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        row: dict[str, float | str] = {}
        for key, cell in zip(header, line.split(",")):
            try:
                row[key] = float(cell) if cell else math.nan
            except ValueError:
                row[key] = cell
        rows.append(row)
    return header, rows


@dataclass(frozen=True, eq=False)
class RunRecord:
    spec_hash: str
    version: str
    wall_time: float
    rows: list[dict[str, float]] = field(repr=False)
    columns: tuple[str, ...] = CSV_COLUMNS
    series: OtocSeries | None = field(default=None, repr=False)

    def csv(self) -> str:
        return write_csv(self.rows, self.columns)

    def metadata(self) -> dict[str, Any]:
        s = self.series
        meta: dict[str, Any] = {"spec_hash": self.spec_hash, "version": self.version, "wall_time": self.wall_time}
        if s is not None:
            meta.update(
                beta0=None if math.isinf(s.beta0) else s.beta0,
                fidelity=None if math.isnan(s.fidelity) else s.fidelity,
                kappa=None if math.isnan(s.kappa) else s.kappa,
                kappa_th=None if math.isnan(s.kappa_th) else s.kappa_th,
                spec=s.spec.to_mapping(),
            )
        return meta


def run(spec: ExperimentSpec, workers: int = 1) -> RunRecord:
    start = time.perf_counter()
    series = run_series(spec, workers)
    columns = tuple(c for c in CSV_COLUMNS if c in spec.outputs or c == "t")
    return RunRecord(
        spec_hash=spec.digest(),
        version=__version__,
        wall_time=time.perf_counter() - start,
        rows=rows_of(series, columns),
        columns=columns,
        series=series,
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEP_AXES = tuple(f.name for f in dataclasses.fields(ExperimentSpec) if f.name not in ("outputs",)) + ("lambda",)


def value_seed(base: int, index: int) -> int:
    """Seed for the ``index``-th sweep value; index 0 keeps the base seed."""
    return (int(base) + int(index)) % 2**64


def _map_bounded(job, items: Sequence[Any], parallel: int) -> list[Any]:
    if parallel > 1:
        with ThreadPoolExecutor(parallel) as pool:
            return list(pool.map(job, items))
    return [job(x) for x in items]


def sweep(base: ExperimentSpec, axis: str, values: Sequence[Any], parallel: int = 1) -> tuple[list[dict[str, Any]], tuple[str, ...]]:
    """Long-format rows over ``values`` of ``axis``; failures become error rows."""
    if axis not in SWEEP_AXES:
        raise SpecError("axis", f"unknown sweep axis {axis!r}")
    if not values:
        raise SpecError("values", "need at least one value")

    def job(item: tuple[int, Any]) -> list[dict[str, Any]]:
        i, value = item
        try:
            spec = base.replace(**{axis: value, "seed": value_seed(base.seed, i)})
            series = run_series(spec)
            cols = tuple(c for c in CSV_COLUMNS if c in spec.outputs or c == "t")
            return [{"axis": axis, "value": str(value), **r, "error": ""} for r in rows_of(series, cols)]
        except Exception as exc:  # recorded per row, the sweep continues
            return [{"axis": axis, "value": str(value), "error": f"{type(exc).__name__}: {exc}".replace(",", ";")}]

    chunks = _map_bounded(job, list(enumerate(values)), parallel)
    columns = ("axis", "value") + tuple(c for c in CSV_COLUMNS if c in base.outputs or c == "t") + ("error",)
    return [row for chunk in chunks for row in chunk], columns


FIDELITY_COLUMNS = ("n", "lambda", "beta0", "T0", "F", "gap", "flagged", "error")


def fidelity_table(
    ns: Sequence[int], lambdas: Sequence[float], J: float = 1.0, parallel: int = 1
) -> list[dict[str, Any]]:
    """beta_0, T_0, F and the S^z = 0 gap per (n, lambda)."""
    items = [(int(n), float(lam)) for n in ns for lam in lambdas]

    def job(item: tuple[int, float]) -> dict[str, Any]:
        n, lam = item
        row: dict[str, Any] = {"n": float(n), "lambda": lam}
        try:
            res: FidelityResult = optimize_beta(LadderSpec(ChainSpec(n, J), lam))
            row.update(beta0=res.beta0, T0=res.T0, F=res.F, gap=res.gap, flagged=str(res.flagged).lower(), error="")
        except Exception as exc:
            row.update(error=f"{type(exc).__name__}: {exc}".replace(",", ";"))
        return row

    return _map_bounded(job, items, parallel)


def extrapolate_rows(rows: Sequence[Mapping[str, Any]], lam: float) -> Extrapolation:
    pts = [(int(r["n"]), float(r["T0"])) for r in rows if r["lambda"] == lam and not r.get("error")]
    return extrapolate_T0(pts)
