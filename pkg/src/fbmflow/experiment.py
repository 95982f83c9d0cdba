"""Monte Carlo harness: sample, flow, bound, certify, report.

A bound verification experiment is defined by a flat ``key = value`` config
(or the equivalent CLI flags): a driving field, fBm parameters, Hölder
exponent overrides, replication count and seed, and optionally a manifold
mesh whose pushforward measure is monitored.  Each replication is pure: it
derives its own seed, samples its own path, and touches no shared mutable
state, so reports are byte-identical for a fixed config at any worker
count.

Replication ``r`` uses ``seed + (r << 20)`` as its path seed.  Channel
subkeys are the path seed XOR the channel index, so the shifted block keeps
all replication/channel keys distinct as long as channel counts stay below
2^20.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds as bounds_mod
from .bounds import (
    HolderParams,
    check_flow_windows,
    compute_constants,
    default_params,
    hausdorff_growth_bound,
    tangent_growth_bound,
)
from .fbm import fbm_covariance, holder_norm, sample_paths
from .fields import VectorFieldSet, make_field
from .flow import integrate_flow, integrate_flow_with_tangent
from .fraccalc import SampledFunction, rl_integral, w_norm, weyl_derivative, zahle_integral
from .grid import TimeGrid
from .manifolds import (
    ManifoldMesh,
    gram_hadamard_check,
    gram_volume,
    make_manifold,
    measure_curve,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "ExperimentSummary",
    "FIELD_PRESETS",
    "BoundRow",
    "derive_seed",
    "parse_field_spec",
    "parse_manifold_spec",
    "run_bound_experiment",
    "run_replication",
    "selftest",
    "write_report",
]

WORKERS_ENV_VAR = "FBMFLOW_WORKERS"

FIELD_PRESETS = {
    "sine2d": "sine:amplitude=0.2,frequency=1|1,dim=2,channels=2",
    "bump2d": "gaussian_bump:amplitude=0.2,width=1.0,dim=2,channels=2",
    "drift2d": "constant:value=0.3|0,dim=2,channels=1",
    "zero2d": "constant:value=0|0,dim=2,channels=1",
}

_FIELD_ALIASES = {
    "a": "amplitude",
    "w": "frequency",
    "phi": "phase",
    "c": "center",
    "s": "width",
    "v": "value",
    "k": "channels",
    "n": "dim",
}

_MANIFOLD_ALIASES = {
    "r": "radius",
    "n": "ambient",
    "len": "length",
    "major": "major_radius",
    "minor": "minor_radius",
}


class ConfigError(ValueError):
    """Malformed configuration; the CLI maps this to a usage error."""


def _parse_scalar(text: str):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if "|" in text:
        return tuple(float(part) for part in text.split("|"))
    try:
        as_float = float(text)
    except ValueError:
        return text
    if as_float.is_integer() and "." not in text and "e" not in lowered:
        return int(as_float)
    return as_float


def _parse_spec(spec: str, aliases: dict[str, str]) -> tuple[str, dict]:
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    params: dict = {}
    if rest.strip():
        for chunk in rest.split(","):
            if "=" not in chunk:
                raise ConfigError(f"malformed spec fragment {chunk!r} in {spec!r}")
            key, _, value = chunk.partition("=")
            key = aliases.get(key.strip(), key.strip())
            params[key] = _parse_scalar(value)
    return kind, params


def parse_field_spec(spec: str) -> VectorFieldSet:
    """Build a field set from a preset name or a ``kind:key=val,...`` string.

    Vector values use ``|`` separators, e.g. ``sine:a=0.2,w=1|1,n=2,k=2``.
    """
    spec = FIELD_PRESETS.get(spec, spec)
    kind, params = _parse_spec(spec, _FIELD_ALIASES)
    try:
        dim = int(params.pop("dim", 2))
        channels = int(params.pop("channels", 1))
        params = {
            key: (np.asarray(value, dtype=float) if isinstance(value, tuple) else value)
            for key, value in params.items()
        }
        return make_field(kind, dim=dim, channels=channels, **params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad field spec {spec!r}: {exc}") from exc


def parse_manifold_spec(spec: str, points: int) -> ManifoldMesh:
    """Build a mesh from ``kind:key=val,...``, e.g. ``circle:r=1,n=2``."""
    kind, params = _parse_spec(spec, _MANIFOLD_ALIASES)
    try:
        ambient = params.pop("ambient", None)
        ambient = int(ambient) if ambient is not None else None
        return make_manifold(kind, points=points, ambient_dim=ambient, **params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad manifold spec {spec!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a bound verification run depends on.

    ``workers``, ``out`` and ``make_plots`` are execution details: they do
    not change the computed rows and are excluded from the config block
    embedded in reports.
    """

    field_spec: str = "sine2d"
    hurst: float = 0.75
    horizon: float = 1.0
    grid_steps: int = 1024
    method: str = "cholesky"
    eps: float | None = None
    delta: float | None = None
    replications: int = 100
    seed: int = 0
    manifold_spec: str | None = None
    manifold_points: int = 500
    x0: tuple[float, ...] | None = None
    workers: int = 0
    out: str | None = None
    make_plots: bool = True

    _FILE_KEYS = {
        "field": ("field_spec", str),
        "fbm.hurst": ("hurst", float),
        "fbm.horizon": ("horizon", float),
        "fbm.grid": ("grid_steps", int),
        "fbm.method": ("method", str),
        "holder.eps": ("eps", float),
        "holder.delta": ("delta", float),
        "mc.replications": ("replications", int),
        "mc.seed": ("seed", int),
        "mc.workers": ("workers", int),
        "manifold": ("manifold_spec", str),
        "manifold.points": ("manifold_points", int),
        "flow.x0": ("x0", None),
        "report.out": ("out", str),
        "report.plot": ("make_plots", None),
    }

    @classmethod
    def from_file(cls, path: str, **overrides) -> "ExperimentConfig":
        """Read ``key = value`` lines ('#' comments allowed), then apply overrides."""
        values: dict = {}
        try:
            with open(path, "r", encoding="utf-8") as fin:
                for lineno, line in enumerate(fin, start=1):
                    line = line.strip()
                    if not line or line.startswith("#"):
                        continue
                    if "=" not in line:
                        raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                    key, _, raw = line.partition("=")
                    key = key.strip()
                    if key not in cls._FILE_KEYS:
                        raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
                    attr, cast = cls._FILE_KEYS[key]
                    parsed = _parse_scalar(raw)
                    if attr == "x0":
                        if isinstance(parsed, (int, float)):
                            parsed = (float(parsed),)
                        elif isinstance(parsed, str):
                            parsed = tuple(float(p) for p in parsed.split(","))
                        else:
                            parsed = tuple(float(p) for p in parsed)
                    elif attr == "make_plots":
                        if not isinstance(parsed, bool):
                            raise ConfigError(f"{path}:{lineno}: report.plot must be true/false")
                    elif cast is not None:
                        parsed = cast(parsed)
                    values[attr] = parsed
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def resolve(self) -> "_ResolvedExperiment":
        """Validate and instantiate every object the replications share."""
        try:
            fields = parse_field_spec(self.field_spec)
            grid = TimeGrid(self.horizon, self.grid_steps)
            if self.eps is None and self.delta is None:
                params = default_params(self.hurst)
            else:
                base = default_params(self.hurst)
                params = HolderParams(
                    hurst=self.hurst,
                    eps=self.eps if self.eps is not None else base.eps,
                    delta=self.delta if self.delta is not None else base.delta,
                )
            mesh = None
            if self.manifold_spec is not None and self.manifold_spec != "none":
                mesh = parse_manifold_spec(self.manifold_spec, self.manifold_points)
                if mesh.n != fields.dim:
                    raise ConfigError(
                        f"manifold lives in R^{mesh.n} but the field acts on R^{fields.dim}"
                    )
            x0 = None
            if mesh is None:
                x0 = np.zeros(fields.dim) if self.x0 is None else np.asarray(self.x0, float)
                if x0.shape != (fields.dim,):
                    raise ConfigError(f"flow.x0 must have {fields.dim} components")
            if self.replications < 1:
                raise ConfigError("mc.replications must be >= 1")
            if self.seed < 0:
                raise ConfigError("mc.seed must be nonnegative")
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        return _ResolvedExperiment(config=self, fields=fields, grid=grid, params=params, mesh=mesh, x0=x0)

    def resolved_workers(self) -> int:
        if self.workers and self.workers > 0:
            return int(self.workers)
        env = os.environ.get(WORKERS_ENV_VAR, "").strip()
        if env:
            try:
                count = int(env)
            except ValueError as exc:
                raise ConfigError(f"{WORKERS_ENV_VAR} must be an integer, got {env!r}") from exc
            if count > 0:
                return count
        return 1


@dataclass(frozen=True)
class _ResolvedExperiment:
    config: ExperimentConfig
    fields: VectorFieldSet
    grid: TimeGrid
    params: HolderParams
    mesh: ManifoldMesh | None
    x0: np.ndarray | None

    def embedded_items(self) -> list[tuple[str, str]]:
        cfg = self.config
        x0_text = "mesh" if self.mesh is not None else ",".join(repr(v) for v in self.x0)
        return [
            ("field", FIELD_PRESETS.get(cfg.field_spec, cfg.field_spec)),
            ("fbm.hurst", repr(float(cfg.hurst))),
            ("fbm.horizon", repr(float(cfg.horizon))),
            ("fbm.grid", str(int(cfg.grid_steps))),
            ("fbm.method", cfg.method),
            ("holder.eps", repr(self.params.eps)),
            ("holder.delta", repr(self.params.delta)),
            ("mc.replications", str(int(cfg.replications))),
            ("mc.seed", str(int(cfg.seed))),
            ("manifold", cfg.manifold_spec or "none"),
            ("manifold.points", str(int(cfg.manifold_points))),
            ("flow.x0", x0_text),
        ]


# ---------------------------------------------------------------------------
# per-replication work
# ---------------------------------------------------------------------------


def derive_seed(base_seed: int, replication: int) -> int:
    """Per-replication path seed; the shift keeps XOR channel subkeys disjoint."""
    return int(base_seed) + (int(replication) << 20)


def run_replication(config: ExperimentConfig, replication: int) -> "BoundRow":
    """One replication in isolation; reproduces the corresponding batch row exactly."""
    if not 0 <= replication < config.replications:
        raise ConfigError(f"replication must lie in [0, {config.replications})")
    return _run_replication(config.resolve(), replication)


@dataclass(frozen=True)
class BoundRow:
    """One certified replication of a bound experiment."""

    replication: int
    base_seed: int
    derived_seed: int
    status: str
    holder_norms: tuple[float, ...] | None
    alpha: float = math.nan
    beta: float = math.nan
    delta0: float = math.nan
    delta: float = math.nan
    branch: str = ""
    p: float = math.nan
    s: float = math.nan
    c_t: float = math.nan
    tangent_initial: float = math.nan
    tangent_emp: float = math.nan
    tangent_bound_value: float = math.nan
    tangent_bound_log2: float = math.nan
    tangent_slack_log2: float = math.nan
    tangent_violation: int = 0
    measure_initial: float = math.nan
    measure_emp: float = math.nan
    measure_bound_value: float = math.nan
    measure_bound_log2: float = math.nan
    measure_slack_log2: float = math.nan
    measure_violation: int = 0
    windows_checked: int = 0
    windows_skipped: int = 0
    increment_violations: int = 0
    holder_violations: int = 0
    max_increment_ratio: float = math.nan
    max_holder_ratio: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def total_violations(self) -> int:
        return (
            self.tangent_violation
            + self.measure_violation
            + self.increment_violations
            + self.holder_violations
        )


def _log2_or_neg_inf(value: float) -> float:
    return math.log2(value) if value > 0.0 else -math.inf


def _run_replication(resolved: _ResolvedExperiment, replication: int) -> BoundRow:
    cfg = resolved.config
    seed = derive_seed(cfg.seed, replication)
    try:
        path = sample_paths(
            resolved.grid,
            cfg.hurst,
            channels=resolved.fields.channels,
            seed=seed,
            method=cfg.method,
        )
        norms = path.holder_norms(resolved.params.beta)
        constants = compute_constants(resolved.params, resolved.fields, norms, cfg.horizon)

        if resolved.mesh is not None:
            mesh = resolved.mesh
            traj, tangent = integrate_flow_with_tangent(
                resolved.fields, path, mesh.points
            )
            moved = np.einsum("tpij,pmj->tpmi", tangent.jacobians, mesh.frames)
            l1 = np.sum(np.abs(moved), axis=-1)  # (times, points, m)
            tangent_initial = float(np.max(l1[0]))
            tangent_emp = float(np.max(l1))
            curve = measure_curve(mesh, tangent.jacobians, traj.times)
            measure_initial = curve.initial
            measure_emp = curve.sup
            mbound = hausdorff_growth_bound(constants, mesh.m, measure_initial)
            measure_bound_value = mbound.value
            measure_bound_log2 = mbound.value_log2
        else:
            traj, tangent = integrate_flow_with_tangent(
                resolved.fields, path, resolved.x0
            )
            l1 = np.sum(np.abs(tangent.jacobians), axis=-2)  # column l1 norms
            tangent_initial = float(np.max(l1[0]))
            tangent_emp = float(np.max(l1))
            measure_initial = math.nan
            measure_emp = math.nan
            measure_bound_value = math.nan
            measure_bound_log2 = math.nan

        tbound = tangent_growth_bound(constants, tangent_initial)
        tangent_slack = tbound.value_log2 - _log2_or_neg_inf(tangent_emp)
        tangent_violation = int(tangent_slack < -1e-9)
        if resolved.mesh is not None:
            measure_slack = measure_bound_log2 - _log2_or_neg_inf(measure_emp)
            measure_violation = int(measure_slack < -1e-9)
        else:
            measure_slack = math.nan
            measure_violation = 0

        windows = check_flow_windows(traj, constants)
        return BoundRow(
            replication=replication,
            base_seed=cfg.seed,
            derived_seed=seed,
            status="ok",
            holder_norms=tuple(float(v) for v in norms),
            alpha=constants.alpha,
            beta=constants.beta,
            delta0=constants.delta0,
            delta=constants.delta,
            branch=constants.branch,
            p=constants.p,
            s=constants.s,
            c_t=constants.c_t,
            tangent_initial=tangent_initial,
            tangent_emp=tangent_emp,
            tangent_bound_value=tbound.value,
            tangent_bound_log2=tbound.value_log2,
            tangent_slack_log2=tangent_slack,
            tangent_violation=tangent_violation,
            measure_initial=measure_initial,
            measure_emp=measure_emp,
            measure_bound_value=measure_bound_value,
            measure_bound_log2=measure_bound_log2,
            measure_slack_log2=measure_slack,
            measure_violation=measure_violation,
            windows_checked=windows.windows,
            windows_skipped=windows.skipped,
            increment_violations=windows.increment_violations,
            holder_violations=windows.holder_violations,
            max_increment_ratio=windows.max_increment_ratio,
            max_holder_ratio=windows.max_holder_ratio,
        )
    except Exception as exc:  # noqa: BLE001 - per-replication isolation by design
        return BoundRow(
            replication=replication,
            base_seed=cfg.seed,
            derived_seed=seed,
            status=f"error: {type(exc).__name__}: {exc}",
            holder_norms=None,
        )


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSummary:
    replications: int
    failures: int
    violations: int
    min_tangent_slack_log2: float
    median_tangent_slack_log2: float
    min_measure_slack_log2: float
    median_measure_slack_log2: float

    def lines(self) -> list[str]:
        out = [
            f"replications: {self.replications} ({self.failures} failed)",
            f"bound violations: {self.violations}",
            f"tangent slack log2: min {self.min_tangent_slack_log2:.3f}, "
            f"median {self.median_tangent_slack_log2:.3f}",
        ]
        if not math.isnan(self.min_measure_slack_log2):
            out.append(
                f"measure slack log2: min {self.min_measure_slack_log2:.3f}, "
                f"median {self.median_measure_slack_log2:.3f}"
            )
        return out


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: list[BoundRow]
    summary: ExperimentSummary
    channels: int
    embedded_items: list[tuple[str, str]] = field(default_factory=list)


def _summarise(rows: list[BoundRow]) -> ExperimentSummary:
    ok_rows = [row for row in rows if row.ok]
    t_slacks = np.array([row.tangent_slack_log2 for row in ok_rows], dtype=float)
    m_slacks = np.array(
        [row.measure_slack_log2 for row in ok_rows if not math.isnan(row.measure_slack_log2)],
        dtype=float,
    )
    return ExperimentSummary(
        replications=len(rows),
        failures=len(rows) - len(ok_rows),
        violations=int(sum(row.total_violations for row in ok_rows)),
        min_tangent_slack_log2=float(np.min(t_slacks)) if len(t_slacks) else math.nan,
        median_tangent_slack_log2=float(np.median(t_slacks)) if len(t_slacks) else math.nan,
        min_measure_slack_log2=float(np.min(m_slacks)) if len(m_slacks) else math.nan,
        median_measure_slack_log2=float(np.median(m_slacks)) if len(m_slacks) else math.nan,
    )


def run_bound_experiment(config: ExperimentConfig, quiet: bool = False) -> ExperimentResult:
    """Run every replication, certify bounds, optionally write report and figure.

    Rows are assembled by replication index, so the report bytes do not
    depend on the worker count.  Per-replication failures are recorded in
    the row status instead of aborting the run.
    """
    resolved = config.resolve()
    workers = config.resolved_workers()
    count = config.replications
    rows: list[BoundRow | None] = [None] * count
    if workers == 1:
        for r in range(count):
            rows[r] = _run_replication(resolved, r)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_replication, resolved, r): r for r in range(count)}
            for future, r in futures.items():
                rows[r] = future.result()
    done = [row for row in rows if row is not None]
    if done and not any(row.ok for row in done):
        first = done[0].status
        raise RuntimeError(
            f"every replication failed (first status: {first}); refusing to report"
        )
    summary = _summarise(done)
    result = ExperimentResult(
        config=config,
        rows=done,
        summary=summary,
        channels=resolved.fields.channels,
        embedded_items=resolved.embedded_items(),
    )
    if config.out:
        write_report(result, config.out)
        if config.make_plots:
            from .plotting import save_report_figure

            save_report_figure(result, _figure_path(config.out))
    if not quiet:
        for line in summary.lines():
            print(line)
    return result


def _figure_path(csv_path: str) -> str:
    return (csv_path[:-4] if csv_path.endswith(".csv") else csv_path) + ".png"


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def write_report(result: ExperimentResult, dest: str) -> None:
    """Delimited report: '#' config block, header, one row per replication.

    Floats carry 17 significant digits ('.' decimal separator, LF endings),
    which round-trips float64 exactly.
    """
    channels = result.channels
    norm_cols = [f"holder_norm_{g}" for g in range(channels)]
    header = [
        "replication",
        "base_seed",
        "derived_seed",
        "status",
        *norm_cols,
        "alpha",
        "beta",
        "delta0",
        "delta",
        "branch",
        "p",
        "s",
        "c_t",
        "tangent_initial",
        "tangent_emp",
        "tangent_bound_value",
        "tangent_bound_log2",
        "tangent_slack_log2",
        "tangent_violation",
        "measure_initial",
        "measure_emp",
        "measure_bound_value",
        "measure_bound_log2",
        "measure_slack_log2",
        "measure_violation",
        "windows_checked",
        "windows_skipped",
        "increment_violations",
        "holder_violations",
        "max_increment_ratio",
        "max_holder_ratio",
    ]
    with open(dest, "w", encoding="utf-8", newline="\n") as fout:
        print("# fbmflow bound verification report", file=fout)
        for key, value in result.embedded_items:
            print(f"# {key} = {value}", file=fout)
        print(f"# channels = {channels}", file=fout)
        print(",".join(header), file=fout)
        for row in result.rows:
            norms = (
                [_fmt(v) for v in row.holder_norms]
                if row.holder_norms is not None
                else ["nan"] * channels
            )
            cells = [
                str(row.replication),
                str(row.base_seed),
                str(row.derived_seed),
                row.status.replace(",", ";"),
                *norms,
                _fmt(row.alpha),
                _fmt(row.beta),
                _fmt(row.delta0),
                _fmt(row.delta),
                row.branch,
                _fmt(row.p),
                _fmt(row.s),
                _fmt(row.c_t),
                _fmt(row.tangent_initial),
                _fmt(row.tangent_emp),
                _fmt(row.tangent_bound_value),
                _fmt(row.tangent_bound_log2),
                _fmt(row.tangent_slack_log2),
                str(row.tangent_violation),
                _fmt(row.measure_initial),
                _fmt(row.measure_emp),
                _fmt(row.measure_bound_value),
                _fmt(row.measure_bound_log2),
                _fmt(row.measure_slack_log2),
                str(row.measure_violation),
                str(row.windows_checked),
                str(row.windows_skipped),
                str(row.increment_violations),
                str(row.holder_violations),
                _fmt(row.max_increment_ratio),
                _fmt(row.max_holder_ratio),
            ]
            print(",".join(cells), file=fout)


# ---------------------------------------------------------------------------
# self-test battery
# ---------------------------------------------------------------------------


def _approx(value: float, target: float, tol: float) -> None:
    if not abs(value - target) <= tol * max(1.0, abs(target)):
        raise AssertionError(f"{value!r} != {target!r} (tol {tol})")


def _check_gamma_constants() -> None:
    _approx(bounds_mod.k1_constant(0.4, 0.7), 2.2541209959720553, 1e-12)
    params = HolderParams(hurst=0.75, eps=0.0625, delta=0.125)
    if not (abs(params.alpha - 0.375) < 1e-15 and abs(params.beta - 0.6875) < 1e-15):
        raise AssertionError("default exponent arithmetic broken")
    from scipy.special import gamma as gamma_fn

    _approx(1.0 / gamma_fn(1.0 - 0.4), 0.6715049724420734, 1e-12)


def _check_covariance() -> None:
    _approx(fbm_covariance(1.0, 2.0, 0.75), math.sqrt(2.0), 1e-12)
    _approx(fbm_covariance(1.0, 1.0, 0.6), 1.0, 1e-12)
    if abs(fbm_covariance(0.3, 0.7, 0.8) - fbm_covariance(0.7, 0.3, 0.8)) > 1e-15:
        raise AssertionError("covariance asymmetric")


def _check_sampler_determinism() -> None:
    grid = TimeGrid(1.0, 64)
    a = sample_paths(grid, 0.75, channels=2, seed=9, method="cholesky")
    b = sample_paths(grid, 0.75, channels=2, seed=9, method="cholesky")
    if not np.array_equal(a.values, b.values):
        raise AssertionError("cholesky sampler not deterministic")
    c = sample_paths(grid, 0.75, channels=2, seed=9, method="circulant")
    d = sample_paths(grid, 0.75, channels=2, seed=9, method="circulant")
    if not np.array_equal(c.values, d.values):
        raise AssertionError("circulant sampler not deterministic")


def _check_generator_covariance() -> None:
    from .fbm import _circulant_draw, _unit_cholesky_factor, _unit_circulant_sqrt_eigs, fgn_autocovariance
    import scipy.linalg

    n = 32
    target = scipy.linalg.toeplitz(fgn_autocovariance(np.arange(n), 0.7))
    factor = _unit_cholesky_factor(n, 0.7)
    if np.max(np.abs(factor @ factor.T - target)) > 1e-10:
        raise AssertionError("cholesky gram mismatch")

    # the circulant draw is linear in its normal draws: materialise the map
    sqrt_eigs = _unit_circulant_sqrt_eigs(n, 0.7)
    draws = 2 + 2 * (n - 1)

    class _Feed:
        def __init__(self, vec):
            self.vec = vec
            self.at = 0

        def standard_normal(self, count):
            out = self.vec[self.at : self.at + count]
            self.at += count
            return np.asarray(out, dtype=float)

    basis = np.eye(draws)
    gen_matrix = np.column_stack(
        [_circulant_draw(sqrt_eigs, _Feed(basis[i]), n) for i in range(draws)]
    )
    if np.max(np.abs(gen_matrix @ gen_matrix.T - target)) > 1e-10:
        raise AssertionError("circulant gram mismatch")


def _check_holder_norm() -> None:
    t = np.linspace(0.0, 1.0, 513)
    if holder_norm(t, np.ones_like(t), 0.5) != 0.0:
        raise AssertionError("constant function must have zero norm")
    _approx(holder_norm(t, t.copy(), 1.0), 1.0, 1e-12)
    _approx(holder_norm(t, t**2, 0.5), (4.0 / 3.0) * math.sqrt(2.0 / 3.0), 1e-4)


def _check_power_rules() -> None:
    from scipy.special import gamma as gamma_fn

    grid = TimeGrid(1.0, 512)
    ones = SampledFunction(grid.nodes.copy(), np.ones(grid.steps + 1))
    half = rl_integral(ones, 0.5)
    _approx(half.values[-1], 1.1283791670955126, 1e-6)
    ident = SampledFunction(grid.nodes.copy(), grid.nodes.copy())
    deriv = weyl_derivative(ident, 0.5)
    target = np.sqrt(grid.nodes) / gamma_fn(1.5)
    if np.max(np.abs(deriv.values - target)) > 1e-6:
        raise AssertionError("power rule derivative mismatch")


def _check_composition_inversion() -> None:
    grid = TimeGrid(1.0, 512)
    f = SampledFunction(grid.nodes.copy(), np.sin(grid.nodes))
    two_step = rl_integral(rl_integral(f, 0.4), 0.3)
    one_step = rl_integral(f, 0.7)
    scale = np.max(np.abs(one_step.values))
    if np.max(np.abs(two_step.values - one_step.values)) > 5e-4 * scale:
        raise AssertionError("integral composition drift")
    back = weyl_derivative(rl_integral(f, 0.4), 0.4)
    if np.max(np.abs(back.values - f.values)) > 5e-3:
        raise AssertionError("inversion drift")


def _check_zahle() -> None:
    grid = TimeGrid(1.0, 512)
    f = SampledFunction(grid.nodes.copy(), grid.nodes.copy())
    g = SampledFunction(grid.nodes.copy(), grid.nodes.copy() ** 2)
    _approx(zahle_integral(f, g, 0.3), 2.0 / 3.0, 2e-3)
    w = w_norm(f, 0.4)
    if not w >= 1.0:
        raise AssertionError("w_norm must dominate the increment ratio")


def _check_flow() -> None:
    grid = TimeGrid(1.0, 256)
    drift = make_field("constant", dim=2, channels=1, value=np.array([0.5, 0.0]))
    path = sample_paths(grid, 0.75, channels=1, seed=3)
    traj = integrate_flow(drift, path, np.zeros(2))
    expected = 0.5 * path.values[:, 0]
    if np.max(np.abs(traj.states[:, 0] - expected)) > 1e-12:
        raise AssertionError("constant-field flow must be exact")
    linear = make_field("linear_test", dim=1, channels=1, rate=1.0)
    path1 = sample_paths(grid, 0.8, channels=1, seed=5, refinement=4)
    coarse = integrate_flow(linear, path1, np.ones(1), refinement=1)
    fine = integrate_flow(linear, path1, np.ones(1), refinement=4)
    closed = math.exp(path1.values[-1, 0])
    if abs(fine.final[0] - closed) >= abs(coarse.final[0] - closed):
        raise AssertionError("refinement did not reduce the strong error")


def _check_delta_solver() -> None:
    fields = make_field("sine", dim=2, channels=2, amplitude=0.2, frequency=np.array([1.0, 1.0]))
    for hurst, norms in ((0.75, (1.5, 2.0)), (0.6, (2.5, 1.0)), (0.9, (0.7, 0.9))):
        params = default_params(hurst)
        constants = compute_constants(params, fields, np.array(norms), 1.0)
        lhs = constants.delta ** (-params.beta)
        rhs = 3.0 * fields.dim * constants.k1 * max(
            constants.c_alpha * constants.m_tilde1_alpha,
            constants.a_delta2 + constants.b2,
        )
        _approx(lhs, rhs, 1e-10)
        _approx(constants.c_t, 1.0 / constants.delta, 1e-12)
        if not (1.0 <= constants.s <= 2.0):
            raise AssertionError(f"S = {constants.s} outside [1, 2]")
    zero = make_field("constant", dim=2, channels=1, value=np.zeros(2))
    constants = compute_constants(default_params(0.75), zero, np.array([1.3]), 1.0)
    if not (constants.degenerate and constants.s == 1.0 and constants.c_t == 0.0):
        raise AssertionError("zero-field degeneracy convention broken")
    tb = tangent_growth_bound(constants, 2.0)
    if tb.value != 2.0:
        raise AssertionError("zero-field tangent bound must equal |v0|_1")


def _check_manifolds() -> None:
    circle = make_manifold("circle", points=1000, radius=1.0)
    _approx(circle.reference_measure, 2.0 * math.pi, 1e-12)
    segment = make_manifold("segment", points=100, length=3.0)
    _approx(segment.reference_measure, 3.0, 1e-12)
    sphere = make_manifold("sphere", points=2000, radius=1.0)
    _approx(sphere.reference_measure, 4.0 * math.pi, 1e-3)
    _approx(gram_volume(np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])), 1.0, 1e-12)
    rng = np.random.Generator(np.random.Philox(key=11))
    for _ in range(200):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(m + 1, 6))
        frame = rng.normal(size=(m, n)) * 10.0 ** rng.integers(-3, 4)
        if not gram_hadamard_check(frame):
            raise AssertionError("Hadamard bound violated by a random frame")


def _check_mini_experiment() -> None:
    config = ExperimentConfig(
        field_spec="sine2d",
        hurst=0.75,
        grid_steps=256,
        replications=3,
        seed=123,
        manifold_spec="circle:r=1,n=2",
        manifold_points=64,
        workers=1,
        out=None,
        make_plots=False,
    )
    result = run_bound_experiment(config, quiet=True)
    if result.summary.failures or result.summary.violations:
        raise AssertionError(
            f"mini experiment: {result.summary.failures} failures, "
            f"{result.summary.violations} violations"
        )
    redo = run_bound_experiment(replace(config, workers=3), quiet=True)
    for a, b in zip(result.rows, redo.rows):
        if a != b:
            raise AssertionError("rows differ across worker counts")


_SELFTEST_CHECKS = [
    ("constant chain golden values", _check_gamma_constants),
    ("fBm covariance identities", _check_covariance),
    ("sampler determinism", _check_sampler_determinism),
    ("generator covariance is exact", _check_generator_covariance),
    ("grid Hölder norms", _check_holder_norm),
    ("fractional power rules", _check_power_rules),
    ("composition and inversion", _check_composition_inversion),
    ("generalized Stieltjes values", _check_zahle),
    ("flow exactness and refinement", _check_flow),
    ("interval solver and conventions", _check_delta_solver),
    ("manifold quadrature and Gram bounds", _check_manifolds),
    ("mini bound experiment", _check_mini_experiment),
]


def selftest(mutate_k1: bool = False, quiet: bool = False) -> int:
    """Run the reduced-size property battery; returns the number of failures.

    ``mutate_k1`` is a development drill: it corrupts the kernel constant k1
    by a factor of two for the duration of the run, and a healthy battery
    must then fail (the run reports the failures and restores the constant).
    """
    failures = 0
    original = bounds_mod._K1_TAMPER
    try:
        if mutate_k1:
            bounds_mod._K1_TAMPER = 0.5 * original
        for name, check in _SELFTEST_CHECKS:
            try:
                check()
            except Exception as exc:  # noqa: BLE001 - report, do not abort the battery
                failures += 1
                if not quiet:
                    print(f"FAIL {name}: {exc}")
            else:
                if not quiet:
                    print(f"ok   {name}")
    finally:
        bounds_mod._K1_TAMPER = original
    if not quiet:
        verdict = "all checks passed" if failures == 0 else f"{failures} check(s) failed"
        print(f"selftest: {verdict}")
    return failures
