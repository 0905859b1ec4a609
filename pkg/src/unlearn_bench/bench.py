"""Experiment orchestration: configs, budget-fair benchmark grids, and persistence.

Protocol shared by every benchmark grid:

* the test partition is drawn once from ``data_seed`` and held fixed; only
  the forget subset is re-sampled across run seeds;
* the full-data optimum is trained once per dataset and the retain optimum
  once per (r_f, seed) cell, both cached and shared by all methods, so every
  method in a cell faces the identical split, reference, and budget;
* budgets are quoted in epochs and converted to sample-gradient units as
  epochs * (n_retain + n_forget), applied uniformly to all methods.

Noise calibration differs between grids.  The certified comparison measures
each noised method's sensitivity empirically (worst pre-noise distance to the
retain optimum over probe re-runs) and scales the Gaussian mechanism by
kappa * sensitivity; the empirical/privacy grid applies kappa directly with a
unit distance bound, matching how such methods are deployed when smoothness
constants are unknown.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import audit
from .baselines import BaselineConfig, fine_tune, neggrad_plus, nft, scrub
from .data import DataSplit, Dataset, gaussian_blobs, load_dataset, make_split
from .engines import BudgetMeter, StepSchedule, retrain_gd, retrain_sgd, retrain_svrg
from .errors import ConfigError
from .model import LossSpec, excess_risk, make_spec, train_to_optimum
from .rng import RngStream
from .vru import PrivacyBudget, noise_model, vru_run

EXCESS_FLOOR = 1e-15
OPTIMUM_TOL = 1e-10

# stream sub-keys; every random decision in a run hangs off one of these
K_TEST_SPLIT = 1
K_FORGET = 2
K_RUN = 3
K_PROBE = 4
K_NOISE = 5
K_SHADOW = 6
K_ATTACK = 7

METHOD_ID = {
    "vru": 1,
    "nft": 2,
    "fine_tune": 3,
    "neggrad_plus": 4,
    "scrub": 5,
    "gd": 6,
    "sgd": 7,
    "svrg": 8,
}

FIG1_METHODS = ("vru", "nft", "gd", "sgd", "svrg")
FIG2_METHODS = ("vru", "fine_tune", "neggrad_plus", "scrub")

# (lr, lr_decay[, alpha]) defaults per method; overridable via config
FIG1_HP = {
    "vru": (1.1, 0.55),
    "nft": (0.3, 0.8),
    "gd": (2.0, 0.8),
    "svrg": (1.0, 0.4),
    "sgd": (0.5, 0.9),
}
FIG2_HP = {
    "vru": (1.0, 0.6),
    "fine_tune": (5e-3, 0.8),
    "neggrad_plus": (3e-3, 0.7, 5e-3),
    "scrub": (5e-3, 0.8, 5e-3),
}

FIG1_RF_GRID = tuple(float(v) for v in np.logspace(-3, -1, 5))
FIG2_RF_GRID = (3e-3, 2e-2, 1e-1)

RECORD_COLUMNS = (
    "method",
    "r_f",
    "seed",
    "excess_risk",
    "mia_accuracy",
    "budget_used",
    "kappa",
    "projection",
    "mode",
    "wall_ms",
)
AGGREGATE_COLUMNS = ("method", "r_f", "geo_mean_excess", "band_low", "band_high", "n_seeds")


@dataclass(frozen=True)
class UnlearnConfig:
    """Flat benchmark configuration; file keys and CLI flags map 1:1 onto fields."""

    dataset: str = ""
    method: str = "vru"
    rf_grid: tuple[float, ...] = FIG1_RF_GRID
    epochs: int = 10
    kappa: float | None = 1.0
    epsilon: float | None = None
    delta: float = 0.05
    seeds: tuple[int, ...] = tuple(range(30))
    projection: bool = True
    mode: str = "empirical"
    out_dir: str = "results"
    lam: float = 0.1
    test_fraction: float = 0.2
    data_seed: int = 0
    batch_size: int = 8
    n_probes: int = 3
    shadows: int = 5
    nu_t: float | None = None
    sensitivity_mode: str = "measured"  # "measured" | "schedule"
    lr: float | None = None
    lr_decay: float | None = None
    alpha: float | None = None
    sensitivity: float | None = None
    save_models: bool = False
    vru_schedule: str = "inverse-mu-t"  # "inverse-mu-t" | "table"

    def __post_init__(self) -> None:
        object.__setattr__(self, "rf_grid", tuple(self.rf_grid))
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if any(not 0.0 < rf < 1.0 for rf in self.rf_grid):
            raise ConfigError(f"r_f values must lie in (0, 1): {self.rf_grid}")
        if self.epochs <= 0:
            raise ConfigError("epochs budget must be positive")
        if self.mode not in ("empirical", "theoretical"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.sensitivity_mode not in ("measured", "schedule"):
            raise ConfigError(f"unknown sensitivity_mode {self.sensitivity_mode!r}")
        if self.vru_schedule not in ("inverse-mu-t", "table"):
            raise ConfigError(f"unknown vru_schedule {self.vru_schedule!r}")

    def replace(self, **kw) -> "UnlearnConfig":
        return dataclasses.replace(self, **kw)

    @classmethod
    def fig2_defaults(cls) -> "UnlearnConfig":
        return cls(
            rf_grid=FIG2_RF_GRID,
            epochs=5,
            kappa=0.1,
            seeds=(0, 1, 2),
            nu_t=1.0,
            sensitivity_mode="schedule",
            vru_schedule="table",
        )

    @classmethod
    def ablation_defaults(cls) -> "UnlearnConfig":
        return cls(
            epochs=5,
            kappa=0.1,
            nu_t=1.0,
            sensitivity_mode="schedule",
            vru_schedule="table",
        )

    def privacy(self) -> PrivacyBudget:
        if self.epsilon is not None:
            return PrivacyBudget.from_eps_delta(self.epsilon, self.delta)
        if self.kappa is None:
            raise ConfigError("either kappa or epsilon must be set")
        return PrivacyBudget.direct(self.kappa, self.delta)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(UnlearnConfig)}


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    if name in ("rf_grid",):
        return tuple(float(v) for v in raw.split(",") if v.strip())
    if name in ("seeds",):
        return tuple(int(v) for v in raw.split(",") if v.strip())
    if name in ("projection", "save_models"):
        low = raw.lower()
        if low in ("on", "true", "1", "yes"):
            return True
        if low in ("off", "false", "0", "no"):
            return False
        raise ConfigError(f"bad boolean for {name}: {raw!r}")
    if name in ("epochs", "data_seed", "batch_size", "n_probes", "shadows"):
        return int(raw)
    if name in ("kappa", "epsilon", "delta", "lam", "test_fraction", "nu_t",
                "lr", "lr_decay", "alpha", "sensitivity"):
        return None if low_none(raw) else float(raw)
    return raw


def low_none(raw: str) -> bool:
    return raw.lower() in ("none", "null", "")


def parse_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` config file; '#' starts a comment."""
    out: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = _parse_value(key, raw)
    return out


def build_config(file_values: dict | None = None, overrides: dict | None = None,
                 base: UnlearnConfig | None = None) -> UnlearnConfig:
    """Layer config sources: dataclass defaults, then file values, then CLI overrides."""
    cfg = base or UnlearnConfig()
    merged = {**(file_values or {}), **{k: v for k, v in (overrides or {}).items() if v is not None}}
    bad = set(merged) - set(_FIELD_TYPES)
    if bad:
        raise ConfigError(f"unknown config keys: {sorted(bad)}")
    return cfg.replace(**merged)


def config_hash(cfg: UnlearnConfig) -> str:
    """Platform-stable digest of the resolved configuration."""
    canon = json.dumps(dataclasses.asdict(cfg), sort_keys=True, default=repr)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def resolve_dataset(cfg: UnlearnConfig) -> Dataset:
    """Load the config's dataset: a CSV path or a ``synthetic:`` blob spec."""
    if not cfg.dataset:
        raise ConfigError("no dataset configured")
    if cfg.dataset.startswith("synthetic:"):
        params = {"n": 600, "d": 20, "c": 3, "sep": 2.0, "seed": 1}
        body = cfg.dataset[len("synthetic:"):]
        for item in filter(None, body.split(",")):
            k, v = item.split("=")
            params[k.strip()] = float(v) if k.strip() == "sep" else int(v)
        return gaussian_blobs(
            int(params["n"]), int(params["d"]), int(params["c"]),
            RngStream(int(params["seed"])), separation=float(params["sep"]),
        )
    return load_dataset(cfg.dataset)


@dataclass
class RunRecord:
    """One benchmark outcome."""

    config_hash: str
    method: str
    r_f: float
    seed: int
    excess_risk: float
    mia_accuracy: float | None
    budget_used: int
    wall_ms: int
    kappa: float
    projection: str
    mode: str
    pre_noise_path: str = ""
    post_noise_path: str = ""


@dataclass
class Aggregate:
    """Per-(method, r_f) geometric mean with a multiplicative one-std band."""

    method: str
    r_f: float
    geo_mean_excess: float
    band_low: float
    band_high: float
    n_seeds: int
    floored: bool = False
    arithmetic_fallback: float | None = None


def aggregate(records: list[RunRecord]) -> list[Aggregate]:
    """Geometric means of excess risks per (method, r_f), floored at 1e-15.

    Non-positive values are floored before taking logs (and flagged); a group
    that is entirely non-positive additionally records its arithmetic mean.
    """
    groups: dict[tuple[str, float], list[float]] = {}
    for rec in records:
        groups.setdefault((rec.method, rec.r_f), []).append(rec.excess_risk)
    out = []
    for (method, r_f), values in sorted(groups.items()):
        arr = np.asarray(values)
        floored = bool((arr < EXCESS_FLOOR).any())
        logs = np.log(np.maximum(arr, EXCESS_FLOOR))
        m = float(logs.mean())
        s = float(logs.std(ddof=1)) if len(logs) > 1 else 0.0
        out.append(
            Aggregate(
                method=method,
                r_f=r_f,
                geo_mean_excess=float(np.exp(m)),
                band_low=float(np.exp(m - s)),
                band_high=float(np.exp(m + s)),
                n_seeds=len(values),
                floored=floored,
                arithmetic_fallback=float(arr.mean()) if (arr <= 0).all() else None,
            )
        )
    return out


# --------------------------------------------------------------------------
# optimum caching


class OptimaCache:
    """Memo for converged optima keyed by (dataset fingerprint, index set, lam, tol)."""

    def __init__(self) -> None:
        self._store: dict = {}

    @staticmethod
    def fingerprint(dataset: Dataset) -> str:
        h = hashlib.sha1()
        h.update(dataset.X.tobytes())
        h.update(dataset.y.tobytes())
        return h.hexdigest()[:16]

    def get_or_train(
        self,
        key: tuple,
        spec: LossSpec,
        data: Dataset,
        tol: float = OPTIMUM_TOL,
        warm: np.ndarray | None = None,
    ) -> np.ndarray:
        if key not in self._store:
            self._store[key] = train_to_optimum(spec, data, tol, theta0=warm)
        return self._store[key]


def _idx_key(idx: np.ndarray) -> str:
    return hashlib.sha1(np.sort(idx).tobytes()).hexdigest()[:16]


@dataclass
class CellState:
    """Everything one (r_f, seed) cell shares across methods."""

    split: DataSplit
    theta_star: np.ndarray
    theta_r_star: np.ndarray
    budget: int


def prepare_cell(
    dataset: Dataset,
    spec: LossSpec,
    cfg: UnlearnConfig,
    rf: float,
    rf_i: int,
    seed: int,
    cache: OptimaCache,
    ds_fp: str,
) -> CellState:
    split = make_split(
        dataset,
        rf,
        cfg.test_fraction,
        rng=RngStream(cfg.data_seed).derive(K_TEST_SPLIT),
        forget_rng=RngStream(seed).derive(K_FORGET, rf_i),
    )
    pool = split.train_pool()
    pool_key = ("star", ds_fp, _idx_key(np.concatenate([split.retain_idx, split.forget_idx])),
                cfg.lam)
    theta_star = cache.get_or_train(pool_key, spec, pool)
    retain_key = ("retain", ds_fp, _idx_key(split.retain_idx), cfg.lam)
    theta_r_star = cache.get_or_train(retain_key, spec, split.retain, warm=theta_star)
    return CellState(
        split=split,
        theta_star=theta_star,
        theta_r_star=theta_r_star,
        budget=cfg.epochs * split.n_train,
    )


# --------------------------------------------------------------------------
# method runners


def _hp(method: str, cfg: UnlearnConfig, table: dict) -> tuple[float, float, float | None]:
    entry = table[method]
    lr = cfg.lr if cfg.lr is not None else entry[0]
    decay = cfg.lr_decay if cfg.lr_decay is not None else entry[1]
    alpha = cfg.alpha if cfg.alpha is not None else (entry[2] if len(entry) > 2 else None)
    return lr, decay, alpha


def _run_vru(
    spec, cell: CellState, cfg: UnlearnConfig, privacy: PrivacyBudget,
    run_rng: RngStream, lr: float, decay: float, projection: bool,
):
    if cfg.vru_schedule == "inverse-mu-t":
        schedule = StepSchedule.inverse_mu(spec.mu)
    else:
        schedule = StepSchedule.constant_decay(lr, decay)
    kwargs = dict(
        budget=cell.budget,
        mode=cfg.mode,
        projection=projection,
        schedule=schedule,
        batch_size=cfg.batch_size,
        nu_t_override=cfg.nu_t,
    )
    if cfg.sensitivity_mode == "schedule":
        result = vru_run(spec, cell.split, cell.theta_star, privacy, run_rng, **kwargs)
        return result.post_noise, result.budget_used, {
            "pre_noise": result.pre_noise,
            "noise_sigma": result.noise_sigma,
        }
    # measured mode: worst pre-noise distance to the retain optimum over
    # probe re-runs becomes the sensitivity fed to the Gaussian mechanism
    probes = [
        vru_run(spec, cell.split, cell.theta_star, privacy, run_rng.derive(K_PROBE, i), **kwargs)
        for i in range(max(cfg.n_probes, 1))
    ]
    sens = max(float(np.linalg.norm(p.pre_noise - cell.theta_r_star)) for p in probes)
    sigma = privacy.kappa * sens
    final = noise_model(probes[0].pre_noise, sigma, run_rng.derive(K_NOISE))
    return final, probes[0].budget_used, {
        "pre_noise": probes[0].pre_noise,
        "noise_sigma": sigma,
        "sensitivity": sens,
    }


def run_method(
    method: str,
    spec,
    cell: CellState,
    cfg: UnlearnConfig,
    privacy: PrivacyBudget,
    seed: int,
    rf_i: int,
    hp_table: dict,
    projection: bool | None = None,
    run_rng: RngStream | None = None,
):
    """Run one method in one cell; returns (final_theta, budget_used, extras)."""
    if method not in METHOD_ID:
        raise ConfigError(f"unknown method {method!r}")
    if run_rng is None:
        run_rng = RngStream(seed).derive(K_RUN, METHOD_ID[method], rf_i)
    projection = cfg.projection if projection is None else projection
    split, budget = cell.split, cell.budget

    if method == "vru":
        lr, decay, _ = _hp(method, cfg, hp_table)
        return _run_vru(spec, cell, cfg, privacy, run_rng, lr, decay, projection)

    meter = BudgetMeter(budget)
    if method == "nft":
        lr, decay, _ = _hp(method, cfg, hp_table)
        sens = (
            cfg.sensitivity
            if cfg.sensitivity is not None
            else float(np.linalg.norm(cell.theta_star - cell.theta_r_star))
        )
        bc = BaselineConfig(method="nft", lr=lr, lr_decay=decay, sensitivity=sens)
        theta = nft(spec, split, cell.theta_star, budget, privacy, bc, run_rng,
                    batch_size=cfg.batch_size, meter=meter)
        return theta, meter.used, {"sensitivity": sens, "noise_sigma": privacy.kappa * sens}
    if method == "fine_tune":
        lr, decay, _ = _hp(method, cfg, hp_table)
        bc = BaselineConfig(method="fine_tune", lr=lr, lr_decay=decay)
        theta = fine_tune(spec, split, cell.theta_star, budget, bc, run_rng,
                          batch_size=cfg.batch_size, meter=meter)
        return theta, meter.used, {}
    if method in ("neggrad_plus", "scrub"):
        lr, decay, alpha = _hp(method, cfg, hp_table)
        bc = BaselineConfig(method=method, lr=lr, lr_decay=decay, alpha=alpha)
        runner = neggrad_plus if method == "neggrad_plus" else scrub
        theta = runner(spec, split, cell.theta_star, budget, bc, run_rng,
                       batch_size=cfg.batch_size, meter=meter)
        return theta, meter.used, {}

    lr, decay, _ = _hp(method, cfg, hp_table)
    schedule = StepSchedule.constant_decay(lr, decay)
    if method == "gd":
        theta = retrain_gd(spec, split.retain, budget, schedule, meter=meter)
    elif method == "sgd":
        theta = retrain_sgd(spec, split.retain, budget, schedule, run_rng,
                            batch_size=cfg.batch_size, meter=meter)
    else:  # svrg
        theta = retrain_svrg(spec, split.retain, budget, schedule, run_rng, meter=meter)
    return theta, meter.used, {}


# --------------------------------------------------------------------------
# figure grids


@dataclass
class FigResult:
    records: list[RunRecord]
    aggregates: list[Aggregate]
    failures: list[tuple[str, float, int, str]] = field(default_factory=list)
    mia_reports: list[dict] = field(default_factory=list)
    ratio_rows: list[tuple] = field(default_factory=list)


def _save_model(theta: np.ndarray, out_dir: Path, name: str, enabled: bool) -> str:
    if not enabled:
        return ""
    path = out_dir / "models" / f"{name}.npy"
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, theta)
    return str(path)


def _grid(
    cfg: UnlearnConfig,
    dataset: Dataset,
    methods: tuple[str, ...],
    hp_table: dict,
    tag: str,
    with_mia: bool = False,
    projection_arms: tuple[bool, ...] | None = None,
    cache: OptimaCache | None = None,
) -> FigResult:
    spec = make_spec(cfg.lam, dataset)
    privacy = cfg.privacy()
    cache = cache if cache is not None else OptimaCache()
    ds_fp = OptimaCache.fingerprint(dataset)
    chash = config_hash(cfg)
    out_dir = Path(cfg.out_dir)
    arms = projection_arms if projection_arms is not None else (cfg.projection,)
    records: list[RunRecord] = []
    failures: list[tuple[str, float, int, str]] = []
    mia_reports: list[dict] = []

    for rf_i, rf in enumerate(cfg.rf_grid):
        for seed in cfg.seeds:
            try:
                cell = prepare_cell(dataset, spec, cfg, rf, rf_i, seed, cache, ds_fp)
            except Exception as exc:
                failures.extend(
                    (m, rf, seed, f"{type(exc).__name__}: {exc}") for m in methods
                )
                continue
            for method in methods:
                for proj in arms:
                    try:
                        t0 = time.perf_counter()
                        theta, used, extras = run_method(
                            method, spec, cell, cfg, privacy, seed, rf_i, hp_table,
                            projection=proj,
                        )
                        wall_ms = int((time.perf_counter() - t0) * 1000)
                        risk = excess_risk(spec, theta, cell.split.test, cell.theta_r_star)
                        mia_acc = None
                        if with_mia:
                            report = _audit_cell(
                                spec, cell, cfg, privacy, method, rf_i, seed, hp_table, theta
                            )
                            mia_acc = report.accuracy
                            mia_reports.append(report.summary(method, cell.split.r_f, seed))
                        name = f"{tag}_{method}_rf{rf_i}_s{seed}" + ("" if proj else "_noproj")
                        records.append(
                            RunRecord(
                                config_hash=chash,
                                method=method,
                                r_f=cell.split.r_f,
                                seed=seed,
                                excess_risk=risk,
                                mia_accuracy=mia_acc,
                                budget_used=used,
                                wall_ms=wall_ms,
                                kappa=privacy.kappa,
                                projection="on" if proj else "off",
                                mode=cfg.mode,
                                pre_noise_path=_save_model(
                                    extras.get("pre_noise", theta), out_dir,
                                    name + "_pre", cfg.save_models),
                                post_noise_path=_save_model(
                                    theta, out_dir, name + "_post", cfg.save_models),
                            )
                        )
                    except Exception as exc:  # individual run failures are recorded, not fatal
                        failures.append((method, rf, seed, f"{type(exc).__name__}: {exc}"))
    return FigResult(records=records, aggregates=aggregate(records),
                     failures=failures, mia_reports=mia_reports)


def _audit_cell(spec, cell, cfg, privacy, method, rf_i, seed, hp_table, audited):
    """Build shadows with the audited method's own config and run the attack."""
    shadow_rng = RngStream(seed).derive(K_SHADOW, METHOD_ID[method], rf_i)

    def unlearn_fn(stream: RngStream) -> np.ndarray:
        theta, _, _ = run_method(
            method, spec, cell, cfg, privacy, seed, rf_i, hp_table, run_rng=stream
        )
        return theta

    sgd_lr, sgd_decay = FIG1_HP["sgd"]

    def retrain_fn(stream: RngStream) -> np.ndarray:
        return retrain_sgd(
            spec, cell.split.retain, cell.budget,
            StepSchedule.constant_decay(sgd_lr, sgd_decay),
            stream, batch_size=cfg.batch_size,
        )

    shadows = audit.build_shadows(unlearn_fn, retrain_fn, cfg.shadows, shadow_rng)
    attack = audit.build_attack_set(cell.split, RngStream(seed).derive(K_ATTACK, rf_i))
    return audit.ulira(spec, shadows, audited, attack)


def run_fig1(cfg: UnlearnConfig, dataset: Dataset | None = None,
             cache: OptimaCache | None = None) -> FigResult:
    """Certified-methods grid: excess risk across r_f under equal budgets."""
    dataset = dataset if dataset is not None else resolve_dataset(cfg)
    return _grid(cfg, dataset, FIG1_METHODS, FIG1_HP, tag="fig1", cache=cache)


def run_fig2(cfg: UnlearnConfig, dataset: Dataset | None = None,
             cache: OptimaCache | None = None) -> FigResult:
    """Privacy-utility grid: excess risk plus U-LiRA attack accuracy per cell."""
    dataset = dataset if dataset is not None else resolve_dataset(cfg)
    return _grid(cfg, dataset, FIG2_METHODS, FIG2_HP, tag="fig2", with_mia=True, cache=cache)


def run_ablation(cfg: UnlearnConfig, dataset: Dataset | None = None,
                 cache: OptimaCache | None = None) -> FigResult:
    """Projection on/off ablation for the variance-reduced unlearner."""
    dataset = dataset if dataset is not None else resolve_dataset(cfg)
    result = _grid(cfg, dataset, ("vru",), FIG2_HP, tag="ablation",
                   projection_arms=(True, False), cache=cache)
    by_arm: dict[tuple[str, float], float] = {}
    for agg_on in aggregate([r for r in result.records if r.projection == "on"]):
        by_arm[("on", agg_on.r_f)] = agg_on.geo_mean_excess
    for agg_off in aggregate([r for r in result.records if r.projection == "off"]):
        by_arm[("off", agg_off.r_f)] = agg_off.geo_mean_excess
    rfs = sorted({rf for (_, rf) in by_arm})
    result.ratio_rows = [
        (rf, by_arm[("off", rf)], by_arm[("on", rf)], by_arm[("off", rf)] / by_arm[("on", rf)])
        for rf in rfs
    ]
    return result


# --------------------------------------------------------------------------
# persistence


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(records: list[RunRecord], path: str | Path, chash: str) -> None:
    lines = [f"# config_hash={chash}", ",".join(RECORD_COLUMNS)]
    for r in records:
        lines.append(",".join(_fmt(getattr(r, col)) for col in RECORD_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def read_records_csv(path: str | Path) -> list[RunRecord]:
    lines = Path(path).read_text().splitlines()
    chash = ""
    rows = []
    header: list[str] | None = None
    for line in lines:
        if line.startswith("#"):
            if "config_hash=" in line:
                chash = line.split("config_hash=", 1)[1].strip()
            continue
        if header is None:
            header = line.split(",")
            if tuple(header) != RECORD_COLUMNS:
                raise ConfigError(f"{path}: unexpected record columns {header}")
            continue
        rows.append(line.split(","))
    records = []
    for row in rows:
        vals = dict(zip(RECORD_COLUMNS, row))
        records.append(
            RunRecord(
                config_hash=chash,
                method=vals["method"],
                r_f=float(vals["r_f"]),
                seed=int(vals["seed"]),
                excess_risk=float(vals["excess_risk"]),
                mia_accuracy=float(vals["mia_accuracy"]) if vals["mia_accuracy"] else None,
                budget_used=int(vals["budget_used"]),
                wall_ms=int(vals["wall_ms"]),
                kappa=float(vals["kappa"]),
                projection=vals["projection"],
                mode=vals["mode"],
            )
        )
    return records


def write_aggregates_csv(aggs: list[Aggregate], path: str | Path, chash: str) -> None:
    lines = [f"# config_hash={chash}"]
    flagged = [a for a in aggs if a.floored]
    if flagged:
        tags = ";".join(f"{a.method}@{_fmt(a.r_f)}" for a in flagged)
        lines.append(f"# floored_groups={tags}")
    lines.append(",".join(AGGREGATE_COLUMNS))
    for a in aggs:
        lines.append(",".join(_fmt(getattr(a, col)) for col in AGGREGATE_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def write_ratio_csv(rows: list[tuple], path: str | Path, chash: str) -> None:
    lines = [f"# config_hash={chash}", "r_f,geo_off,geo_on,ratio_off_on"]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_mia_json(reports: list[dict], path: str | Path) -> None:
    Path(path).write_text(json.dumps(reports, indent=2) + "\n")


def persist_result(result: FigResult, cfg: UnlearnConfig, tag: str) -> dict[str, Path]:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)
    paths = {
        "records": out / f"{tag}_records.csv",
        "aggregates": out / f"{tag}_aggregate.csv",
    }
    write_records_csv(result.records, paths["records"], chash)
    write_aggregates_csv(result.aggregates, paths["aggregates"], chash)
    if result.mia_reports:
        paths["mia"] = out / f"{tag}_mia.json"
        write_mia_json(result.mia_reports, paths["mia"])
    if result.ratio_rows:
        paths["ratio"] = out / f"{tag}_ratio.csv"
        write_ratio_csv(result.ratio_rows, paths["ratio"], chash)
    return paths
