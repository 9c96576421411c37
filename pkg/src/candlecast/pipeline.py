"""End-to-end orchestration: config, seeded stages, and run artifacts.

A run is fully described by a flat key=value configuration (defaults below,
optionally layered with a config file and command-line overrides).  The
sha256 of the canonical config text names the run directory, so identical
settings always land in the same place and reruns must reproduce identical
bytes.  Every stage records the files it wrote in ``manifest.json`` with
content hashes; later stages refuse artifacts whose hash or run id no
longer matches.

Stage order: feature generation -> denoising -> feature selection ->
windowing -> channel split -> autoencoders (prepare), then classifier
training, then backtesting on the held-out tail.  Everything that fits
statistics or weights sees only the training split.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autoencoder import build_autoencoder, encode, train_autoencoder
from .classifier import build_classifier, predict_batch
from .dataset import (direction_labels, fit_norm_stats, load_windows,
                      make_windows, normalize, save_windows, split_channels)
from .denoise import WaveletConfig, denoise_features
from .errors import ArtifactError, ConfigError, DataError
from .feature_select import (GbdtConfig, fit_gbdt, save_importance_csv,
                             select_top_k)
from .indicators import default_grid, generate_features
from .market_data import load_csv, save_csv
from .nn import load_checkpoint, restore_parameters, save_checkpoint
from .strategy import (StrategyConfig, run_backtest, write_ledger_csv,
                       write_report_csv, write_report_json)
from .synthetic import sine_market
from .trainer import TrainConfig, train_classifier, write_history_csv

DEFAULTS = {
    # data source: a candle CSV path, or "synthetic" for the bundled
    # deterministic sine market
    "data": "synthetic",
    "timeframe": 14400,
    "fill_gaps": False,
    "symbol": "SINE/USD",
    "synthetic_n": 4000,
    "synthetic_period": 96.0,
    "synthetic_amplitude": 0.25,
    "synthetic_noise": 0.0012,
    "synthetic_base_price": 100.0,
    # feature generation
    "indicator_windows": (7, 14, 21, 35, 50),
    # denoising
    "wavelet_family": "db4",
    "wavelet_levels": 2,
    "wavelet_mode": "causal",
    # feature selection (top_k generated columns kept besides the raw five)
    "gbdt_rounds": 100,
    "gbdt_max_depth": 3,
    "gbdt_learning_rate": 0.1,
    "gbdt_min_samples_leaf": 20,
    "top_k": 25,
    # windowing
    "window": 24,
    "stride": 1,
    "train_fraction": 0.8,
    # autoencoders
    "ae_code_price": 4,
    "ae_code_non_price": 4,
    "ae_epochs": 200,
    "ae_learning_rate": 1e-3,
    "ae_batch_size": 64,
    # classifier
    "clf_hidden": 20,
    "clf_branch_channels": 8,
    "clf_dropout": 0.3,
    # trainer
    "zeta": 0.8,
    "patience": 10,
    "slope_threshold": -1e-4,
    "max_epochs": 2000,
    "learning_rate": 1e-3,
    "batch_size": 64,
    # strategy
    "theta_list": (1.0 / 3.0, 0.25, 1.0),
    "fee_rate": 0.001,
    "profit_saving": True,
    "initial_margin": 1000.0,
    # plumbing
    "seed": 7,
    "out_dir": "out",
}

_STREAM_NAMES = ("synthetic", "ae_price", "ae_non_price", "classifier", "trainer")


def parse_number(text: str) -> float:
    """Float literal or a fraction like ``1/3``."""
    text = text.strip()
    if "/" in text:
        num, _, den = text.partition("/")
        try:
            num_v, den_v = float(num), float(den)
        except ValueError:
            raise ConfigError(f"cannot parse fraction {text!r}") from None
        if den_v == 0.0:
            raise ConfigError(f"zero denominator in {text!r}")
        value = num_v / den_v
    else:
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"cannot parse number {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"number {text!r} is not finite")
    return value


def _parse_value(key: str, text: str):
    template = DEFAULTS[key]
    text = text.strip()
    if isinstance(template, bool):
        if text.lower() in ("true", "false"):
            return text.lower() == "true"
        raise ConfigError(f"{key}: expected true or false, got {text!r}")
    if isinstance(template, int):
        try:
            return int(text, 10)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if isinstance(template, float):
        return parse_number(text)
    if isinstance(template, tuple):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ConfigError(f"{key}: needs at least one value")
        if isinstance(template[0], int):
            try:
                return tuple(int(p, 10) for p in parts)
            except ValueError:
                raise ConfigError(f"{key}: expected integers, got {text!r}") from None
        return tuple(parse_number(p) for p in parts)
    return text


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    return str(value)


class PipelineConfig:
    """Immutable bag of validated run settings with a canonical text form."""

    def __init__(self, values: dict | None = None):
        merged = dict(DEFAULTS)
        for key, value in (values or {}).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key {key!r}")
            merged[key] = value
        object.__setattr__(self, "_values", merged)
        self._validate()

    def __setattr__(self, name, value):
        raise AttributeError("configuration is immutable; build a new one")

    def __getattr__(self, name):
        try:
            return self._values[name]
        except KeyError:
            raise AttributeError(name) from None

    def _validate(self) -> None:
        v = self._values
        for key in ("timeframe", "window", "stride", "top_k", "synthetic_n"):
            if v[key] < 1:
                raise ConfigError(f"{key} must be positive, got {v[key]}")
        if not 0.0 < v["train_fraction"] < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {v['train_fraction']}")
        if not v["theta_list"]:
            raise ConfigError("theta_list needs at least one value")
        for key in ("ae_code_price", "ae_code_non_price"):
            if v[key] < 1:
                raise ConfigError(f"{key} must be positive, got {v[key]}")
        if v["ae_epochs"] < 1:
            raise ConfigError(f"ae_epochs must be positive, got {v['ae_epochs']}")
        # sub-configurations enforce their own invariants; building them
        # here surfaces bad values at parse time rather than mid-run
        self.wavelet_config()
        self.gbdt_config()
        self.train_config()
        for theta in v["theta_list"]:
            self.strategy_config(theta)

    def canonical(self) -> str:
        # out_dir is plumbing: where artifacts land must not change what
        # the run computes, so it stays out of the identity hash
        return "\n".join(f"{k}={_format_value(self._values[k])}"
                         for k in sorted(self._values) if k != "out_dir") + "\n"

    @property
    def run_id(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def with_overrides(self, overrides: dict) -> "PipelineConfig":
        merged = dict(self._values)
        merged.update(overrides)
        return PipelineConfig(merged)

    def wavelet_config(self) -> WaveletConfig:
        return WaveletConfig(self.wavelet_family, self.wavelet_levels, self.wavelet_mode)

    def gbdt_config(self) -> GbdtConfig:
        return GbdtConfig(rounds=self.gbdt_rounds, max_depth=self.gbdt_max_depth,
                          learning_rate=self.gbdt_learning_rate,
                          min_samples_leaf=self.gbdt_min_samples_leaf,
                          top_k=self.top_k)

    def train_config(self) -> TrainConfig:
        return TrainConfig(zeta=self.zeta, patience=self.patience,
                           slope_threshold=self.slope_threshold,
                           max_epochs=self.max_epochs,
                           learning_rate=self.learning_rate,
                           batch_size=self.batch_size)

    def strategy_config(self, theta: float) -> StrategyConfig:
        return StrategyConfig(theta=theta, fee_rate=self.fee_rate,
                              profit_saving=self.profit_saving,
                              initial_margin=self.initial_margin)


def load_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path} line {lineno}: expected key=value, got {raw!r}")
        key, _, text = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{path} line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, text)
    return out


def parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, _, text = pair.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r}")
        out[key] = _parse_value(key, text)
    return out


def build_config(config_path=None, overrides=()) -> PipelineConfig:
    values = load_config_file(config_path) if config_path else {}
    values.update(parse_overrides(overrides))
    return PipelineConfig(values)


def seed_streams(seed: int) -> dict:
    """Independent named child sequences of the master seed, fixed order."""
    children = np.random.SeedSequence(seed).spawn(len(_STREAM_NAMES))
    return dict(zip(_STREAM_NAMES, children))


@contextmanager
def _stage(name: str):
    from .errors import CandlecastError
    try:
        yield
    except CandlecastError as exc:
        message = exc.args[0] if exc.args else str(exc)
        exc.args = (f"[{name}] {message}",) + exc.args[1:]
        raise


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


@dataclass(frozen=True)
class RunPaths:
    root: Path

    @property
    def manifest(self) -> Path: return self.root / "manifest.json"
    @property
    def market(self) -> Path: return self.root / "market.csv"
    @property
    def importance(self) -> Path: return self.root / "importance.csv"
    @property
    def dataset(self) -> Path: return self.root / "dataset.bin"
    @property
    def ae_price(self) -> Path: return self.root / "ae_price.ckpt"
    @property
    def ae_non_price(self) -> Path: return self.root / "ae_non_price.ckpt"
    @property
    def prepare_json(self) -> Path: return self.root / "prepare.json"
    @property
    def classifier(self) -> Path: return self.root / "classifier.ckpt"
    @property
    def history(self) -> Path: return self.root / "loss_history.csv"
    @property
    def train_json(self) -> Path: return self.root / "train.json"
    @property
    def backtest_json(self) -> Path: return self.root / "backtest.json"

    def report_json(self, i: int) -> Path: return self.root / f"report_theta{i}.json"
    def report_csv(self, i: int) -> Path: return self.root / f"report_theta{i}.csv"
    def ledger_csv(self, i: int) -> Path: return self.root / f"ledger_theta{i}.csv"


def run_paths(config: PipelineConfig) -> RunPaths:
    return RunPaths(Path(config.out_dir) / config.run_id)


class Manifest:
    """Content-hash registry for one run directory."""

    def __init__(self, paths: RunPaths, run_id: str, files: dict | None = None):
        self.paths = paths
        self.run_id = run_id
        self.files = dict(files or {})

    @classmethod
    def load(cls, paths: RunPaths, config: PipelineConfig) -> "Manifest":
        if not paths.manifest.exists():
            raise ArtifactError(f"no manifest at {paths.manifest}; run earlier stages first")
        payload = json.loads(paths.manifest.read_text())
        if payload.get("run_id") != config.run_id:
            raise ArtifactError(
                f"artifacts in {paths.root} were produced by a different "
                f"configuration (run id {payload.get('run_id')} != {config.run_id})")
        return cls(paths, config.run_id, payload.get("files", {}))

    @classmethod
    def create(cls, paths: RunPaths, config: PipelineConfig) -> "Manifest":
        paths.root.mkdir(parents=True, exist_ok=True)
        if paths.manifest.exists():
            return cls.load(paths, config)
        manifest = cls(paths, config.run_id)
        manifest.save(config)
        return manifest

    def save(self, config: PipelineConfig) -> None:
        _dump_json({"run_id": self.run_id, "config": config.canonical(),
                    "files": self.files}, self.paths.manifest)

    def add(self, path: Path) -> None:
        self.files[path.name] = _sha256(path)

    def verify(self, path: Path) -> Path:
        recorded = self.files.get(path.name)
        if recorded is None:
            raise ArtifactError(f"{path.name} is not part of this run; "
                                "run the producing stage first")
        if not path.exists():
            raise ArtifactError(f"missing artifact {path}")
        actual = _sha256(path)
        if actual != recorded:
            raise ArtifactError(f"refusing {path.name}: content hash {actual[:12]} "
                                f"does not match the recorded {recorded[:12]}")
        return path


def stage_ingest(config: PipelineConfig) -> RunPaths:
    """Materialize the canonical candle file for this run."""
    paths = run_paths(config)
    manifest = Manifest.create(paths, config)
    with _stage("ingest"):
        if config.data == "synthetic":
            child = seed_streams(config.seed)["synthetic"]
            series = sine_market(n=config.synthetic_n, timeframe=config.timeframe,
                                 period=config.synthetic_period,
                                 amplitude=config.synthetic_amplitude,
                                 noise=config.synthetic_noise,
                                 base_price=config.synthetic_base_price,
                                 seed=int(child.generate_state(1)[0]),
                                 symbol=config.symbol)
        else:
            source = Path(config.data)
            if not source.exists():
                raise DataError(f"data file not found: {source}")
            series = load_csv(source, timeframe=config.timeframe,
                              symbol=config.symbol, fill_gaps=config.fill_gaps)
        save_csv(series, paths.market)
        manifest.add(paths.market)
        manifest.save(config)
    return paths


def stage_prepare(config: PipelineConfig) -> RunPaths:
    """Feature generation through autoencoder training, artifacts on disk."""
    paths = run_paths(config)
    manifest = Manifest.load(paths, config)
    manifest.verify(paths.market)
    series = load_csv(paths.market, timeframe=config.timeframe, symbol=config.symbol)
    streams = seed_streams(config.seed)

    with _stage("prepare:features"):
        table = generate_features(series, default_grid(config.indicator_windows))
        # the table dropped the warm-up prefix; keep closes aligned with it
        closes = series.close[len(series) - len(table):]
    with _stage("prepare:denoise"):
        table = denoise_features(table, config.wavelet_config())
    with _stage("prepare:select"):
        rows = len(table)
        train_rows = int(rows * config.train_fraction)
        if train_rows < config.window + 2 or train_rows > rows - 1:
            raise DataError(f"training split of {train_rows} rows (of {rows}) "
                            "cannot support windowing; adjust train_fraction "
                            "or supply more candles")
        labels = direction_labels(closes[:train_rows])
        gbdt = fit_gbdt(table.values[:train_rows - 1], labels,
                        config.gbdt_config(), feature_names=table.names)
        save_importance_csv(paths.importance, gbdt)
        table = select_top_k(table, gbdt, config.top_k)
    with _stage("prepare:windows"):
        ds = make_windows(table, closes, config.window, config.stride)
        ds.set_train_boundary(train_rows)
        if ds.n_train < 1 or ds.n_train >= len(ds):
            raise DataError(f"split leaves {ds.n_train} training instances "
                            f"of {len(ds)}; adjust train_fraction")
        ds = normalize(ds, fit_norm_stats(ds))
        save_windows(ds, paths.dataset)
    with _stage("prepare:channels"):
        ohlcv, price, non_price = split_channels(ds)
    with _stage("prepare:autoencoders"):
        summary = {}
        for label, batch, requested, stream in (
                ("price", price, config.ae_code_price, "ae_price"),
                ("non_price", non_price, config.ae_code_non_price, "ae_non_price")):
            channels = batch.shape[1]
            code = min(requested, channels - 1) if channels > 1 else requested
            if code != requested:
                warnings.warn(f"{label} group has {channels} channels; "
                              f"code size clamped from {requested} to {code}")
            rng = np.random.default_rng(streams[stream])
            model = build_autoencoder(channels, code, config.window,
                                      seed=rng, name=f"ae_{label}")
            train_autoencoder(model, batch[:ds.n_train],
                              epochs=config.ae_epochs,
                              lr=config.ae_learning_rate,
                              batch_size=config.ae_batch_size, seed=rng)
            target = paths.ae_price if label == "price" else paths.ae_non_price
            save_checkpoint(model.parameters(), target)
            summary[label] = {"in_channels": channels, "code_channels": code,
                              "epochs": len(model.loss_history),
                              "final_loss": float(model.loss_history[-1])}
    payload = {
        "ae": summary,
        "channels": list(ds.channel_names),
        "classes": [c.value for c in ds.channel_classes],
        "groups": {"ohlcv": int(ohlcv.shape[1]), "price": int(price.shape[1]),
                   "non_price": int(non_price.shape[1])},
        "instances": len(ds), "n_train": int(ds.n_train),
        "rows": rows, "train_rows": train_rows,
        "window": config.window, "stride": config.stride,
    }
    _dump_json(payload, paths.prepare_json)
    for artifact in (paths.importance, paths.dataset, paths.ae_price,
                     paths.ae_non_price, paths.prepare_json):
        manifest.add(artifact)
    manifest.save(config)
    return paths


def _load_prepare(paths: RunPaths, manifest: Manifest):
    manifest.verify(paths.dataset)
    manifest.verify(paths.prepare_json)
    ds = load_windows(paths.dataset)
    info = json.loads(paths.prepare_json.read_text())
    return ds, info


def _restore_autoencoders(config: PipelineConfig, paths: RunPaths,
                          manifest: Manifest, info: dict):
    models = {}
    for label, path in (("price", paths.ae_price), ("non_price", paths.ae_non_price)):
        manifest.verify(path)
        ae_info = info["ae"][label]
        model = build_autoencoder(ae_info["in_channels"], ae_info["code_channels"],
                                  config.window, seed=0, name=f"ae_{label}")
        restore_parameters(model.parameters(), load_checkpoint(path))
        model.trained = True
        models[label] = model
    return models


def _encoded_groups(config: PipelineConfig, paths: RunPaths, manifest: Manifest):
    ds, info = _load_prepare(paths, manifest)
    ohlcv, price, non_price = split_channels(ds)
    aes = _restore_autoencoders(config, paths, manifest, info)
    price_code = encode(aes["price"], price)
    non_price_code = encode(aes["non_price"], non_price)
    return ds, info, ohlcv, price_code, non_price_code


def stage_train(config: PipelineConfig) -> tuple:
    """Fit the classifier on the training instances; persist the verdict."""
    paths = run_paths(config)
    manifest = Manifest.load(paths, config)
    with _stage("train"):
        ds, info, ohlcv, price_code, non_price_code = \
            _encoded_groups(config, paths, manifest)
        n_train = ds.n_train
        streams = seed_streams(config.seed)
        model = build_classifier(ohlcv.shape[1], price_code.shape[1],
                                 non_price_code.shape[1], config.window,
                                 seed=np.random.default_rng(streams["classifier"]),
                                 hidden_size=config.clf_hidden,
                                 branch_channels=config.clf_branch_channels,
                                 dropout_rate=config.clf_dropout)
        report = train_classifier(model, ohlcv[:n_train], price_code[:n_train],
                                  non_price_code[:n_train], ds.y[:n_train],
                                  config.train_config(),
                                  seed=np.random.default_rng(streams["trainer"]))
        save_checkpoint(model.parameters(), paths.classifier)
        write_history_csv(report.history, paths.history)
        _dump_json({"status": report.status, "sigma_star": report.sigma_star,
                    "loss_e": report.loss_e, "loss_10": report.loss_10,
                    "epochs_run": report.epochs_run, "converged": report.converged,
                    "zeta": config.zeta}, paths.train_json)
        for artifact in (paths.classifier, paths.history, paths.train_json):
            manifest.add(artifact)
        manifest.save(config)
    return paths, report


def stage_backtest(config: PipelineConfig) -> tuple:
    """Score the held-out tail for every theta in the list."""
    paths = run_paths(config)
    manifest = Manifest.load(paths, config)
    with _stage("backtest"):
        manifest.verify(paths.train_json)
        verdict = json.loads(paths.train_json.read_text())
        ds, info, ohlcv, price_code, non_price_code = \
            _encoded_groups(config, paths, manifest)
        manifest.verify(paths.classifier)
        model = build_classifier(ohlcv.shape[1], price_code.shape[1],
                                 non_price_code.shape[1], config.window,
                                 seed=0, hidden_size=config.clf_hidden,
                                 branch_channels=config.clf_branch_channels,
                                 dropout_rate=config.clf_dropout)
        restore_parameters(model.parameters(), load_checkpoint(paths.classifier))
        model.trained = True

        n_train = ds.n_train
        if n_train >= len(ds):
            raise DataError("no held-out instances to backtest")
        close_t = ds.close_t[n_train:]
        close_next = ds.close_next[n_train:]
        if not np.array_equal(close_t[1:], close_next[:-1]):
            raise DataError("held-out instances are not consecutive candles; "
                            "backtesting needs stride=1")
        closes = np.append(close_t, close_next[-1])
        if config.wavelet_mode == "global":
            warnings.warn("global wavelet mode denoises with the full series "
                          "in view; backtest results include look-ahead and "
                          "overstate live performance")
        sigmas = predict_batch(model, ohlcv[n_train:], price_code[n_train:],
                               non_price_code[n_train:])
        labels = ds.y[n_train:]
        extra = {"sigma_star": verdict["sigma_star"],
                 "converged_loss_10": verdict["loss_10"],
                 "verdict": verdict["status"],
                 "test_instances": int(len(ds) - n_train)}
        runs = []
        reports = []
        for i, theta in enumerate(config.theta_list):
            report = run_backtest(sigmas, closes, labels, config.strategy_config(theta))
            write_report_json(report, paths.report_json(i), extra=extra)
            write_report_csv(report, paths.report_csv(i), extra=extra)
            write_ledger_csv(report.ledger, paths.ledger_csv(i))
            runs.append({"theta": theta, "trades": report.trades,
                         "accuracy": report.accuracy,
                         "pnl_compounding": report.pnl_compounding,
                         "pnl_profit_saving": report.pnl_profit_saving,
                         "report_json": paths.report_json(i).name,
                         "report_csv": paths.report_csv(i).name,
                         "ledger_csv": paths.ledger_csv(i).name})
            reports.append(report)
            for artifact in (paths.report_json(i), paths.report_csv(i),
                             paths.ledger_csv(i)):
                manifest.add(artifact)
        _dump_json({"runs": runs, "verdict": verdict["status"]}, paths.backtest_json)
        manifest.add(paths.backtest_json)
        manifest.save(config)
    return paths, reports


def run_all(config: PipelineConfig) -> tuple:
    """ingest -> prepare -> train -> backtest; returns (paths, train report,
    backtest reports)."""
    stage_ingest(config)
    stage_prepare(config)
    _, train_report = stage_train(config)
    _, reports = stage_backtest(config)
    return run_paths(config), train_report, reports


def report_text(config: PipelineConfig) -> str:
    """Human-readable summary of a finished run."""
    paths = run_paths(config)
    manifest = Manifest.load(paths, config)
    manifest.verify(paths.train_json)
    verdict = json.loads(paths.train_json.read_text())
    lines = [f"run {config.run_id} at {paths.root}",
             f"verdict: {verdict['status']} "
             f"(sigma*={verdict['sigma_star']:.4f}, zeta={verdict['zeta']}, "
             f"epochs={verdict['epochs_run']})"]
    if paths.backtest_json.name in manifest.files:
        manifest.verify(paths.backtest_json)
        summary = json.loads(paths.backtest_json.read_text())
        lines.append("theta    trades  accuracy  pnl_saving%  pnl_compound%")
        for run in summary["runs"]:
            lines.append(f"{run['theta']:<8.4g}{run['trades']:>6}  "
                         f"{run['accuracy']:>8.4f}  {run['pnl_profit_saving']:>11.4f}  "
                         f"{run['pnl_compounding']:>13.4f}")
    else:
        lines.append("no backtest artifacts yet")
    return "\n".join(lines)
