"""Candle forecasting toolkit: indicators, denoising, feature selection,
windowed datasets, a small autograd stack, conv/LSTM models, a gated
training loop, threshold trading, and a reproducible pipeline."""
from __future__ import annotations

from .errors import (ArtifactError, CandlecastError, ConfigError, DataError,
                     TrainingDiverged, UnderFitted, UntrainedModelError)
from .market_data import (Candle, CandleSeries, chronological_split, load_csv,
                          save_csv)
from .synthetic import sine_market
from .indicators import (FeatureClass, FeatureTable, IndicatorSpec,
                         OHLCV_NAMES, compute_indicator, default_grid,
                         generate_features)
from .denoise import (WaveletConfig, denoise_column, denoise_features,
                      dwt_forward, dwt_inverse)
from .feature_select import (GbdtConfig, GbdtModel, fit_gbdt,
                             load_importance_csv, rank_features,
                             save_importance_csv, select_top_k)
from .dataset import (NormStats, WindowedDataset, direction_labels,
                      fit_norm_stats, load_windows, make_windows, normalize,
                      save_windows, split_channels)
from .autoencoder import (AutoencoderModel, build_autoencoder, decode, encode,
                          train_autoencoder)
from .classifier import (ClassifierModel, build_classifier, forward,
                         predict_batch)
from .trainer import (TrainConfig, TrainReport, has_converged, loss_base10,
                      quality_gate, read_history_csv, sigma_star,
                      train_classifier, write_history_csv)
from .strategy import (LONG, NO_ACTION, SHORT, BacktestReport, StrategyConfig,
                       Trade, bet_size, read_ledger_csv, risk_reward,
                       run_backtest, signal, thresholds, write_ledger_csv,
                       write_report_csv, write_report_json)
from .pipeline import (DEFAULTS, PipelineConfig, build_config, run_all,
                       run_paths, stage_backtest, stage_ingest, stage_prepare,
                       stage_train)
from . import nn

__version__ = "0.1.0"

__all__ = [
    "ArtifactError", "CandlecastError", "ConfigError", "DataError",
    "TrainingDiverged", "UnderFitted", "UntrainedModelError",
    "Candle", "CandleSeries", "chronological_split", "load_csv", "save_csv",
    "sine_market",
    "FeatureClass", "FeatureTable", "IndicatorSpec", "OHLCV_NAMES",
    "compute_indicator", "default_grid", "generate_features",
    "WaveletConfig", "denoise_column", "denoise_features", "dwt_forward",
    "dwt_inverse",
    "GbdtConfig", "GbdtModel", "fit_gbdt", "load_importance_csv",
    "rank_features", "save_importance_csv", "select_top_k",
    "NormStats", "WindowedDataset", "direction_labels", "fit_norm_stats",
    "load_windows", "make_windows", "normalize", "save_windows",
    "split_channels",
    "AutoencoderModel", "build_autoencoder", "decode", "encode",
    "train_autoencoder",
    "ClassifierModel", "build_classifier", "forward", "predict_batch",
    "TrainConfig", "TrainReport", "has_converged", "loss_base10",
    "quality_gate", "read_history_csv", "sigma_star", "train_classifier",
    "write_history_csv",
    "LONG", "NO_ACTION", "SHORT", "BacktestReport", "StrategyConfig", "Trade",
    "bet_size", "read_ledger_csv", "risk_reward", "run_backtest", "signal",
    "thresholds", "write_ledger_csv", "write_report_csv", "write_report_json",
    "DEFAULTS", "PipelineConfig", "build_config", "run_all", "run_paths",
    "stage_backtest", "stage_ingest", "stage_prepare", "stage_train",
    "nn", "__version__",
]
