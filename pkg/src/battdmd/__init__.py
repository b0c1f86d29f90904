"""battdmd: Hankel time-delay DMD/DMDc identification and open-loop forecasting
of battery charge-discharge voltage, with a synthetic HPPC data generator."""

from .dmd import (
    DIVERGENCE_LIMIT,
    DivergenceError,
    DmdModel,
    Spectrum,
    fit_dmd,
    simulate_dmd,
    spectrum,
)
from .dmdc import (
    DmdcModel,
    fit_dmdc,
    fit_dmdc_full,
    fit_dmdc_reduced,
    open_loop_forecast,
    simulate_dmdc,
    transfer,
)
from .embedding import (
    EmbeddingSpec,
    SnapshotSet,
    build_hankel,
    build_input_hankel,
    build_snapshots,
    init_state,
    read_voltage,
)
from .evalsweep import (
    RssReport,
    SegmentRss,
    SweepPoint,
    SweepResult,
    rss,
    sweep_input_embedding,
    sweep_output_embedding,
    windowed_rss,
)
from .hppc import (
    AgingSpec,
    CellSpec,
    ProtocolScript,
    ProtocolStep,
    age_cell,
    hppc_protocol,
    simulate_cell,
)
from .lowrank import RankPolicy, SvdFactor, pinv_apply, reconstruct, truncated_svd
from .modelfile import load_model, save_model
from .timeseries import (
    DataFormatError,
    SplitSpec,
    TimeSeries,
    load_csv,
    save_csv,
    split,
)

__version__ = "0.1.0"

__all__ = [
    "AgingSpec",
    "CellSpec",
    "DIVERGENCE_LIMIT",
    "DataFormatError",
    "DivergenceError",
    "DmdModel",
    "DmdcModel",
    "EmbeddingSpec",
    "ProtocolScript",
    "ProtocolStep",
    "RankPolicy",
    "RssReport",
    "SegmentRss",
    "SnapshotSet",
    "Spectrum",
    "SplitSpec",
    "SvdFactor",
    "SweepPoint",
    "SweepResult",
    "TimeSeries",
    "age_cell",
    "build_hankel",
    "build_input_hankel",
    "build_snapshots",
    "fit_dmd",
    "fit_dmdc",
    "fit_dmdc_full",
    "fit_dmdc_reduced",
    "hppc_protocol",
    "init_state",
    "load_csv",
    "load_model",
    "open_loop_forecast",
    "pinv_apply",
    "read_voltage",
    "reconstruct",
    "rss",
    "save_csv",
    "save_model",
    "simulate_cell",
    "simulate_dmd",
    "simulate_dmdc",
    "spectrum",
    "split",
    "sweep_input_embedding",
    "sweep_output_embedding",
    "transfer",
    "truncated_svd",
    "windowed_rss",
]
