from .schemas import CoveringParams, ExperimentConfig, GridParams, Report, SmoothnessParams
