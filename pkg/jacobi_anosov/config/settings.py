import os

OUT_DIR = "./output"

# Log files are only written when a directory is configured.
LOG_DIR = os.environ.get("JACOBI_ANOSOV_LOG_DIR")

SCHEMA_VERSION = "1.0"

CSV_FLOAT_FORMAT = "%.15g"

JACOBI_CSV = "jacobi.csv"
STABLE_CSV = "stable.csv"
HORIZONS_CSV = "horizons.csv"
RICCATI_CSV = "riccati.csv"
PHI_CSV = "phi.csv"
GEODESICS_CSV = "geodesics.csv"
TRACE_CSV = "trace.csv"

STABLE_JSON = "stable_data.json"
BOUND_JSON = "bound_report.json"
BOUNDS_JSON = "bounds.json"
RATES_JSON = "rate_estimate.json"
REPORT_JSON = "anosov_report.json"
CONFIG_USED_JSON = "config_used.json"

CSV_COLUMNS = {
    JACOBI_CSV: ["s", "a", "ap", "d", "dp", "dbar", "dbarp"],
    STABLE_CSV: ["s", "d", "dp", "dbar", "dbarp"],
    HORIZONS_CSV: ["direction", "horizon", "slope"],
    RICCATI_CSV: ["s", "u", "envelope"],
    PHI_CSV: ["s", "phi"],
    GEODESICS_CSV: ["geodesic_id", "gap", "min_kappa", "bounded", "parallel", "verdict"],
    TRACE_CSV: ["s", "x", "y", "vx", "vy", "kappa"],
}

JSON_SCHEMAS = {
    STABLE_JSON: "stable_data.schema.json",
    BOUND_JSON: "bound_report.schema.json",
    BOUNDS_JSON: "bounds.schema.json",
    RATES_JSON: "rate_estimate.schema.json",
    REPORT_JSON: "anosov_report.schema.json",
    CONFIG_USED_JSON: "config_used.schema.json",
}
