"""File formats, grid commands, the acceptance battery and the CLI."""

from .battery import CheckResult, run_battery
from .commands import (RegionGrid, TrivializabilityReport, cmd_check, cmd_extremals, cmd_generate,
                       cmd_invariants, frame_bracket_residual, report_from_grid)
from .io import (CSV_COLUMNS, LoadedSystem, RegularityViolation, SystemFileError, invariants_csv,
                 invariants_json, load_system, system_from_dict)

__all__ = [
    "CSV_COLUMNS", "CheckResult", "LoadedSystem", "RegionGrid", "RegularityViolation", "SystemFileError",
    "TrivializabilityReport", "cmd_check", "cmd_extremals", "cmd_generate", "cmd_invariants",
    "frame_bracket_residual", "invariants_csv", "invariants_json", "load_system", "report_from_grid",
    "run_battery", "system_from_dict",
]
