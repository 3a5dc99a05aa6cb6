"""Configuration, orchestration and command line."""
from nlmc.harness.config import RunConfig, apply_overrides, load_config, validate
from nlmc.harness.runner import RunReport, emit_plotdata, run, write_outputs

__all__ = ["RunConfig", "RunReport", "apply_overrides", "emit_plotdata", "load_config", "run", "validate",
           "write_outputs"]
