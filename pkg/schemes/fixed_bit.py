# schemes/fixed_bit.py
from bcd import SolveOptions, TrialData, baseline_fixed
from scenario import SystemConfig
from schemes import Scheme


def run(cfg: SystemConfig, trial: TrialData, options: SolveOptions):
    # --b-fixed on the command line, otherwise full resolution
    b_fixed = options.b_fixed if options.b_fixed is not None else cfg.b_max
    return baseline_fixed(cfg, trial.chan, b_fixed, "optimized", options, trial.seed)


def setup(registry):
    registry.register(Scheme("fixed-bit", run, "ADC resolution pinned; beams, decoders and phases optimized"))
