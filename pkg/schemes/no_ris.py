# schemes/no_ris.py
from bcd import SolveOptions, TrialData, baseline_no_ris
from scenario import SystemConfig
from schemes import Scheme


def run(cfg: SystemConfig, trial: TrialData, options: SolveOptions):
    return baseline_no_ris(cfg, trial.direct, options)


def setup(registry):
    registry.register(Scheme("no-ris", run, "direct link only; bits, beams and decoders optimized"))
