# schemes/bcd_full.py
from bcd import SolveOptions, TrialData, bcd_solve
from scenario import SystemConfig
from schemes import Scheme


def run(cfg: SystemConfig, trial: TrialData, options: SolveOptions):
    return bcd_solve(cfg, trial.chan, options, trial.seed)


def setup(registry):
    registry.register(Scheme("bcd", run, "bits, beams, decoders and RIS phases"))
