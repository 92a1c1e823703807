# schemes/random_phase.py
from dataclasses import replace

from bcd import SolveOptions, TrialData, bcd_solve
from scenario import SystemConfig
from schemes import Scheme


def run(cfg: SystemConfig, trial: TrialData, options: SolveOptions):
    return bcd_solve(cfg, trial.chan, replace(options, phase_mode="random"), trial.seed)


def setup(registry):
    registry.register(Scheme("random-phase", run, "random RIS phases kept fixed; bits, beams and decoders optimized"))
