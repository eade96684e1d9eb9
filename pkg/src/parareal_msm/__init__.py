"""Small molecular-dynamics engine with multilevel summation electrostatics,
parareal time parallelism, a flop-cost model and a schedule simulator."""

from .core import (PHYSICAL, REDUCED, ParticleSystem, UnitsConfig,
                   generate_random_system, load_system, save_system)
from .electrostatics import CutoffParams, direct_coulomb, simple_cutoff, wolf_summation
from .msm import MsmConfig, msm_potential
from .dynamics import (CutoffField, DirectField, MsmField, PropagatorSpec, WolfField,
                       propagate, run_md, verlet_step)
from .parareal import (NonConvergenceError, PararealConfig, parareal_init,
                       parareal_iterate, parareal_run)
from .cost import ScheduleParams, msm_flops_general, msm_flops_simplified, q_ratio
from .schedule import simulate_schedule

__version__ = "0.1.0"
