"""Virtual sphere-plate Casimir force experiment.

Synthesizes realistic detector signals from first-principles force models,
demodulates them with software lock-ins and feedback loops, and runs the full
electrostatic-calibration and force-gradient extraction pipeline against known
ground truth.
"""

from .analysis import (
    CalibrationFit,
    DemodRecord,
    GradientCurve,
    SpringFit,
    alpha_of,
    casimir_gradient,
    fit_calibration,
    gradient_difference_check,
    hydro_force_over_R,
    residual_stats,
    smooth_trend,
    spring_fit,
    total_gradient,
)
from .campaign import CampaignConfig, emit_theory_tables, run_campaign
from .errors import (
    CasimirRigError,
    ConfigError,
    ContactError,
    ConvergenceError,
    DomainError,
    FitDegenerateError,
    FitError,
    LoopSignError,
    SettlingError,
    SnapInError,
)
from .forces import (
    GasProperties,
    SpherePlateGeometry,
    electrostatic_force,
    electrostatic_force_with_bending,
    hydrodynamic_force,
    sigma_sphere,
)
from .lifshitz import MatsubaraGrid, gradient_over_R, matsubara_grid, pressure_curve, pressure_pp
from .lockin import FeedbackState, LockinConfig, demodulate, v0_feedback_step, vac_setpoint_step
from .materials import (
    DielectricModel,
    DrudeParams,
    TabulatedEps2,
    TaucLorentzParams,
    bundled_materials,
    drude_eps,
    eps_imag_axis,
    kramers_kronig_real,
    load_materials,
    tauc_lorentz_eps2,
)
from .optics import LayerStack, fit_film_thickness, rt_spectrum
from .rig import (
    CantileverDynamics,
    DriveState,
    ForceCurve,
    TruthParams,
    casimir_truth_curve,
    settled_outputs,
    synthesize,
)

__version__ = "0.1.0"
